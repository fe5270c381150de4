#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "medusa/bytes.hpp"
#include "medusa/errors.hpp"

namespace medusa::chaincode {

// The single asset type: one web access log record.
struct WebLogData {
  std::string asset_id;
  std::string url;
  std::string referer;   // empty means none
  int return_code = 0;   // HTTP status, 100..599
  std::string user_agent;
  int64_t datetime_ms = 0;  // UTC milliseconds since epoch
  std::string ip;

  friend bool operator==(const WebLogData&, const WebLogData&) = default;
};

// Last representable instant: 9999-12-31T23:59:59.999Z.
inline constexpr int64_t kMaxDatetimeMs = 253402300799999;

// Canonical field order: asset_id, url, referer, returnCode, userAgent,
// datetime, ip.
Bytes encode_weblog(const WebLogData& w);
WebLogData decode_weblog(std::string_view bytes);

// Throws InvalidAsset when an invariant is violated (returnCode range, ip
// literal, datetime bounds, empty/unprintable asset_id, non-UTF-8 text).
void validate_weblog(const WebLogData& w);

// Content-addressed id: first 16 bytes of SHA-256 over the canonical bytes
// with asset_id set to "", as lowercase hex (32 chars).
std::string derive_asset_id(const WebLogData& w);

inline const char* weblog_key_prefix() { return "weblog:"; }
std::string weblog_key(std::string_view asset_id);

}  // namespace medusa::chaincode
