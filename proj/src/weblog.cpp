#include "medusa/weblog.hpp"

#include "medusa/canonical.hpp"
#include "medusa/sha256.hpp"

namespace medusa::chaincode {

static cjson weblog_to_json(const WebLogData& w) {
  cjson o = cjson::object();
  o["asset_id"] = w.asset_id;
  o["url"] = w.url;
  o["referer"] = w.referer;
  o["returnCode"] = w.return_code;
  o["userAgent"] = w.user_agent;
  o["datetime"] = w.datetime_ms;
  o["ip"] = w.ip;
  return o;
}

Bytes encode_weblog(const WebLogData& w) { return dump_canonical(weblog_to_json(w)); }

WebLogData decode_weblog(std::string_view bytes) {
  cjson o = parse_canonical(bytes);
  check_exact_keys(o, {"asset_id", "url", "referer", "returnCode", "userAgent", "datetime", "ip"});
  WebLogData w;
  w.asset_id = need_string(o, "asset_id");
  w.url = need_string(o, "url");
  w.referer = need_string(o, "referer");
  uint64_t code = need_u64(o, "returnCode");
  if (code > 999) raise(ErrorCode::DecodeError, "returnCode out of range");
  w.return_code = static_cast<int>(code);
  w.user_agent = need_string(o, "userAgent");
  uint64_t dt = need_u64(o, "datetime");
  if (dt > static_cast<uint64_t>(kMaxDatetimeMs)) raise(ErrorCode::DecodeError, "datetime out of range");
  w.datetime_ms = static_cast<int64_t>(dt);
  w.ip = need_string(o, "ip");
  return w;
}

void validate_weblog(const WebLogData& w) {
  if (w.asset_id.empty()) raise(ErrorCode::InvalidAsset, "asset_id must not be empty");
  for (char c : w.asset_id) {
    if (static_cast<unsigned char>(c) < 0x20)
      raise(ErrorCode::InvalidAsset, "asset_id must not contain control characters");
  }
  if (w.return_code < 100 || w.return_code > 599)
    raise(ErrorCode::InvalidAsset, "returnCode must be in [100, 599]");
  if (!is_ip_literal(w.ip)) raise(ErrorCode::InvalidAsset, "ip is not a valid address literal");
  if (w.datetime_ms < 0 || w.datetime_ms > kMaxDatetimeMs)
    raise(ErrorCode::InvalidAsset, "datetime out of sane bounds");
  if (!is_valid_utf8(w.url) || !is_valid_utf8(w.referer) || !is_valid_utf8(w.user_agent) ||
      !is_valid_utf8(w.asset_id))
    raise(ErrorCode::InvalidAsset, "text fields must be UTF-8");
}

std::string derive_asset_id(const WebLogData& w) {
  WebLogData blank = w;
  blank.asset_id.clear();
  Digest32 digest = sha256(encode_weblog(blank));
  return to_hex(digest.data(), 16);
}

std::string weblog_key(std::string_view asset_id) {
  return std::string(weblog_key_prefix()) + std::string(asset_id);
}

}  // namespace medusa::chaincode
