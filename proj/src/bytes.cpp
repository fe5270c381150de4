#include "medusa/bytes.hpp"

#include <arpa/inet.h>

namespace medusa {

static const char* kHexDigits = "0123456789abcdef";

std::string to_hex(const uint8_t* data, size_t n) {
  std::string out;
  out.resize(n * 2);
  for (size_t i = 0; i < n; ++i) {
    out[2 * i] = kHexDigits[data[i] >> 4];
    out[2 * i + 1] = kHexDigits[data[i] & 0x0f];
  }
  return out;
}

static int hex_nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;  // uppercase is not canonical
}

Bytes from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) raise(ErrorCode::DecodeError, "hex string has odd length");
  Bytes out;
  out.resize(hex.size() / 2);
  for (size_t i = 0; i < out.size(); ++i) {
    int hi = hex_nibble(hex[2 * i]);
    int lo = hex_nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) raise(ErrorCode::DecodeError, "invalid hex digit");
    out[i] = static_cast<char>((hi << 4) | lo);
  }
  return out;
}

bool is_valid_utf8(std::string_view s) {
  size_t i = 0;
  const auto n = s.size();
  while (i < n) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    size_t len;
    uint32_t cp;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xe0) == 0xc0) {
      len = 2;
      cp = c & 0x1f;
    } else if ((c & 0xf0) == 0xe0) {
      len = 3;
      cp = c & 0x0f;
    } else if ((c & 0xf8) == 0xf0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > n) return false;
    for (size_t k = 1; k < len; ++k) {
      unsigned char cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xc0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3f);
    }
    // overlong forms, surrogates, out of range
    if (len == 2 && cp < 0x80) return false;
    if (len == 3 && cp < 0x800) return false;
    if (len == 4 && cp < 0x10000) return false;
    if (cp > 0x10ffff) return false;
    if (cp >= 0xd800 && cp <= 0xdfff) return false;
    i += len;
  }
  return true;
}

bool is_ip_literal(const std::string& s) {
  unsigned char buf[sizeof(struct in6_addr)];
  if (inet_pton(AF_INET, s.c_str(), buf) == 1) return true;
  if (inet_pton(AF_INET6, s.c_str(), buf) == 1) return true;
  return false;
}

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::None: return "None";
    case ErrorCode::ChainLinkMismatch: return "ChainLinkMismatch";
    case ErrorCode::NonSequentialNumber: return "NonSequentialNumber";
    case ErrorCode::DataHashMismatch: return "DataHashMismatch";
    case ErrorCode::ChainNotVerified: return "ChainNotVerified";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::DecodeError: return "DecodeError";
    case ErrorCode::DuplicateParticipant: return "DuplicateParticipant";
    case ErrorCode::InvalidPort: return "InvalidPort";
    case ErrorCode::InvalidAddress: return "InvalidAddress";
    case ErrorCode::UnknownSigner: return "UnknownSigner";
    case ErrorCode::AuthFailed: return "AuthFailed";
    case ErrorCode::DuplicateAsset: return "DuplicateAsset";
    case ErrorCode::UnregisteredSubmitter: return "UnregisteredSubmitter";
    case ErrorCode::InvalidAsset: return "InvalidAsset";
    case ErrorCode::InvalidRange: return "InvalidRange";
    case ErrorCode::UnknownFunction: return "UnknownFunction";
    case ErrorCode::PolicyUnsatisfied: return "PolicyUnsatisfied";
    case ErrorCode::ChaincodeError: return "ChaincodeError";
    case ErrorCode::BadClientSignature: return "BadClientSignature";
    case ErrorCode::NotChannelMember: return "NotChannelMember";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::TamperDetected: return "TamperDetected";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::FileUnreadable: return "FileUnreadable";
    case ErrorCode::SubmissionFailure: return "SubmissionFailure";
    case ErrorCode::ChannelExists: return "ChannelExists";
    case ErrorCode::InvalidPolicy: return "InvalidPolicy";
    case ErrorCode::LockBusy: return "LockBusy";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace medusa
