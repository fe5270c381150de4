#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "medusa/errors.hpp"

namespace medusa {

// Byte buffers are carried as std::string throughout; contents are raw bytes
// unless a name says otherwise (hex, text).
using Bytes = std::string;

using Digest32 = std::array<uint8_t, 32>;
using Sig64 = std::array<uint8_t, 64>;

inline constexpr Digest32 kZeroDigest{};

std::string to_hex(const uint8_t* data, size_t n);

template <size_t N>
std::string to_hex(const std::array<uint8_t, N>& a) {
  return to_hex(a.data(), N);
}

inline std::string to_hex(std::string_view bytes) {
  return to_hex(reinterpret_cast<const uint8_t*>(bytes.data()), bytes.size());
}

// Strict: even length, lowercase [0-9a-f] only. Throws DecodeError otherwise.
Bytes from_hex(std::string_view hex);

template <size_t N>
std::array<uint8_t, N> array_from_hex(std::string_view hex) {
  if (hex.size() != 2 * N) raise(ErrorCode::DecodeError, "hex field has wrong length");
  Bytes raw = from_hex(hex);
  std::array<uint8_t, N> out{};
  for (size_t i = 0; i < N; ++i) out[i] = static_cast<uint8_t>(raw[i]);
  return out;
}

bool is_valid_utf8(std::string_view s);

// IPv4 or IPv6 address literal (inet_pton).
bool is_ip_literal(const std::string& s);

}  // namespace medusa
