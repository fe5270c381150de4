#pragma once

#include <string_view>

#include "medusa/bytes.hpp"

namespace medusa {

Digest32 sha256(std::string_view bytes);

// Streaming variant for multi-part messages.
class Sha256 {
 public:
  Sha256();
  Sha256& update(std::string_view bytes);
  Sha256& update(const uint8_t* data, size_t n);
  Digest32 finish();

 private:
  struct State {
    // mirrors crypto_hash_sha256_state without pulling sodium.h into headers
    alignas(16) unsigned char opaque[128];
  } state_;
};

}  // namespace medusa
