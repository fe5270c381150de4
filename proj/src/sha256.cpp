#include "medusa/sha256.hpp"

#include <sodium.h>

namespace medusa {

static_assert(sizeof(crypto_hash_sha256_state) <= 128);

Digest32 sha256(std::string_view bytes) {
  Digest32 out{};
  crypto_hash_sha256(out.data(), reinterpret_cast<const unsigned char*>(bytes.data()),
                     bytes.size());
  return out;
}

Sha256::Sha256() {
  crypto_hash_sha256_init(reinterpret_cast<crypto_hash_sha256_state*>(state_.opaque));
}

Sha256& Sha256::update(std::string_view bytes) {
  return update(reinterpret_cast<const uint8_t*>(bytes.data()), bytes.size());
}

Sha256& Sha256::update(const uint8_t* data, size_t n) {
  crypto_hash_sha256_update(reinterpret_cast<crypto_hash_sha256_state*>(state_.opaque), data, n);
  return *this;
}

Digest32 Sha256::finish() {
  Digest32 out{};
  crypto_hash_sha256_final(reinterpret_cast<crypto_hash_sha256_state*>(state_.opaque), out.data());
  return out;
}

}  // namespace medusa
