#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "medusa/bytes.hpp"
#include "medusa/rng.hpp"
#include "medusa/state.hpp"

namespace medusa::identity {

using PublicKey = std::array<uint8_t, 32>;
using SecretKey = std::array<uint8_t, 64>;  // ed25519 expanded secret key
using Seed = std::array<uint8_t, 32>;

struct KeyPair {
  PublicKey pk{};
  SecretKey sk{};
  Seed seed{};

  static KeyPair from_seed(const Seed& seed);
  static KeyPair generate();          // OS randomness
  static KeyPair generate(Rng& rng);  // deterministic (simulation)
};

Sig64 sign_detached(const KeyPair& kp, std::string_view message);
bool verify_detached(const PublicKey& pk, const Sig64& sig, std::string_view message);

// OS-level randomness (libsodium), for nonces and salts outside simulations.
void random_bytes(void* out, size_t n);

struct Signature {
  std::string signer_id;
  Sig64 bytes{};
};

// The single participant type: owner/source/sink of audit log data.
struct DataSource {
  std::string datasource_id;
  std::string ip;
  uint16_t port = 0;
  std::string username;
  std::string url;
};

// Throws InvalidPort / InvalidAddress / InvalidAsset on bad descriptors.
void validate_datasource(const DataSource& ds);

// What gets persisted in world state under "participant:<id>". Never holds
// the plaintext password or the private key.
struct ParticipantRecord {
  DataSource ds;
  Bytes salt;  // 16 random bytes
  Digest32 password_digest{};
  PublicKey public_key{};
};

Bytes encode_participant_record(const ParticipantRecord& rec);
ParticipantRecord decode_participant_record(std::string_view bytes);

Digest32 password_digest(std::string_view salt, std::string_view password);

struct Credential {
  std::string participant_id;
  KeyPair keys;
};

// In-memory participant registry. In the full pipeline the same records live
// in a channel's world state; this class is the module-level surface and the
// view the pipeline builds over committed state.
class Registry {
 public:
  Credential register_datasource(const DataSource& ds, std::string_view password);
  Credential register_datasource(const DataSource& ds, std::string_view password, Rng& rng);
  void put(ParticipantRecord rec);  // pre-built record (pipeline path)

  bool authenticate(std::string_view datasource_id, std::string_view password) const;
  // Throws UnknownSigner when signer_id is not registered.
  bool verify(const Signature& sig, std::string_view message) const;

  const ParticipantRecord* find(std::string_view datasource_id) const;
  size_t size() const { return records_.size(); }
  const std::map<std::string, ParticipantRecord>& records() const { return records_; }

  static Registry from_state(const state::StateView& view);

  // One canonical record per line, sorted by datasourceId. Private keys are
  // never part of a record; passwords appear only as salted digests.
  std::string export_canonical() const;

 private:
  Credential register_impl(const DataSource& ds, std::string_view password, const Seed& seed,
                           const Bytes& salt);
  std::map<std::string, ParticipantRecord> records_;
};

Signature sign(const Credential& cred, std::string_view message);

inline const char* participant_key_prefix() { return "participant:"; }
std::string participant_key(std::string_view datasource_id);

}  // namespace medusa::identity
