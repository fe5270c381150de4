#include "medusa/identity.hpp"

#include <sodium.h>

#include "medusa/canonical.hpp"
#include "medusa/sha256.hpp"

namespace medusa::identity {

namespace {

struct SodiumInit {
  SodiumInit() {
    if (sodium_init() < 0) std::abort();
  }
};
const SodiumInit sodium_init_once;

}  // namespace

KeyPair KeyPair::from_seed(const Seed& seed) {
  KeyPair kp;
  kp.seed = seed;
  crypto_sign_seed_keypair(kp.pk.data(), kp.sk.data(), seed.data());
  return kp;
}

KeyPair KeyPair::generate() {
  Seed seed{};
  randombytes_buf(seed.data(), seed.size());
  return from_seed(seed);
}

KeyPair KeyPair::generate(Rng& rng) {
  Seed seed{};
  std::string raw = rng.bytes(seed.size());
  for (size_t i = 0; i < seed.size(); ++i) seed[i] = static_cast<uint8_t>(raw[i]);
  return from_seed(seed);
}

Sig64 sign_detached(const KeyPair& kp, std::string_view message) {
  Sig64 sig{};
  crypto_sign_detached(sig.data(), nullptr, reinterpret_cast<const unsigned char*>(message.data()),
                       message.size(), kp.sk.data());
  return sig;
}

bool verify_detached(const PublicKey& pk, const Sig64& sig, std::string_view message) {
  return crypto_sign_verify_detached(sig.data(),
                                     reinterpret_cast<const unsigned char*>(message.data()),
                                     message.size(), pk.data()) == 0;
}

void random_bytes(void* out, size_t n) { randombytes_buf(out, n); }

void validate_datasource(const DataSource& ds) {
  if (ds.datasource_id.empty()) raise(ErrorCode::InvalidConfig, "datasourceId must not be empty");
  for (char c : ds.datasource_id) {
    if (static_cast<unsigned char>(c) < 0x21)
      raise(ErrorCode::InvalidConfig, "datasourceId must not contain spaces or control characters");
  }
  if (ds.port < 1) raise(ErrorCode::InvalidPort, "port must be in [1, 65535]");
  if (!is_ip_literal(ds.ip)) raise(ErrorCode::InvalidAddress, "ip is not a valid address literal");
  if (!is_valid_utf8(ds.username) || !is_valid_utf8(ds.url))
    raise(ErrorCode::InvalidConfig, "username/url must be UTF-8 text");
}

// Canonical field order follows the participant attribute list:
// datasourceId, ip, port, username, password_digest, salt, url, public_key.
Bytes encode_participant_record(const ParticipantRecord& rec) {
  cjson o = cjson::object();
  o["datasourceId"] = rec.ds.datasource_id;
  o["ip"] = rec.ds.ip;
  o["port"] = rec.ds.port;
  o["username"] = rec.ds.username;
  o["password_digest"] = to_hex(rec.password_digest);
  o["salt"] = to_hex(rec.salt);
  o["url"] = rec.ds.url;
  o["public_key"] = to_hex(rec.public_key);
  return dump_canonical(o);
}

ParticipantRecord decode_participant_record(std::string_view bytes) {
  cjson o = parse_canonical(bytes);
  check_exact_keys(o, {"datasourceId", "ip", "port", "username", "password_digest", "salt", "url",
                       "public_key"});
  ParticipantRecord rec;
  rec.ds.datasource_id = need_string(o, "datasourceId");
  rec.ds.ip = need_string(o, "ip");
  uint32_t port = need_u32(o, "port");
  if (port < 1 || port > 65535) raise(ErrorCode::DecodeError, "port out of range");
  rec.ds.port = static_cast<uint16_t>(port);
  rec.ds.username = need_string(o, "username");
  rec.password_digest = array_from_hex<32>(need_string(o, "password_digest"));
  rec.salt = from_hex(need_string(o, "salt"));
  if (rec.salt.size() != 16) raise(ErrorCode::DecodeError, "salt must be 16 bytes");
  rec.ds.url = need_string(o, "url");
  rec.public_key = array_from_hex<32>(need_string(o, "public_key"));
  return rec;
}

Digest32 password_digest(std::string_view salt, std::string_view password) {
  Sha256 h;
  h.update(salt);
  h.update(password);
  return h.finish();
}

Credential Registry::register_impl(const DataSource& ds, std::string_view password,
                                   const Seed& seed, const Bytes& salt) {
  validate_datasource(ds);
  if (records_.count(ds.datasource_id))
    raise(ErrorCode::DuplicateParticipant, "datasourceId already registered: " + ds.datasource_id);
  KeyPair kp = KeyPair::from_seed(seed);
  ParticipantRecord rec;
  rec.ds = ds;
  rec.salt = salt;
  rec.password_digest = password_digest(salt, password);
  rec.public_key = kp.pk;
  records_[ds.datasource_id] = std::move(rec);
  return Credential{ds.datasource_id, kp};
}

Credential Registry::register_datasource(const DataSource& ds, std::string_view password) {
  Seed seed{};
  randombytes_buf(seed.data(), seed.size());
  Bytes salt(16, '\0');
  randombytes_buf(salt.data(), salt.size());
  return register_impl(ds, password, seed, salt);
}

Credential Registry::register_datasource(const DataSource& ds, std::string_view password,
                                         Rng& rng) {
  Seed seed{};
  std::string raw = rng.bytes(seed.size());
  for (size_t i = 0; i < seed.size(); ++i) seed[i] = static_cast<uint8_t>(raw[i]);
  return register_impl(ds, password, seed, rng.bytes(16));
}

void Registry::put(ParticipantRecord rec) {
  records_[rec.ds.datasource_id] = std::move(rec);
}

bool Registry::authenticate(std::string_view datasource_id, std::string_view password) const {
  auto it = records_.find(std::string(datasource_id));
  if (it == records_.end()) return false;
  Digest32 digest = password_digest(it->second.salt, password);
  return sodium_memcmp(digest.data(), it->second.password_digest.data(), digest.size()) == 0;
}

bool Registry::verify(const Signature& sig, std::string_view message) const {
  auto it = records_.find(sig.signer_id);
  if (it == records_.end()) raise(ErrorCode::UnknownSigner, "no such participant: " + sig.signer_id);
  return verify_detached(it->second.public_key, sig.bytes, message);
}

const ParticipantRecord* Registry::find(std::string_view datasource_id) const {
  auto it = records_.find(std::string(datasource_id));
  return it == records_.end() ? nullptr : &it->second;
}

Registry Registry::from_state(const state::StateView& view) {
  Registry reg;
  view.for_each_prefix(participant_key_prefix(),
                       [&](const std::string&, const state::Entry& entry) {
                         reg.put(decode_participant_record(entry.value));
                       });
  return reg;
}

std::string Registry::export_canonical() const {
  std::string out;
  for (const auto& [id, rec] : records_) {
    out += encode_participant_record(rec);
    out.push_back('\n');
  }
  return out;
}

Signature sign(const Credential& cred, std::string_view message) {
  return Signature{cred.participant_id, sign_detached(cred.keys, message)};
}

std::string participant_key(std::string_view datasource_id) {
  return std::string(participant_key_prefix()) + std::string(datasource_id);
}

}  // namespace medusa::identity
