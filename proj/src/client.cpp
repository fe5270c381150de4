#include "medusa/client.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <fstream>

#include "medusa/canonical.hpp"
#include "medusa/txflow.hpp"

namespace fs = std::filesystem;

namespace medusa::client {

namespace {

uint64_t now_ms() {
  return static_cast<uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                   std::chrono::system_clock::now().time_since_epoch())
                                   .count());
}

// One writer at a time; readers share. Non-blocking: a held lock is an error,
// not a wait.
struct DirLock {
  int fd = -1;

  DirLock(const std::string& path, bool exclusive) {
    fd = ::open(path.c_str(), O_CREAT | O_RDWR, 0644);
    if (fd < 0) raise(ErrorCode::IoError, "cannot open lock file " + path);
    if (::flock(fd, (exclusive ? LOCK_EX : LOCK_SH) | LOCK_NB) != 0) {
      ::close(fd);
      fd = -1;
      raise(ErrorCode::LockBusy, "another process holds the data directory");
    }
  }
  ~DirLock() {
    if (fd >= 0) {
      ::flock(fd, LOCK_UN);
      ::close(fd);
    }
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;
};

void write_secret_file(const std::string& path, const std::string& content) {
  int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
  if (fd < 0) raise(ErrorCode::IoError, "cannot write " + path);
  size_t off = 0;
  while (off < content.size()) {
    ssize_t n = ::write(fd, content.data() + off, content.size() - off);
    if (n <= 0) {
      ::close(fd);
      raise(ErrorCode::IoError, "short write to " + path);
    }
    off += static_cast<size_t>(n);
  }
  ::close(fd);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot read " + path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::string strip_line(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

identity::Seed seed_from_hex(const std::string& hex) {
  return array_from_hex<32>(strip_line(hex));
}

void check_channel_id(const std::string& channel_id) {
  if (channel_id.empty()) raise(ErrorCode::InvalidConfig, "channel id must not be empty");
  for (char c : channel_id) {
    if (c == '/' || c == '\\' || static_cast<unsigned char>(c) <= 0x20)
      raise(ErrorCode::InvalidConfig, "channel id must not contain separators or spaces");
  }
  if (channel_id == "." || channel_id == "..")
    raise(ErrorCode::InvalidConfig, "channel id must not be a path alias");
}

void check_ds_id_for_path(const std::string& ds_id) {
  if (ds_id.empty()) raise(ErrorCode::InvalidConfig, "datasource id must not be empty");
  for (char c : ds_id) {
    if (c == '/' || c == '\\')
      raise(ErrorCode::InvalidConfig, "datasource id must not contain path separators");
  }
  if (ds_id == "." || ds_id == "..")
    raise(ErrorCode::InvalidConfig, "datasource id must not be a path alias");
}

}  // namespace

// ---------------------------------------------------------------------------
// CliConfig
// ---------------------------------------------------------------------------

CliConfig CliConfig::load(const std::string& path) {
  CliConfig cfg;
  std::ifstream in(path, std::ios::binary);
  if (!in) return cfg;
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  cjson o = parse_canonical(all);
  check_keys(o, {}, {"default_channel", "output_format"});
  if (o.contains("default_channel")) cfg.default_channel = need_string(o, "default_channel");
  if (o.contains("output_format")) {
    cfg.output_format = need_string(o, "output_format");
    if (cfg.output_format != "table" && cfg.output_format != "canonical")
      raise(ErrorCode::InvalidConfig, "output_format must be table or canonical");
  }
  return cfg;
}

void CliConfig::save(const std::string& path) const {
  cjson o = cjson::object();
  o["default_channel"] = default_channel;
  o["output_format"] = output_format;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::IoError, "cannot write " + path);
  out << dump_canonical(o) << "\n";
}

// ---------------------------------------------------------------------------
// Client
// ---------------------------------------------------------------------------

struct Client::Runtime {
  txflow::ChannelRuntime rt;
  std::vector<std::pair<std::string, identity::KeyPair>> peer_keys;
};

Client::Client(std::string data_dir) : data_dir_(std::move(data_dir)) {
  if (data_dir_.empty()) raise(ErrorCode::InvalidConfig, "data directory must not be empty");
  fs::create_directories(data_dir_);
  fs::create_directories(data_dir_ + "/channels");
  fs::create_directories(data_dir_ + "/keys");
}

std::string Client::config_path() const { return data_dir_ + "/config"; }
std::string Client::channel_dir(const std::string& channel_id) const {
  return data_dir_ + "/channels/" + channel_id;
}
std::string Client::blocks_path(const std::string& channel_id) const {
  return channel_dir(channel_id) + "/blocks.dat";
}
std::string Client::key_path(const std::string& channel_id, const std::string& ds_id) const {
  return data_dir_ + "/keys/" + channel_id + "/" + ds_id + ".key";
}

void Client::channel_create(const std::string& channel_id, channel::Pipeline pipeline,
                            uint32_t policy_k, uint32_t peer_count, uint32_t max_block_txs,
                            uint64_t max_wait_ms) {
  check_channel_id(channel_id);
  DirLock lock(data_dir_ + "/.lock", true);
  if (fs::exists(channel_dir(channel_id)))
    raise(ErrorCode::ChannelExists, "channel " + channel_id + " already exists");

  identity::KeyPair orderer = identity::KeyPair::generate();
  std::vector<std::pair<std::string, identity::KeyPair>> peers;
  for (uint32_t i = 1; i <= peer_count; ++i)
    peers.emplace_back("peer" + std::to_string(i), identity::KeyPair::generate());

  channel::ChannelConfig cfg;
  cfg.channel_id = channel_id;
  cfg.pipeline = pipeline;
  cfg.orderer_public_key = orderer.pk;
  cfg.policy_k = policy_k;
  cfg.max_block_txs = max_block_txs;
  cfg.max_wait_ms = max_wait_ms;
  for (const auto& [pid, kp] : peers)
    cfg.peers.push_back(channel::PeerInfo{pid, kp.pk, true});
  channel::validate_channel_config(cfg);  // InvalidPolicy before touching disk

  txflow::ChannelRuntime rt = txflow::ChannelRuntime::create(cfg, orderer, now_ms());

  fs::create_directories(channel_dir(channel_id));
  write_secret_file(channel_dir(channel_id) + "/orderer.key", to_hex(orderer.seed) + "\n");
  std::string peer_lines;
  for (const auto& [pid, kp] : peers) peer_lines += pid + " " + to_hex(kp.seed) + "\n";
  write_secret_file(channel_dir(channel_id) + "/peers.key", peer_lines);
  ledger::BlockStore store(blocks_path(channel_id));
  for (const auto& record : rt.chain().records()) store.append_record(record);
}

Client::Runtime Client::load_runtime(const std::string& channel_id) const {
  check_channel_id(channel_id);
  if (!fs::exists(channel_dir(channel_id)))
    raise(ErrorCode::NotFound, "no channel named " + channel_id);
  identity::KeyPair orderer =
      identity::KeyPair::from_seed(seed_from_hex(read_text_file(channel_dir(channel_id) + "/orderer.key")));
  ledger::BlockStore store(blocks_path(channel_id));
  txflow::ChannelRuntime rt = txflow::ChannelRuntime::load(store.read_all_records(), orderer);

  Runtime out{std::move(rt), {}};
  std::istringstream peers(read_text_file(channel_dir(channel_id) + "/peers.key"));
  std::string line;
  while (std::getline(peers, line)) {
    line = strip_line(line);
    if (line.empty()) continue;
    size_t sp = line.find(' ');
    if (sp == std::string::npos)
      raise(ErrorCode::DecodeError, "malformed peer key line");
    out.peer_keys.emplace_back(line.substr(0, sp),
                               identity::KeyPair::from_seed(seed_from_hex(line.substr(sp + 1))));
  }
  return out;
}

// Submits one envelope, cuts and commits, persists the new blocks, and
// reports where the transaction landed.
AppendResult Client::run_envelope(Runtime& rt, const std::string& channel_id, tx::Envelope env,
                                  Bytes* /*response*/) {
  Digest32 txid = env.tx_id;
  txflow::OrderingService& ord = rt.rt.ordering();
  if (!ord.submit(std::move(env), now_ms()))
    raise(ErrorCode::SubmissionFailure,
          "ordering rejected the envelope: " + ord.drop_log().back().reason);

  ledger::BlockStore store(blocks_path(channel_id));
  AppendResult result;
  result.tx_id = to_hex(txid);
  bool found = false;
  while (auto batch = ord.force_cut()) {
    const ledger::Block& b = rt.rt.commit_batch(std::move(*batch), now_ms(), nullptr);
    store.append_record(rt.rt.chain().records().back());
    for (size_t i = 0; i < b.transactions.size(); ++i) {
      if (b.transactions[i].tx_id == txid) {
        result.block_number = b.header.block_number;
        result.flag = std::string(ledger::validity_name(b.validity_flags[i]));
        found = true;
      }
    }
  }
  if (!found) raise(ErrorCode::SubmissionFailure, "transaction did not commit");
  return result;
}

namespace {

// Embedded endorsement: every configured peer endorses against the single
// committed world state.
tx::Envelope endorse_embedded(const txflow::ChannelRuntime& rt,
                              const std::vector<std::pair<std::string, identity::KeyPair>>& keys,
                              const tx::SignedProposal& sp, Bytes* response) {
  state::MapStateView view(rt.world());
  std::vector<txflow::Endorser> endorsers;
  for (const auto& pi : rt.config().peers) {
    if (!pi.endorser) continue;
    const identity::KeyPair* kp = nullptr;
    for (const auto& [pid, k] : keys) {
      if (pid == pi.peer_id) kp = &k;
    }
    if (!kp) raise(ErrorCode::UnknownSigner, "no stored key for peer " + pi.peer_id);
    endorsers.push_back(txflow::Endorser{pi.peer_id, kp, &view, true, nullptr});
  }
  txflow::EndorseResult r = txflow::endorse(sp, endorsers, rt.config());
  if (!r.ok()) {
    if (r.error == ErrorCode::ChaincodeError) raise(r.chaincode_error, r.detail);
    raise(r.error, r.detail);
  }
  if (response) *response = r.response;
  return std::move(*r.envelope);
}

tx::Envelope raw_envelope(const tx::SignedProposal& sp) {
  tx::Envelope env;
  env.tx_id = tx::compute_tx_id(sp.proposal);
  env.signed_proposal = sp;
  return env;
}

identity::Credential load_credential(const std::string& path, const std::string& ds_id,
                                     const identity::Registry& registry) {
  if (!fs::exists(path)) raise(ErrorCode::NotFound, "no stored key for " + ds_id);
  identity::Credential cred{ds_id, identity::KeyPair::from_seed(seed_from_hex(read_text_file(path)))};
  const identity::ParticipantRecord* rec = registry.find(ds_id);
  if (!rec || rec->public_key != cred.keys.pk)
    raise(ErrorCode::UnknownSigner, "stored key does not match the registered public key");
  return cred;
}

void authenticate_or_die(const identity::Registry& registry, const std::string& ds_id,
                         std::string_view password) {
  if (!registry.authenticate(ds_id, password))
    raise(ErrorCode::AuthFailed, "unknown datasource or wrong password");
}

}  // namespace

void Client::datasource_register(const std::string& channel_id, const identity::DataSource& ds,
                                 std::string_view password) {
  check_ds_id_for_path(ds.datasource_id);
  DirLock lock(data_dir_ + "/.lock", true);
  Runtime rt = load_runtime(channel_id);
  state::MapStateView view(rt.rt.world());
  identity::Registry registry = identity::Registry::from_state(view);
  identity::Credential cred = registry.register_datasource(ds, password);
  const identity::ParticipantRecord& rec = *registry.find(ds.datasource_id);

  tx::SignedProposal sp = txflow::make_registration_proposal(cred, channel_id, rec);
  tx::Envelope env = rt.rt.config().pipeline == channel::Pipeline::ORDER_EXECUTE
                         ? raw_envelope(sp)
                         : endorse_embedded(rt.rt, rt.peer_keys, sp, nullptr);
  AppendResult r = run_envelope(rt, channel_id, std::move(env), nullptr);
  if (r.flag != "VALID")
    raise(ErrorCode::SubmissionFailure, "registration recorded " + r.flag);

  fs::create_directories(data_dir_ + "/keys/" + channel_id);
  write_secret_file(key_path(channel_id, ds.datasource_id), to_hex(cred.keys.seed) + "\n");
}

AppendResult Client::append(const std::string& channel_id, const std::string& datasource_id,
                            std::string_view password, chaincode::WebLogData w) {
  check_ds_id_for_path(datasource_id);
  DirLock lock(data_dir_ + "/.lock", true);
  Runtime rt = load_runtime(channel_id);
  state::MapStateView view(rt.rt.world());
  identity::Registry registry = identity::Registry::from_state(view);
  authenticate_or_die(registry, datasource_id, password);
  identity::Credential cred =
      load_credential(key_path(channel_id, datasource_id), datasource_id, registry);

  if (w.asset_id.empty()) w.asset_id = chaincode::derive_asset_id(w);
  chaincode::validate_weblog(w);

  tx::SignedProposal sp = txflow::make_data_append_proposal(cred, channel_id, w);
  tx::Envelope env = rt.rt.config().pipeline == channel::Pipeline::ORDER_EXECUTE
                         ? raw_envelope(sp)
                         : endorse_embedded(rt.rt, rt.peer_keys, sp, nullptr);
  AppendResult r = run_envelope(rt, channel_id, std::move(env), nullptr);
  r.asset_id = w.asset_id;
  if (r.flag == "MVCC_CONFLICT")
    raise(ErrorCode::DuplicateAsset,
          "asset " + w.asset_id + " already exists (recorded invalid at block " +
              std::to_string(r.block_number) + ")");
  if (r.flag != "VALID")
    raise(ErrorCode::SubmissionFailure, "append recorded " + r.flag);
  return r;
}

ingest::IngestReport Client::ingest_log(const std::string& channel_id,
                                        const std::string& datasource_id,
                                        std::string_view password, const std::string& path,
                                        size_t batch_size, bool escapes) {
  check_ds_id_for_path(datasource_id);
  DirLock lock(data_dir_ + "/.lock", true);
  Runtime rt = load_runtime(channel_id);
  state::MapStateView view(rt.rt.world());
  identity::Registry registry = identity::Registry::from_state(view);
  authenticate_or_die(registry, datasource_id, password);
  identity::Credential cred =
      load_credential(key_path(channel_id, datasource_id), datasource_id, registry);

  const bool order_execute = rt.rt.config().pipeline == channel::Pipeline::ORDER_EXECUTE;
  ledger::BlockStore store(blocks_path(channel_id));

  auto submit = [&](const std::vector<chaincode::WebLogData>& batch) {
    std::vector<ErrorCode> outcomes(batch.size(), ErrorCode::SubmissionFailure);
    std::map<std::string, size_t> position;  // tx_id hex -> batch index
    txflow::OrderingService& ord = rt.rt.ordering();
    for (size_t i = 0; i < batch.size(); ++i) {
      tx::SignedProposal sp = txflow::make_data_append_proposal(cred, channel_id, batch[i]);
      tx::Envelope env;
      if (order_execute) {
        env = raw_envelope(sp);
      } else {
        try {
          env = endorse_embedded(rt.rt, rt.peer_keys, sp, nullptr);
        } catch (const Error& e) {
          outcomes[i] = e.code();
          continue;
        }
      }
      std::string txid = to_hex(env.tx_id);
      if (ord.submit(std::move(env), now_ms())) position[txid] = i;
    }
    while (auto cut = ord.force_cut()) {
      const ledger::Block& b = rt.rt.commit_batch(std::move(*cut), now_ms(), nullptr);
      store.append_record(rt.rt.chain().records().back());
      for (size_t i = 0; i < b.transactions.size(); ++i) {
        auto it = position.find(to_hex(b.transactions[i].tx_id));
        if (it == position.end()) continue;
        switch (b.validity_flags[i]) {
          case ledger::TxValidity::VALID: outcomes[it->second] = ErrorCode::None; break;
          case ledger::TxValidity::MVCC_CONFLICT:
            outcomes[it->second] = ErrorCode::DuplicateAsset;
            break;
          default: outcomes[it->second] = ErrorCode::SubmissionFailure; break;
        }
      }
    }
    return outcomes;
  };

  return ingest::ingest_file(path, batch_size, submit, escapes);
}

QueryResult Client::query(const std::string& channel_id, const std::string& datasource_id,
                          std::string_view password, const chaincode::QuerySpec& q) {
  check_ds_id_for_path(datasource_id);
  DirLock lock(data_dir_ + "/.lock", true);
  Runtime rt = load_runtime(channel_id);
  state::MapStateView view(rt.rt.world());
  identity::Registry registry = identity::Registry::from_state(view);
  authenticate_or_die(registry, datasource_id, password);
  identity::Credential cred =
      load_credential(key_path(channel_id, datasource_id), datasource_id, registry);

  tx::SignedProposal sp = txflow::make_query_proposal(cred, channel_id, q);
  QueryResult result;
  Bytes response;
  tx::Envelope env;
  if (rt.rt.config().pipeline == channel::Pipeline::ORDER_EXECUTE) {
    env = raw_envelope(sp);
  } else {
    env = endorse_embedded(rt.rt, rt.peer_keys, sp, &response);
  }
  result.evidence = run_envelope(rt, channel_id, std::move(env), nullptr);
  if (rt.rt.config().pipeline == channel::Pipeline::ORDER_EXECUTE) {
    // executed at commit; read the post-commit state the execution saw
    state::MapStateView post(rt.rt.world());
    result.rows = chaincode::select_weblog(post, q);
  } else {
    result.rows = chaincode::decode_weblog_list(response);
  }
  return result;
}

ledger::VerificationReport Client::verify(const std::string& channel_id) const {
  check_channel_id(channel_id);
  DirLock lock(data_dir_ + "/.lock", false);
  if (!fs::exists(blocks_path(channel_id)))
    raise(ErrorCode::NotFound, "no channel named " + channel_id);
  std::string file_bytes = read_text_file(blocks_path(channel_id));
  return ledger::verify_file_bytes(file_bytes, txflow::make_replayer());
}

Bytes Client::block_show(const std::string& channel_id, uint64_t block_number) const {
  check_channel_id(channel_id);
  DirLock lock(data_dir_ + "/.lock", false);
  if (!fs::exists(blocks_path(channel_id)))
    raise(ErrorCode::NotFound, "no channel named " + channel_id);
  std::vector<Bytes> records = ledger::BlockStore(blocks_path(channel_id)).read_all_records();
  if (block_number >= records.size())
    raise(ErrorCode::NotFound, "no block " + std::to_string(block_number));
  return records[block_number];
}

std::string Client::registry_export(const std::string& channel_id) const {
  DirLock lock(data_dir_ + "/.lock", false);
  Runtime rt = load_runtime(channel_id);
  state::MapStateView view(rt.rt.world());
  return identity::Registry::from_state(view).export_canonical();
}

std::vector<std::string> Client::list_channels() const {
  std::vector<std::string> out;
  if (!fs::exists(data_dir_ + "/channels")) return out;
  for (const auto& e : fs::directory_iterator(data_dir_ + "/channels")) {
    if (e.is_directory()) out.push_back(e.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace medusa::client
