#include "medusa/ledger.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cstring>
#include <fstream>

#include "medusa/canonical.hpp"
#include "medusa/channel.hpp"
#include "medusa/sha256.hpp"

namespace medusa::ledger {

std::string_view validity_name(TxValidity v) {
  switch (v) {
    case TxValidity::VALID: return "VALID";
    case TxValidity::POLICY_FAIL: return "POLICY_FAIL";
    case TxValidity::MVCC_CONFLICT: return "MVCC_CONFLICT";
    case TxValidity::BAD_SIGNATURE: return "BAD_SIGNATURE";
    case TxValidity::EXEC_FAIL: return "EXEC_FAIL";
  }
  return "VALID";
}

TxValidity validity_from_name(std::string_view name) {
  if (name == "VALID") return TxValidity::VALID;
  if (name == "POLICY_FAIL") return TxValidity::POLICY_FAIL;
  if (name == "MVCC_CONFLICT") return TxValidity::MVCC_CONFLICT;
  if (name == "BAD_SIGNATURE") return TxValidity::BAD_SIGNATURE;
  if (name == "EXEC_FAIL") return TxValidity::EXEC_FAIL;
  raise(ErrorCode::DecodeError, "unknown validity flag: " + std::string(name));
}

std::string_view failure_kind_name(FailureKind k) {
  switch (k) {
    case FailureKind::BROKEN_LINK: return "BROKEN_LINK";
    case FailureKind::DATA_HASH_MISMATCH: return "DATA_HASH_MISMATCH";
    case FailureKind::BAD_SIGNATURE: return "BAD_SIGNATURE";
    case FailureKind::NONSEQUENTIAL_NUMBER: return "NONSEQUENTIAL_NUMBER";
  }
  return "DATA_HASH_MISMATCH";
}

Bytes encode_block_header(const BlockHeader& h) {
  cjson o = cjson::object();
  o["block_number"] = h.block_number;
  o["previous_hash"] = to_hex(h.previous_hash);
  o["data_hash"] = to_hex(h.data_hash);
  o["timestamp"] = h.timestamp_ms;
  return dump_canonical(o);
}

static BlockHeader header_from_json(const cjson& o) {
  check_exact_keys(o, {"block_number", "previous_hash", "data_hash", "timestamp"});
  BlockHeader h;
  h.block_number = need_u64(o, "block_number");
  h.previous_hash = array_from_hex<32>(need_string(o, "previous_hash"));
  h.data_hash = array_from_hex<32>(need_string(o, "data_hash"));
  h.timestamp_ms = need_u64(o, "timestamp");
  return h;
}

Digest32 compute_block_hash(const BlockHeader& h) { return sha256(encode_block_header(h)); }

Digest32 compute_data_hash(const std::vector<tx::Envelope>& txs) {
  std::string joined = "[";
  for (size_t i = 0; i < txs.size(); ++i) {
    if (i) joined.push_back(',');
    joined += tx::encode_envelope(txs[i]);
  }
  joined.push_back(']');
  return sha256(joined);
}

Bytes encode_block(const Block& b) {
  // assembled textually so the transaction-list bytes hashed by
  // compute_data_hash appear verbatim inside the block record
  Bytes out = "{\"header\":";
  out += encode_block_header(b.header);
  out += ",\"header_signature\":\"";
  out += to_hex(b.header_signature);
  out += "\",\"transactions\":[";
  for (size_t i = 0; i < b.transactions.size(); ++i) {
    if (i) out.push_back(',');
    out += tx::encode_envelope(b.transactions[i]);
  }
  out += "],\"validity_flags\":[";
  for (size_t i = 0; i < b.validity_flags.size(); ++i) {
    if (i) out.push_back(',');
    out.push_back('"');
    out += validity_name(b.validity_flags[i]);
    out.push_back('"');
  }
  out += "]}";
  return out;
}

Block decode_block(std::string_view bytes) {
  cjson o = parse_canonical(bytes);
  check_exact_keys(o, {"header", "header_signature", "transactions", "validity_flags"});
  Block b;
  b.header = header_from_json(need_object(o, "header"));
  b.header_signature = array_from_hex<64>(need_string(o, "header_signature"));
  for (const cjson& t : need_array(o, "transactions")) {
    b.transactions.push_back(tx::decode_envelope(dump_canonical(t)));
  }
  for (const cjson& f : need_array(o, "validity_flags")) {
    if (!f.is_string()) raise(ErrorCode::DecodeError, "validity flag must be a string");
    b.validity_flags.push_back(validity_from_name(f.get<std::string>()));
  }
  if (b.validity_flags.size() != b.transactions.size())
    raise(ErrorCode::DecodeError, "validity_flags length must equal transactions length");
  return b;
}

// ---------------------------------------------------------------------------
// Chain
// ---------------------------------------------------------------------------

void Chain::append_block(Block block) {
  const uint64_t expected = blocks_.size();
  if (block.header.block_number != expected)
    raise(ErrorCode::NonSequentialNumber,
          "expected block " + std::to_string(expected) + ", got " +
              std::to_string(block.header.block_number));
  const Digest32 want_prev = tip_hash();
  if (block.header.previous_hash != want_prev)
    raise(ErrorCode::ChainLinkMismatch, "previous_hash does not match the chain tip");
  if (block.header.data_hash != compute_data_hash(block.transactions))
    raise(ErrorCode::DataHashMismatch, "data_hash does not match the transaction list");
  if (block.validity_flags.size() != block.transactions.size())
    raise(ErrorCode::DataHashMismatch, "validity_flags length must equal transactions length");
  records_.push_back(encode_block(block));
  blocks_.push_back(std::move(block));
}

Chain Chain::from_records(const std::vector<Bytes>& records) {
  Chain c;
  for (const auto& r : records) {
    c.blocks_.push_back(decode_block(r));
    c.records_.push_back(r);
  }
  return c;
}

Digest32 Chain::tip_hash() const {
  if (blocks_.empty()) return kZeroDigest;
  return compute_block_hash(blocks_.back().header);
}

const Block& get_block(const Chain& chain, uint64_t block_number) {
  if (block_number >= chain.height())
    raise(ErrorCode::NotFound, "no block " + std::to_string(block_number));
  return chain.block(block_number);
}

TxLocation get_transaction(const Chain& chain, const Digest32& tx_id) {
  for (const auto& b : chain.blocks()) {
    for (size_t i = 0; i < b.transactions.size(); ++i) {
      if (b.transactions[i].tx_id == tx_id) return TxLocation{&b, i, &b.transactions[i]};
    }
  }
  raise(ErrorCode::NotFound, "no transaction " + to_hex(tx_id));
}

// ---------------------------------------------------------------------------
// BlockStore
// ---------------------------------------------------------------------------

static constexpr size_t kMaxRecordLen = 64u << 20;

Bytes BlockStore::frame(std::string_view record) {
  if (record.size() > kMaxRecordLen) raise(ErrorCode::IoError, "block record too large");
  Bytes out;
  uint32_t len = static_cast<uint32_t>(record.size());
  out.push_back(static_cast<char>((len >> 24) & 0xff));
  out.push_back(static_cast<char>((len >> 16) & 0xff));
  out.push_back(static_cast<char>((len >> 8) & 0xff));
  out.push_back(static_cast<char>(len & 0xff));
  out += record;
  return out;
}

void BlockStore::append_record(std::string_view record) const {
  Bytes framed = frame(record);
  int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) raise(ErrorCode::IoError, "cannot open block file " + path_);
  size_t off = 0;
  while (off < framed.size()) {
    ssize_t n = ::write(fd, framed.data() + off, framed.size() - off);
    if (n <= 0) {
      ::close(fd);
      raise(ErrorCode::IoError, "short write to block file " + path_);
    }
    off += static_cast<size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
}

bool BlockStore::exists() const { return ::access(path_.c_str(), F_OK) == 0; }

std::vector<Bytes> BlockStore::parse_framed(std::string_view file_bytes) {
  std::vector<Bytes> records;
  size_t pos = 0;
  while (pos < file_bytes.size()) {
    if (file_bytes.size() - pos < 4)
      raise(ErrorCode::DecodeError, "damaged record framing (truncated length prefix)");
    uint32_t len = (static_cast<uint32_t>(static_cast<uint8_t>(file_bytes[pos])) << 24) |
                   (static_cast<uint32_t>(static_cast<uint8_t>(file_bytes[pos + 1])) << 16) |
                   (static_cast<uint32_t>(static_cast<uint8_t>(file_bytes[pos + 2])) << 8) |
                   static_cast<uint32_t>(static_cast<uint8_t>(file_bytes[pos + 3]));
    pos += 4;
    if (len > kMaxRecordLen || len > file_bytes.size() - pos)
      raise(ErrorCode::DecodeError, "damaged record framing (length out of bounds)");
    records.emplace_back(file_bytes.substr(pos, len));
    pos += len;
  }
  return records;
}

std::vector<Bytes> BlockStore::read_all_records() const {
  std::ifstream in(path_, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot read block file " + path_);
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_framed(all);
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

Bytes VerificationReport::encode() const {
  cjson o = cjson::object();
  o["ok"] = ok;
  if (!ok) {
    o["first_bad_block"] = *first_bad_block;
    o["failure_kind"] = std::string(failure_kind_name(*failure_kind));
    o["detail"] = detail;
  }
  return dump_canonical(o);
}

static VerificationReport fail(uint64_t block, FailureKind kind, std::string detail) {
  VerificationReport r;
  r.ok = false;
  r.first_bad_block = block;
  r.failure_kind = kind;
  r.detail = std::move(detail);
  return r;
}

namespace {

// Lenient framing read used by verification: whole records up to the first
// framing damage, which is reported as a failure at the next record index.
struct FramedFile {
  std::vector<Bytes> records;
  bool damaged = false;
  std::string detail;
};

FramedFile read_framed_lenient(std::string_view file_bytes) {
  FramedFile out;
  size_t pos = 0;
  while (pos < file_bytes.size()) {
    if (file_bytes.size() - pos < 4) {
      out.damaged = true;
      out.detail = "truncated length prefix";
      return out;
    }
    uint32_t len = (static_cast<uint32_t>(static_cast<uint8_t>(file_bytes[pos])) << 24) |
                   (static_cast<uint32_t>(static_cast<uint8_t>(file_bytes[pos + 1])) << 16) |
                   (static_cast<uint32_t>(static_cast<uint8_t>(file_bytes[pos + 2])) << 8) |
                   static_cast<uint32_t>(static_cast<uint8_t>(file_bytes[pos + 3]));
    pos += 4;
    if (len > kMaxRecordLen || len > file_bytes.size() - pos) {
      out.damaged = true;
      out.detail = "record length out of bounds";
      return out;
    }
    out.records.emplace_back(file_bytes.substr(pos, len));
    pos += len;
  }
  return out;
}

}  // namespace

static VerificationReport verify_impl(const std::vector<Bytes>& records,
                                      const ReplayFn& replay, bool damaged_tail,
                                      const std::string& damage_detail) {
  // All three check families run block by block so the report always names
  // the earliest block whose bytes are wrong, never a downstream symptom:
  //   A. structure: strict decode, canonical re-encode equality, sequence
  //      number, previous-hash link, data hash;
  //   B. orderer header signature (key from the genesis configuration);
  //   C. semantic re-validation: flags recomputed via `replay`, which also
  //      advances the running world state.
  Digest32 prev = kZeroDigest;
  channel::ChannelConfig cfg;
  state::WorldState st;
  for (size_t i = 0; i < records.size(); ++i) {
    Block b;
    try {
      b = decode_block(records[i]);
    } catch (const Error& e) {
      return fail(i, FailureKind::DATA_HASH_MISMATCH, std::string("undecodable record: ") + e.what());
    }
    if (encode_block(b) != records[i])
      return fail(i, FailureKind::DATA_HASH_MISMATCH, "record bytes are not canonical");
    if (b.header.block_number != i)
      return fail(i, FailureKind::NONSEQUENTIAL_NUMBER,
                  "expected block number " + std::to_string(i));
    if (b.header.previous_hash != prev)
      return fail(i, FailureKind::BROKEN_LINK, "previous_hash does not match predecessor");
    if (b.header.data_hash != compute_data_hash(b.transactions))
      return fail(i, FailureKind::DATA_HASH_MISMATCH, "data_hash does not match transactions");
    prev = compute_block_hash(b.header);

    if (i == 0) {
      try {
        if (b.transactions.empty() ||
            b.transactions[0].signed_proposal.proposal.function != tx::kFnConfigChannel ||
            b.transactions[0].signed_proposal.proposal.args.empty())
          raise(ErrorCode::DecodeError, "genesis block carries no channel configuration");
        cfg = channel::decode_channel_config(b.transactions[0].signed_proposal.proposal.args[0]);
      } catch (const Error& e) {
        return fail(0, FailureKind::DATA_HASH_MISMATCH,
                    std::string("bad genesis configuration: ") + e.what());
      }
    }
    if (!identity::verify_detached(cfg.orderer_public_key, b.header_signature,
                                   encode_block_header(b.header)))
      return fail(i, FailureKind::BAD_SIGNATURE, "orderer header signature does not verify");

    if (replay) {
      std::vector<TxValidity> want;
      try {
        want = replay(b, st);
      } catch (const Error& e) {
        return fail(i, FailureKind::DATA_HASH_MISMATCH, std::string("revalidation failed: ") + e.what());
      }
      if (want != b.validity_flags) {
        size_t at = 0;
        while (at < want.size() && want[at] == b.validity_flags[at]) ++at;
        FailureKind kind = (at < want.size() && want[at] == TxValidity::BAD_SIGNATURE)
                               ? FailureKind::BAD_SIGNATURE
                               : FailureKind::DATA_HASH_MISMATCH;
        return fail(i, kind,
                    "stored validity flags disagree with revalidation at tx " + std::to_string(at));
      }
    }
  }

  // Framing damage after the last whole record surfaces once everything
  // before it is clean, at the index the damaged record would have had.
  if (damaged_tail)
    return fail(records.size(), FailureKind::DATA_HASH_MISMATCH,
                "damaged record framing: " + damage_detail);

  return VerificationReport{};
}

VerificationReport verify_records(const std::vector<Bytes>& records, const ReplayFn& replay) {
  return verify_impl(records, replay, false, "");
}

VerificationReport verify_chain(const Chain& chain, const ReplayFn& replay) {
  return verify_impl(chain.records(), replay, false, "");
}

VerificationReport verify_file_bytes(std::string_view file_bytes, const ReplayFn& replay) {
  FramedFile f = read_framed_lenient(file_bytes);
  return verify_impl(f.records, replay, f.damaged, f.detail);
}

void apply_block(state::WorldState& state, const Block& block) {
  for (size_t i = 0; i < block.transactions.size(); ++i) {
    if (block.validity_flags[i] != TxValidity::VALID) continue;
    for (const auto& w : block.transactions[i].write_set) {
      state[w.key] = state::Entry{
          w.value, state::Version{block.header.block_number, static_cast<uint32_t>(i)}};
    }
  }
}

state::WorldState replay_unchecked(const std::vector<Block>& blocks) {
  state::WorldState st;
  for (const auto& b : blocks) apply_block(st, b);
  return st;
}

state::WorldState replay_world_state(const std::vector<Bytes>& records, const ReplayFn& replay) {
  VerificationReport report = verify_records(records, replay);
  if (!report.ok)
    raise(ErrorCode::ChainNotVerified,
          "chain fails verification at block " + std::to_string(*report.first_bad_block) + " (" +
              std::string(failure_kind_name(*report.failure_kind)) + ")");
  state::WorldState st;
  for (const auto& r : records) replay(decode_block(r), st);
  return st;
}

Digest32 chain_digest(const std::vector<Bytes>& records) {
  Sha256 h;
  for (const auto& r : records) {
    Digest32 d = sha256(r);
    h.update(d.data(), d.size());
  }
  return h.finish();
}

}  // namespace medusa::ledger
