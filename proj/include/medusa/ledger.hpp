#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "medusa/bytes.hpp"
#include "medusa/envelope.hpp"
#include "medusa/state.hpp"

namespace medusa::ledger {

enum class TxValidity {
  VALID,
  POLICY_FAIL,
  MVCC_CONFLICT,
  BAD_SIGNATURE,
  EXEC_FAIL,  // order-execute pipeline: chaincode failed at execution
};

std::string_view validity_name(TxValidity v);
TxValidity validity_from_name(std::string_view name);

struct BlockHeader {
  uint64_t block_number = 0;
  Digest32 previous_hash{};  // all-zero for genesis
  Digest32 data_hash{};      // SHA-256 over the canonical transaction list
  uint64_t timestamp_ms = 0; // assigned by the ordering service

  friend bool operator==(const BlockHeader&, const BlockHeader&) = default;
};

struct Block {
  BlockHeader header;
  Sig64 header_signature{};  // orderer signature over the canonical header bytes
  std::vector<tx::Envelope> transactions;
  std::vector<TxValidity> validity_flags;  // parallel to transactions

  friend bool operator==(const Block&, const Block&) = default;
};

// Canonical key order: block_number, previous_hash, data_hash, timestamp.
Bytes encode_block_header(const BlockHeader& h);

// SHA-256 over the canonical header bytes. Deterministic and total.
Digest32 compute_block_hash(const BlockHeader& h);

// SHA-256 over the canonical encoding of the transaction list (a JSON array
// of canonical envelopes).
Digest32 compute_data_hash(const std::vector<tx::Envelope>& txs);

// Canonical key order: header, header_signature, transactions, validity_flags.
Bytes encode_block(const Block& b);
Block decode_block(std::string_view bytes);

// ---------------------------------------------------------------------------
// Chain: in-memory sequence of blocks plus their canonical record bytes.
// Records are the authority; blocks are the decoded mirror.
// ---------------------------------------------------------------------------
class Chain {
 public:
  // Validates link, sequence number and data hash, then appends. Throws
  // ChainLinkMismatch / NonSequentialNumber / DataHashMismatch.
  void append_block(Block block);

  // Decode-only bulk load (no verification beyond strict decoding).
  static Chain from_records(const std::vector<Bytes>& records);

  size_t height() const { return blocks_.size(); }
  const Block& block(size_t i) const { return blocks_[i]; }
  const std::vector<Block>& blocks() const { return blocks_; }
  const std::vector<Bytes>& records() const { return records_; }

  // Hash of the tip header, or the zero digest for an empty chain.
  Digest32 tip_hash() const;

 private:
  std::vector<Block> blocks_;
  std::vector<Bytes> records_;
};

// Exact retrieval. Throw NotFound.
const Block& get_block(const Chain& chain, uint64_t block_number);
struct TxLocation {
  const Block* block;
  size_t index;
  const tx::Envelope* envelope;
};
TxLocation get_transaction(const Chain& chain, const Digest32& tx_id);

// ---------------------------------------------------------------------------
// Block file: append-only file of records, each record being a 4-byte
// big-endian length prefix followed by the canonical block bytes.
// ---------------------------------------------------------------------------
class BlockStore {
 public:
  explicit BlockStore(std::string path) : path_(std::move(path)) {}

  void append_record(std::string_view record) const;
  std::vector<Bytes> read_all_records() const;  // throws IoError / DecodeError on framing damage
  bool exists() const;
  const std::string& path() const { return path_; }

  static std::vector<Bytes> parse_framed(std::string_view file_bytes);
  static Bytes frame(std::string_view record);

 private:
  std::string path_;
};

// ---------------------------------------------------------------------------
// Verification and replay.
// ---------------------------------------------------------------------------
enum class FailureKind {
  BROKEN_LINK,
  DATA_HASH_MISMATCH,
  BAD_SIGNATURE,
  NONSEQUENTIAL_NUMBER,
};

std::string_view failure_kind_name(FailureKind k);

struct VerificationReport {
  bool ok = true;
  std::optional<uint64_t> first_bad_block;
  std::optional<FailureKind> failure_kind;
  std::string detail;

  Bytes encode() const;
};

// Recomputes the validity flags of a block against the running world state
// and advances that state by the block's valid transactions. Supplied by the
// transaction-flow layer (flag semantics and write effects depend on policy,
// signatures and execution context that live above this module).
using ReplayFn =
    std::function<std::vector<TxValidity>(const Block& block, state::WorldState& world)>;

// Full chain verification over raw records. Three check families run block
// by block, earliest failing block wins:
//   A. structure: strict decode, canonical re-encode equality, sequence
//      number, previous-hash link, data hash;
//   B. orderer header signature (key taken from the genesis configuration);
//   C. semantic re-validation: flags recomputed via `replay` and compared
//      with the stored flags, walking world state forward.
// Any byte edit inside block b's record is therefore reported at b itself:
// a header edit trips b's own signature check before b+1's link check runs.
VerificationReport verify_records(const std::vector<Bytes>& records, const ReplayFn& replay);

// Convenience over in-memory blocks (encodes and delegates).
VerificationReport verify_chain(const Chain& chain, const ReplayFn& replay);

// Verification straight off the framed file bytes. Framing damage is reported
// as a failure at the first record index the damage falls in; whole records
// before it still get the full three passes.
VerificationReport verify_file_bytes(std::string_view file_bytes, const ReplayFn& replay);

// World state from scratch via `replay`, in block order. Requires a verified
// chain: throws ChainNotVerified if verification fails.
state::WorldState replay_world_state(const std::vector<Bytes>& records, const ReplayFn& replay);

// State from stored envelope write sets alone, no verification gate. Only
// correct for chains whose envelopes carry their writes (the endorsement
// pipeline); order-execute effects exist only at execution time.
state::WorldState replay_unchecked(const std::vector<Block>& blocks);

// Applies one validated block's envelope write sets to a world state in place.
void apply_block(state::WorldState& state, const Block& block);

// Digest over the chain bytes: SHA-256 of the concatenated record digests.
Digest32 chain_digest(const std::vector<Bytes>& records);

}  // namespace medusa::ledger
