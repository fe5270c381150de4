#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "medusa/chaincode.hpp"
#include "medusa/channel.hpp"
#include "medusa/envelope.hpp"
#include "medusa/ledger.hpp"

namespace medusa::txflow {

// One endorsing peer's execution context: identity plus its committed view.
struct Endorser {
  std::string peer_id;
  const identity::KeyPair* key = nullptr;
  const state::StateView* view = nullptr;
  bool online = true;
  uint64_t* exec_counter = nullptr;  // optional per-peer chaincode execution count
};

struct EndorseResult {
  ErrorCode error = ErrorCode::None;       // None on success
  ErrorCode chaincode_error = ErrorCode::None;  // set when error == ChaincodeError
  std::string detail;
  std::optional<tx::Envelope> envelope;
  Bytes response;  // query responses (endorsed reads are not ordered)

  bool ok() const { return error == ErrorCode::None; }
};

// Execute-and-endorse: every online endorser runs the function against its
// own committed view; the envelope carries the k-or-more byte-identical
// read/write sets. Largest agreeing success group wins; otherwise a
// unanimous-enough chaincode failure propagates; otherwise PolicyUnsatisfied.
EndorseResult endorse(const tx::SignedProposal& sp, std::span<const Endorser> endorsers,
                      const channel::ChannelConfig& cfg);

// Resolves the public key a proposal's client signature must verify under.
// Registration proposals are self-signed by the key inside the new record.
std::optional<identity::PublicKey> resolve_submitter_key(const tx::SignedProposal& sp,
                                                         const state::StateView& view,
                                                         const channel::ChannelConfig& cfg);

// ---------------------------------------------------------------------------
// Ordering service: single node, FIFO, cuts a block at max_block_txs or
// max_wait, whichever first. Malformed submissions are dropped and logged.
// ---------------------------------------------------------------------------
class OrderingService {
 public:
  explicit OrderingService(channel::ChannelConfig cfg) : cfg_(std::move(cfg)) {}

  struct DropRecord {
    std::string reason;
    std::string detail;
  };

  // Accepts a structurally sound envelope into the pending batch; malformed
  // ones are dropped with a logged reason and submit returns false.
  bool submit(tx::Envelope env, uint64_t now_ms);

  // True when a timer scheduled for `epoch` should still fire.
  uint64_t current_epoch() const { return epoch_; }
  bool timer_armed() const { return !pending_.empty(); }
  uint64_t timer_deadline() const { return batch_started_ms_ + cfg_.max_wait_ms; }

  std::optional<std::vector<tx::Envelope>> take_batch_if_full();
  std::optional<std::vector<tx::Envelope>> take_batch_on_timer(uint64_t epoch);
  std::optional<std::vector<tx::Envelope>> force_cut();

  size_t pending_count() const { return pending_.size(); }
  const std::vector<DropRecord>& drop_log() const { return drop_log_; }
  uint64_t accepted_count() const { return accepted_; }

 private:
  std::vector<tx::Envelope> take_all();

  channel::ChannelConfig cfg_;
  std::vector<tx::Envelope> pending_;
  std::vector<DropRecord> drop_log_;
  uint64_t batch_started_ms_ = 0;
  uint64_t epoch_ = 0;
  uint64_t accepted_ = 0;
};

// Builds an unvalidated block from an ordered batch: header, data hash and
// orderer signature; validity flags are left empty for validate().
ledger::Block build_block(uint64_t block_number, const Digest32& previous_hash,
                          uint64_t timestamp_ms, std::vector<tx::Envelope> txs,
                          const identity::KeyPair& orderer_key);

// Validation of an ordered block against committed state (EOV pipeline):
// per transaction, in order: signature checks, endorsement policy, then the
// MVCC read-set check where earlier VALID transactions in the same block are
// already visible. Returns one flag per transaction.
std::vector<ledger::TxValidity> validate(const ledger::Block& block,
                                         const state::StateView& committed,
                                         const channel::ChannelConfig& cfg);

// Order-execute pipeline: every transaction is executed sequentially against
// the evolving state; flags reflect execution outcomes. `exec_counter`, when
// given, is incremented once per executed transaction. Order-execute
// envelopes carry no write sets, so the writes computed at execution are
// returned through `executed_writes` (one list per transaction, empty unless
// VALID); committing state must apply those via apply_executed.
std::vector<ledger::TxValidity> validate_order_execute(
    const ledger::Block& block, const state::StateView& committed,
    const channel::ChannelConfig& cfg, uint64_t* exec_counter = nullptr,
    std::vector<std::vector<tx::WriteEntry>>* executed_writes = nullptr);

// Applies execution-time writes for the transactions flagged VALID; the
// order-execute counterpart of ledger::apply_block.
void apply_executed(state::WorldState& world, const ledger::Block& block,
                    const std::vector<ledger::TxValidity>& flags,
                    const std::vector<std::vector<tx::WriteEntry>>& executed_writes);

// Replay hook for ledger::verify_records / replay_world_state: recomputes
// flags and advances world state per the pipeline recorded in the chain's
// own genesis configuration.
ledger::ReplayFn make_replayer();

// ---------------------------------------------------------------------------
// ChannelRuntime: one channel's chain of record, world state and orderer.
// Single writer through commit; readers see only committed blocks.
// ---------------------------------------------------------------------------
class ChannelRuntime {
 public:
  // Creates the genesis block carrying the channel configuration transaction.
  static ChannelRuntime create(channel::ChannelConfig cfg, const identity::KeyPair& orderer_key,
                               uint64_t genesis_timestamp_ms);

  // Rebuilds a runtime from persisted records (verifies first).
  static ChannelRuntime load(const std::vector<Bytes>& records, identity::KeyPair orderer_key);

  const channel::ChannelConfig& config() const { return cfg_; }
  const ledger::Chain& chain() const { return chain_; }
  const state::WorldState& world() const { return world_; }
  const identity::KeyPair& orderer_key() const { return orderer_key_; }
  OrderingService& ordering() { return ordering_; }
  const OrderingService& ordering() const { return ordering_; }

  // Validates (per the channel's pipeline), commits atomically and returns
  // the committed block. `exec_counter` feeds order-execute execution counts.
  const ledger::Block& commit_batch(std::vector<tx::Envelope> batch, uint64_t timestamp_ms,
                                    uint64_t* exec_counter = nullptr);

  ledger::VerificationReport verify() const;

  // Incrementally maintained state must always equal a fresh replay.
  state::WorldState replay() const;

 private:
  ChannelRuntime(channel::ChannelConfig cfg, identity::KeyPair orderer_key)
      : cfg_(std::move(cfg)), orderer_key_(orderer_key), ordering_(cfg_) {}

  channel::ChannelConfig cfg_;
  identity::KeyPair orderer_key_;
  ledger::Chain chain_;
  state::WorldState world_;
  OrderingService ordering_;
};

// Genesis configuration envelope (block 0, index 0), signed by the orderer.
tx::Envelope make_genesis_envelope(const channel::ChannelConfig& cfg,
                                   const identity::KeyPair& orderer_key);

// Client-side proposal builders. The nonce comes from `rng` when given
// (deterministic simulation) or from OS randomness.
tx::SignedProposal make_data_append_proposal(const identity::Credential& cred,
                                             const std::string& channel_id,
                                             const chaincode::WebLogData& weblog,
                                             Rng* rng = nullptr);
tx::SignedProposal make_query_proposal(const identity::Credential& cred,
                                       const std::string& channel_id,
                                       const chaincode::QuerySpec& query, Rng* rng = nullptr);
tx::SignedProposal make_registration_proposal(const identity::Credential& cred,
                                              const std::string& channel_id,
                                              const identity::ParticipantRecord& record,
                                              Rng* rng = nullptr);

}  // namespace medusa::txflow
