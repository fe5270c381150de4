#include "medusa/txflow.hpp"

#include <algorithm>
#include <set>

#include "medusa/canonical.hpp"
#include "medusa/sha256.hpp"

namespace medusa::txflow {

std::optional<identity::PublicKey> resolve_submitter_key(const tx::SignedProposal& sp,
                                                         const state::StateView& view,
                                                         const channel::ChannelConfig& cfg) {
  const tx::Proposal& p = sp.proposal;
  if (p.function == tx::kFnConfigChannel) return cfg.orderer_public_key;
  if (p.function == tx::kFnRegisterDataSource) {
    // self-signed: the key lives inside the record being registered
    if (p.args.size() != 1) return std::nullopt;
    try {
      identity::ParticipantRecord rec = identity::decode_participant_record(p.args[0]);
      if (rec.ds.datasource_id != p.submitter) return std::nullopt;
      return rec.public_key;
    } catch (const Error&) {
      return std::nullopt;
    }
  }
  auto entry = view.get(identity::participant_key(p.submitter));
  if (!entry) return std::nullopt;
  try {
    return identity::decode_participant_record(entry->value).public_key;
  } catch (const Error&) {
    return std::nullopt;
  }
}

namespace {

std::string outcome_fingerprint(const chaincode::ExecOutcome& o) {
  cjson j = cjson::object();
  j["error"] = static_cast<int>(o.error);
  j["detail"] = o.error_detail;
  j["read_set"] = tx::encode_read_set(o.read_set);
  j["write_set"] = tx::encode_write_set(o.write_set);
  j["response"] = o.response;
  return dump_canonical(j);
}

}  // namespace

EndorseResult endorse(const tx::SignedProposal& sp, std::span<const Endorser> endorsers,
                      const channel::ChannelConfig& cfg) {
  EndorseResult result;
  const tx::Proposal& p = sp.proposal;
  if (p.channel_id != cfg.channel_id) {
    result.error = ErrorCode::NotChannelMember;
    result.detail = "proposal addressed to channel " + p.channel_id;
    return result;
  }

  struct Group {
    chaincode::ExecOutcome outcome;
    std::vector<size_t> members;
  };
  std::map<std::string, Group> groups;
  size_t online = 0;
  for (size_t i = 0; i < endorsers.size(); ++i) {
    const Endorser& e = endorsers[i];
    if (!e.online) continue;
    ++online;
    chaincode::ExecOutcome out;
    auto key = resolve_submitter_key(sp, *e.view, cfg);
    if (!key ||
        !identity::verify_detached(*key, sp.client_signature, tx::encode_proposal(p))) {
      out.error = ErrorCode::BadClientSignature;
      out.error_detail = "client signature does not verify";
    } else {
      out = chaincode::execute_any(*e.view, chaincode::ExecContext{p.submitter}, p.function,
                                   p.args);
      if (e.exec_counter) ++*e.exec_counter;
    }
    auto [it, fresh] = groups.try_emplace(outcome_fingerprint(out));
    if (fresh) it->second.outcome = std::move(out);
    it->second.members.push_back(i);
  }

  if (online < cfg.policy_k) {
    result.error = ErrorCode::PolicyUnsatisfied;
    result.detail = "only " + std::to_string(online) + " endorsers online, policy needs " +
                    std::to_string(cfg.policy_k);
    return result;
  }

  // largest agreeing group wins; success beats failure, then fingerprint
  // order keeps ties deterministic
  const Group* best = nullptr;
  for (const auto& [fp, g] : groups) {
    if (!best) {
      best = &g;
      continue;
    }
    bool g_ok = g.outcome.ok(), b_ok = best->outcome.ok();
    if (g_ok != b_ok ? g_ok : g.members.size() > best->members.size()) best = &g;
  }

  if (!best || best->members.size() < cfg.policy_k) {
    result.error = ErrorCode::PolicyUnsatisfied;
    result.detail = "no " + std::to_string(cfg.policy_k) + " byte-identical endorsements";
    return result;
  }

  const chaincode::ExecOutcome& out = best->outcome;
  if (!out.ok()) {
    if (out.error == ErrorCode::BadClientSignature) {
      result.error = ErrorCode::BadClientSignature;
    } else {
      result.error = ErrorCode::ChaincodeError;
      result.chaincode_error = out.error;
    }
    result.detail = out.error_detail;
    return result;
  }

  tx::Envelope env;
  env.tx_id = tx::compute_tx_id(p);
  env.signed_proposal = sp;
  env.read_set = out.read_set;
  env.write_set = out.write_set;
  Bytes msg = tx::endorsement_message(env.tx_id, env.read_set, env.write_set);
  for (size_t i : best->members) {
    const Endorser& e = endorsers[i];
    env.endorsements.push_back(tx::Endorsement{e.peer_id, identity::sign_detached(*e.key, msg)});
  }
  result.envelope = std::move(env);
  result.response = out.response;
  return result;
}

// ---------------------------------------------------------------------------
// OrderingService
// ---------------------------------------------------------------------------

bool OrderingService::submit(tx::Envelope env, uint64_t now_ms) {
  const tx::Proposal& p = env.signed_proposal.proposal;
  auto drop = [&](std::string reason, std::string detail) {
    drop_log_.push_back(DropRecord{std::move(reason), std::move(detail)});
    return false;
  };
  if (p.channel_id != cfg_.channel_id)
    return drop("wrong_channel", "envelope addressed to channel " + p.channel_id);
  if (env.tx_id != tx::compute_tx_id(p))
    return drop("tx_id_mismatch", "tx_id does not hash the proposal");
  if (p.function == tx::kFnConfigChannel)
    return drop("config_rejected", "channel configuration is genesis-only");
  if (cfg_.pipeline == channel::Pipeline::EOV) {
    if (env.endorsements.empty()) return drop("no_endorsements", "envelope carries no endorsements");
    std::set<std::string> seen;
    for (const auto& e : env.endorsements) {
      if (!seen.insert(e.endorser).second)
        return drop("duplicate_endorser", "endorser " + e.endorser + " appears twice");
    }
  }
  if (pending_.empty()) batch_started_ms_ = now_ms;
  pending_.push_back(std::move(env));
  ++accepted_;
  return true;
}

std::vector<tx::Envelope> OrderingService::take_all() {
  ++epoch_;
  size_t n = std::min<size_t>(pending_.size(), cfg_.max_block_txs);
  std::vector<tx::Envelope> batch(std::make_move_iterator(pending_.begin()),
                                  std::make_move_iterator(pending_.begin() + n));
  pending_.erase(pending_.begin(), pending_.begin() + n);
  return batch;
}

std::optional<std::vector<tx::Envelope>> OrderingService::take_batch_if_full() {
  if (pending_.size() < cfg_.max_block_txs) return std::nullopt;
  return take_all();
}

std::optional<std::vector<tx::Envelope>> OrderingService::take_batch_on_timer(uint64_t epoch) {
  if (epoch != epoch_ || pending_.empty()) return std::nullopt;
  return take_all();
}

std::optional<std::vector<tx::Envelope>> OrderingService::force_cut() {
  if (pending_.empty()) return std::nullopt;
  return take_all();
}

// ---------------------------------------------------------------------------
// Block building and validation
// ---------------------------------------------------------------------------

ledger::Block build_block(uint64_t block_number, const Digest32& previous_hash,
                          uint64_t timestamp_ms, std::vector<tx::Envelope> txs,
                          const identity::KeyPair& orderer_key) {
  ledger::Block b;
  b.header.block_number = block_number;
  b.header.previous_hash = previous_hash;
  b.header.data_hash = ledger::compute_data_hash(txs);
  b.header.timestamp_ms = timestamp_ms;
  b.header_signature = identity::sign_detached(orderer_key, ledger::encode_block_header(b.header));
  b.transactions = std::move(txs);
  return b;
}

namespace {

// Genesis carries exactly one self-anchored configuration transaction.
ledger::TxValidity validate_genesis_tx(const tx::Envelope& env) {
  const tx::Proposal& p = env.signed_proposal.proposal;
  if (p.function != tx::kFnConfigChannel || p.args.size() != 1 || !env.endorsements.empty())
    return ledger::TxValidity::POLICY_FAIL;
  channel::ChannelConfig cfg;
  try {
    cfg = channel::decode_channel_config(p.args[0]);
  } catch (const Error&) {
    return ledger::TxValidity::POLICY_FAIL;
  }
  if (channel::encode_channel_config(cfg) != p.args[0] || p.channel_id != cfg.channel_id)
    return ledger::TxValidity::POLICY_FAIL;
  if (env.tx_id != tx::compute_tx_id(p) ||
      !identity::verify_detached(cfg.orderer_public_key, env.signed_proposal.client_signature,
                                 tx::encode_proposal(p)))
    return ledger::TxValidity::BAD_SIGNATURE;
  const std::string key = channel::channel_config_key();
  if (env.read_set != std::vector<tx::ReadEntry>{{key, std::nullopt}} ||
      env.write_set != std::vector<tx::WriteEntry>{{key, p.args[0]}})
    return ledger::TxValidity::POLICY_FAIL;
  return ledger::TxValidity::VALID;
}

bool endorsement_policy_holds(const tx::Envelope& env, const channel::ChannelConfig& cfg) {
  Bytes msg = tx::endorsement_message(env.tx_id, env.read_set, env.write_set);
  std::set<std::string> distinct;
  for (const auto& e : env.endorsements) {
    const channel::PeerInfo* peer = cfg.find_peer(e.endorser);
    if (!peer || !peer->endorser) continue;
    if (!identity::verify_detached(peer->public_key, e.signature, msg)) continue;
    distinct.insert(e.endorser);
  }
  return distinct.size() >= cfg.policy_k;
}

bool mvcc_holds(const tx::Envelope& env, const state::StateView& view) {
  for (const auto& r : env.read_set) {
    auto entry = view.get(r.key);
    if (r.version.has_value()) {
      if (!entry || entry->version != *r.version) return false;
    } else if (entry) {
      return false;
    }
  }
  return true;
}

void apply_writes(state::OverlayStateView& overlay, const tx::Envelope& env, uint64_t block,
                  uint32_t index) {
  for (const auto& w : env.write_set)
    overlay.put(w.key, state::Entry{w.value, state::Version{block, index}});
}

}  // namespace

std::vector<ledger::TxValidity> validate(const ledger::Block& block,
                                         const state::StateView& committed,
                                         const channel::ChannelConfig& cfg) {
  std::vector<ledger::TxValidity> flags;
  flags.reserve(block.transactions.size());
  state::OverlayStateView overlay(committed);
  for (size_t i = 0; i < block.transactions.size(); ++i) {
    const tx::Envelope& env = block.transactions[i];
    const tx::Proposal& p = env.signed_proposal.proposal;

    if (block.header.block_number == 0 && i == 0) {
      ledger::TxValidity v = validate_genesis_tx(env);
      flags.push_back(v);
      if (v == ledger::TxValidity::VALID)
        apply_writes(overlay, env, block.header.block_number, static_cast<uint32_t>(i));
      continue;
    }

    if (p.function == tx::kFnConfigChannel) {
      flags.push_back(ledger::TxValidity::POLICY_FAIL);
      continue;
    }
    auto key = resolve_submitter_key(env.signed_proposal, overlay, cfg);
    if (env.tx_id != tx::compute_tx_id(p) || !key ||
        !identity::verify_detached(*key, env.signed_proposal.client_signature,
                                   tx::encode_proposal(p))) {
      flags.push_back(ledger::TxValidity::BAD_SIGNATURE);
      continue;
    }
    if (!endorsement_policy_holds(env, cfg)) {
      flags.push_back(ledger::TxValidity::POLICY_FAIL);
      continue;
    }
    if (!mvcc_holds(env, overlay)) {
      flags.push_back(ledger::TxValidity::MVCC_CONFLICT);
      continue;
    }
    flags.push_back(ledger::TxValidity::VALID);
    apply_writes(overlay, env, block.header.block_number, static_cast<uint32_t>(i));
  }
  return flags;
}

std::vector<ledger::TxValidity> validate_order_execute(
    const ledger::Block& block, const state::StateView& committed,
    const channel::ChannelConfig& cfg, uint64_t* exec_counter,
    std::vector<std::vector<tx::WriteEntry>>* executed_writes) {
  std::vector<ledger::TxValidity> flags;
  flags.reserve(block.transactions.size());
  state::OverlayStateView overlay(committed);
  auto emit = [&](ledger::TxValidity v, std::vector<tx::WriteEntry> writes) {
    flags.push_back(v);
    if (executed_writes) executed_writes->push_back(std::move(writes));
  };
  for (size_t i = 0; i < block.transactions.size(); ++i) {
    const tx::Envelope& env = block.transactions[i];
    const tx::Proposal& p = env.signed_proposal.proposal;

    if (block.header.block_number == 0 && i == 0) {
      ledger::TxValidity v = validate_genesis_tx(env);
      if (v == ledger::TxValidity::VALID) {
        apply_writes(overlay, env, block.header.block_number, static_cast<uint32_t>(i));
        emit(v, env.write_set);  // genesis carries its configuration write
      } else {
        emit(v, {});
      }
      continue;
    }

    if (p.function == tx::kFnConfigChannel) {
      emit(ledger::TxValidity::EXEC_FAIL, {});
      continue;
    }
    auto key = resolve_submitter_key(env.signed_proposal, overlay, cfg);
    if (env.tx_id != tx::compute_tx_id(p) || !key ||
        !identity::verify_detached(*key, env.signed_proposal.client_signature,
                                   tx::encode_proposal(p))) {
      emit(ledger::TxValidity::BAD_SIGNATURE, {});
      continue;
    }
    chaincode::ExecOutcome out =
        chaincode::execute_any(overlay, chaincode::ExecContext{p.submitter}, p.function, p.args);
    if (exec_counter) ++*exec_counter;
    if (!out.ok()) {
      emit(out.error == ErrorCode::DuplicateAsset ? ledger::TxValidity::MVCC_CONFLICT
                                                  : ledger::TxValidity::EXEC_FAIL,
           {});
      continue;
    }
    for (const auto& w : out.write_set)
      overlay.put(w.key, state::Entry{w.value, state::Version{block.header.block_number,
                                                              static_cast<uint32_t>(i)}});
    emit(ledger::TxValidity::VALID, out.write_set);
  }
  return flags;
}

void apply_executed(state::WorldState& world, const ledger::Block& block,
                    const std::vector<ledger::TxValidity>& flags,
                    const std::vector<std::vector<tx::WriteEntry>>& executed_writes) {
  for (size_t i = 0; i < block.transactions.size(); ++i) {
    if (flags[i] != ledger::TxValidity::VALID) continue;
    for (const auto& w : executed_writes[i]) {
      world[w.key] = state::Entry{
          w.value, state::Version{block.header.block_number, static_cast<uint32_t>(i)}};
    }
  }
}

ledger::ReplayFn make_replayer() {
  return [](const ledger::Block& block, state::WorldState& world) {
    channel::ChannelConfig cfg;
    if (block.header.block_number == 0) {
      if (block.transactions.empty() || block.transactions[0].signed_proposal.proposal.args.empty())
        raise(ErrorCode::InvalidConfig, "genesis block carries no channel configuration");
      cfg = channel::decode_channel_config(
          block.transactions[0].signed_proposal.proposal.args[0]);
    } else {
      auto entry = world.find(channel::channel_config_key());
      if (entry == world.end())
        raise(ErrorCode::InvalidConfig, "world state has no channel configuration");
      cfg = channel::decode_channel_config(entry->second.value);
    }
    state::MapStateView view(world);
    std::vector<ledger::TxValidity> flags;
    if (cfg.pipeline == channel::Pipeline::ORDER_EXECUTE) {
      std::vector<std::vector<tx::WriteEntry>> executed;
      flags = validate_order_execute(block, view, cfg, nullptr, &executed);
      apply_executed(world, block, flags, executed);
    } else {
      flags = validate(block, view, cfg);
      ledger::Block advanced = block;  // apply by the recomputed flags, not the stored ones
      advanced.validity_flags = flags;
      ledger::apply_block(world, advanced);
    }
    return flags;
  };
}

// ---------------------------------------------------------------------------
// ChannelRuntime
// ---------------------------------------------------------------------------

tx::Envelope make_genesis_envelope(const channel::ChannelConfig& cfg,
                                   const identity::KeyPair& orderer_key) {
  Bytes cfg_bytes = channel::encode_channel_config(cfg);
  tx::Proposal p;
  p.channel_id = cfg.channel_id;
  p.function = tx::kFnConfigChannel;
  p.args = {cfg_bytes};
  p.submitter = "orderer";
  Digest32 seed = sha256(cfg_bytes);
  std::copy_n(seed.begin(), p.nonce.size(), p.nonce.begin());
  tx::SignedProposal sp = tx::make_signed_proposal(orderer_key, std::move(p));

  tx::Envelope env;
  env.tx_id = tx::compute_tx_id(sp.proposal);
  env.signed_proposal = std::move(sp);
  env.read_set.push_back(tx::ReadEntry{channel::channel_config_key(), std::nullopt});
  env.write_set.push_back(tx::WriteEntry{channel::channel_config_key(), cfg_bytes});
  return env;
}

ChannelRuntime ChannelRuntime::create(channel::ChannelConfig cfg,
                                      const identity::KeyPair& orderer_key,
                                      uint64_t genesis_timestamp_ms) {
  channel::validate_channel_config(cfg);
  if (cfg.orderer_public_key != orderer_key.pk)
    raise(ErrorCode::InvalidConfig, "orderer key does not match the channel configuration");
  ChannelRuntime rt(std::move(cfg), orderer_key);
  tx::Envelope genesis = make_genesis_envelope(rt.cfg_, orderer_key);
  ledger::Block b = build_block(0, kZeroDigest, genesis_timestamp_ms, {std::move(genesis)},
                                orderer_key);
  state::MapStateView empty_view{rt.world_};
  b.validity_flags = rt.cfg_.pipeline == channel::Pipeline::ORDER_EXECUTE
                         ? validate_order_execute(b, empty_view, rt.cfg_, nullptr)
                         : validate(b, empty_view, rt.cfg_);
  if (b.validity_flags != std::vector{ledger::TxValidity::VALID})
    raise(ErrorCode::InvalidConfig, "genesis configuration transaction failed validation");
  ledger::apply_block(rt.world_, b);
  rt.chain_.append_block(std::move(b));
  return rt;
}

ChannelRuntime ChannelRuntime::load(const std::vector<Bytes>& records,
                                    identity::KeyPair orderer_key) {
  ledger::VerificationReport report = ledger::verify_records(records, make_replayer());
  if (!report.ok)
    raise(ErrorCode::ChainNotVerified,
          "stored chain fails verification at block " + std::to_string(*report.first_bad_block));
  if (records.empty()) raise(ErrorCode::NotFound, "no blocks to load");
  ledger::Chain chain = ledger::Chain::from_records(records);
  channel::ChannelConfig cfg = channel::decode_channel_config(
      chain.block(0).transactions[0].signed_proposal.proposal.args[0]);
  if (cfg.orderer_public_key != orderer_key.pk)
    raise(ErrorCode::UnknownSigner, "orderer key does not match the channel configuration");
  ChannelRuntime rt(std::move(cfg), orderer_key);
  ledger::ReplayFn advance = make_replayer();
  for (const auto& b : chain.blocks()) advance(b, rt.world_);
  rt.chain_ = std::move(chain);
  return rt;
}

const ledger::Block& ChannelRuntime::commit_batch(std::vector<tx::Envelope> batch,
                                                  uint64_t timestamp_ms, uint64_t* exec_counter) {
  ledger::Block b = build_block(chain_.height(), chain_.tip_hash(), timestamp_ms,
                                std::move(batch), orderer_key_);
  state::MapStateView view{world_};
  if (cfg_.pipeline == channel::Pipeline::ORDER_EXECUTE) {
    std::vector<std::vector<tx::WriteEntry>> executed;
    b.validity_flags = validate_order_execute(b, view, cfg_, exec_counter, &executed);
    apply_executed(world_, b, b.validity_flags, executed);
  } else {
    b.validity_flags = validate(b, view, cfg_);
    ledger::apply_block(world_, b);
  }
  chain_.append_block(std::move(b));
  return chain_.blocks().back();
}

ledger::VerificationReport ChannelRuntime::verify() const {
  return ledger::verify_records(chain_.records(), make_replayer());
}

state::WorldState ChannelRuntime::replay() const {
  state::WorldState world;
  ledger::ReplayFn advance = make_replayer();
  for (const auto& b : chain_.blocks()) advance(b, world);
  return world;
}

// ---------------------------------------------------------------------------
// Proposal builders
// ---------------------------------------------------------------------------

namespace {

std::array<uint8_t, 8> make_nonce(Rng* rng) {
  std::array<uint8_t, 8> n{};
  if (rng) {
    Bytes b = rng->bytes(n.size());
    std::transform(b.begin(), b.end(), n.begin(),
                   [](char c) { return static_cast<uint8_t>(c); });
  } else {
    identity::random_bytes(n.data(), n.size());
  }
  return n;
}

tx::SignedProposal build_proposal(const identity::Credential& cred, const std::string& channel_id,
                                  const std::string& function, std::vector<std::string> args,
                                  Rng* rng) {
  tx::Proposal p;
  p.channel_id = channel_id;
  p.function = function;
  p.args = std::move(args);
  p.submitter = cred.participant_id;
  p.nonce = make_nonce(rng);
  return tx::make_signed_proposal(cred.keys, std::move(p));
}

}  // namespace

tx::SignedProposal make_data_append_proposal(const identity::Credential& cred,
                                             const std::string& channel_id,
                                             const chaincode::WebLogData& weblog, Rng* rng) {
  return build_proposal(cred, channel_id, tx::kFnDataAppend,
                        {chaincode::encode_weblog(weblog)}, rng);
}

tx::SignedProposal make_query_proposal(const identity::Credential& cred,
                                       const std::string& channel_id,
                                       const chaincode::QuerySpec& query, Rng* rng) {
  return build_proposal(cred, channel_id, tx::kFnSelectWebLogData,
                        {chaincode::encode_query_spec(query)}, rng);
}

tx::SignedProposal make_registration_proposal(const identity::Credential& cred,
                                              const std::string& channel_id,
                                              const identity::ParticipantRecord& record,
                                              Rng* rng) {
  return build_proposal(cred, channel_id, tx::kFnRegisterDataSource,
                        {identity::encode_participant_record(record)}, rng);
}

}  // namespace medusa::txflow
