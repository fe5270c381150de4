#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "medusa/bytes.hpp"
#include "medusa/channel.hpp"
#include "medusa/rng.hpp"

namespace medusa::netsim {

// Peer fault modes. OFFLINE peers miss deliveries during their window and
// catch up on reconnect; a TAMPERING peer mutates one byte of one stored
// block after delivering it, then self-audits.
struct FaultSpec {
  enum class Mode { HONEST, OFFLINE, TAMPERING };
  Mode mode = Mode::HONEST;
  uint64_t offline_from_ms = 0;
  uint64_t offline_to_ms = 0;   // exclusive
  uint64_t tamper_block = 0;

  friend bool operator==(const FaultSpec&, const FaultSpec&) = default;
};

struct PeerSpec {
  std::string peer_id;
  FaultSpec fault;
};

struct WorkloadSpec {
  uint64_t appends = 0;
  uint64_t queries = 0;
  uint32_t conflict_rate_pct = 0;  // percent of appends that re-target a used asset_id
  std::vector<std::string> user_agents;     // pool; defaults applied when empty
  std::map<int, uint32_t> status_weights;   // status -> weight; defaults when empty
};

struct ChannelSpec {
  std::string channel_id;
  channel::Pipeline pipeline = channel::Pipeline::EOV;
  uint32_t policy_k = 1;
  uint32_t max_block_txs = 16;
  uint64_t max_wait_ms = 100;
  std::vector<std::string> members;    // peer ids
  std::vector<std::string> endorsers;  // subset of members
  uint32_t datasources = 1;
  WorkloadSpec workload;
};

struct ScenarioConfig {
  uint64_t seed = 0;
  uint64_t submit_interval_ms = 0;  // 0 = burst: all proposals enter at the same instant
  uint64_t delay_ms_min = 5;        // per-link constant delay bounds
  uint64_t delay_ms_max = 50;
  std::vector<PeerSpec> peers;
  std::vector<ChannelSpec> channels;

  static ScenarioConfig parse(std::string_view bytes);  // strict; throws InvalidConfig/DecodeError
  Bytes encode() const;
};

void validate_scenario(const ScenarioConfig& cfg);  // throws InvalidConfig

struct LatencyStats {
  uint64_t p50_ms = 0;
  uint64_t p95_ms = 0;
  uint64_t p99_ms = 0;
};

// Workload envelopes only; setup (registrations) is tallied separately so a
// "10 appends" scenario reports committed_valid = 10.
struct ChannelMetrics {
  uint64_t committed_valid = 0;
  uint64_t committed_invalid = 0;
  std::map<std::string, uint64_t> invalid_flags;  // flag name -> count
  uint64_t endorse_failed = 0;
  uint64_t orderer_drops = 0;
  uint64_t setup_committed = 0;
  uint64_t blocks = 0;
  uint64_t elapsed_ms = 0;
  std::string tps;  // fixed-point "N.NNN", integer math over simulated time
  LatencyStats latency;
  std::string canonical_digest;                     // hex
  std::map<std::string, std::string> peer_digests;  // peer -> hex
  std::map<std::string, uint64_t> peer_exec_counts;     // order-execute re-executions
  std::map<std::string, uint64_t> endorse_exec_counts;  // eov endorsement executions
  std::map<std::string, std::string> halted_peers;      // peer -> reason
};

struct ScenarioMetrics {
  std::map<std::string, ChannelMetrics> channels;

  Bytes encode() const;  // canonical, byte-reproducible for a fixed seed
};

// Human-readable table of the same numbers.
std::string render_metrics_table(const ScenarioMetrics& m);

struct ScenarioResult {
  ScenarioMetrics metrics;
  std::vector<std::string> trace;  // one line per event, reproducible
  // final ledgers, for isolation and convergence checks:
  // canonical[channel] and peers[peer][channel] -> block records
  std::map<std::string, std::vector<Bytes>> canonical;
  std::map<std::string, std::map<std::string, std::vector<Bytes>>> peers;
  std::map<std::string, std::vector<std::string>> members;  // channel -> member peers
};

// Drives the configured workload through the configured pipeline over
// simulated time. Pure function of the config: identical configs give
// identical metrics bytes and traces.
ScenarioResult run_scenario(const ScenarioConfig& cfg);

// Same workload, ORDER_EXECUTE pipeline on every channel: every peer executes
// every transaction sequentially after ordering.
ScenarioResult run_order_execute_baseline(ScenarioConfig cfg);

struct IsolationReport {
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
};

// Scans every ledger for envelopes whose channel_id mismatches the ledger's
// channel, and non-member peers for any of a channel's blocks.
IsolationReport assert_channel_isolation(const ScenarioResult& result);

}  // namespace medusa::netsim
