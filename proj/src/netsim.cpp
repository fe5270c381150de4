#include "medusa/netsim.hpp"

#include <algorithm>
#include <deque>
#include <queue>
#include <set>
#include <sstream>

#include "medusa/canonical.hpp"
#include "medusa/identity.hpp"
#include "medusa/ledger.hpp"
#include "medusa/txflow.hpp"

namespace medusa::netsim {

// ---------------------------------------------------------------------------
// Config codec
// ---------------------------------------------------------------------------

namespace {

std::string fault_name(FaultSpec::Mode m) {
  switch (m) {
    case FaultSpec::Mode::HONEST: return "HONEST";
    case FaultSpec::Mode::OFFLINE: return "OFFLINE";
    case FaultSpec::Mode::TAMPERING: return "TAMPERING";
  }
  return "HONEST";
}

}  // namespace

ScenarioConfig ScenarioConfig::parse(std::string_view bytes) {
  cjson o = parse_canonical(bytes);
  check_keys(o, {"seed", "peers", "channels"},
             {"submit_interval_ms", "delay_ms_min", "delay_ms_max"});
  ScenarioConfig cfg;
  cfg.seed = need_u64(o, "seed");
  if (o.contains("submit_interval_ms")) cfg.submit_interval_ms = need_u64(o, "submit_interval_ms");
  if (o.contains("delay_ms_min")) cfg.delay_ms_min = need_u64(o, "delay_ms_min");
  if (o.contains("delay_ms_max")) cfg.delay_ms_max = need_u64(o, "delay_ms_max");
  for (const cjson& pj : need_array(o, "peers")) {
    check_keys(pj, {"peer_id", "fault"},
               {"offline_from_ms", "offline_to_ms", "tamper_block"});
    PeerSpec p;
    p.peer_id = need_string(pj, "peer_id");
    std::string f = need_string(pj, "fault");
    if (f == "HONEST") {
      p.fault.mode = FaultSpec::Mode::HONEST;
    } else if (f == "OFFLINE") {
      p.fault.mode = FaultSpec::Mode::OFFLINE;
      p.fault.offline_from_ms = need_u64(pj, "offline_from_ms");
      p.fault.offline_to_ms = need_u64(pj, "offline_to_ms");
    } else if (f == "TAMPERING") {
      p.fault.mode = FaultSpec::Mode::TAMPERING;
      p.fault.tamper_block = need_u64(pj, "tamper_block");
    } else {
      raise(ErrorCode::InvalidConfig, "unknown fault mode: " + f);
    }
    cfg.peers.push_back(std::move(p));
  }
  for (const cjson& cj : need_array(o, "channels")) {
    check_keys(cj,
               {"channel_id", "pipeline", "policy_k", "max_block_txs", "max_wait_ms", "members",
                "endorsers", "workload"},
               {"datasources", "user_agents", "status_weights"});
    ChannelSpec c;
    c.channel_id = need_string(cj, "channel_id");
    c.pipeline = channel::pipeline_from_name(need_string(cj, "pipeline"));
    c.policy_k = need_u32(cj, "policy_k");
    c.max_block_txs = need_u32(cj, "max_block_txs");
    c.max_wait_ms = need_u64(cj, "max_wait_ms");
    for (const cjson& m : need_array(cj, "members")) c.members.push_back(m.get<std::string>());
    for (const cjson& e : need_array(cj, "endorsers")) c.endorsers.push_back(e.get<std::string>());
    if (cj.contains("datasources")) c.datasources = need_u32(cj, "datasources");
    const cjson& wj = need_object(cj, "workload");
    check_keys(wj, {"appends", "queries"}, {"conflict_rate_pct"});
    c.workload.appends = need_u64(wj, "appends");
    c.workload.queries = need_u64(wj, "queries");
    if (wj.contains("conflict_rate_pct"))
      c.workload.conflict_rate_pct = need_u32(wj, "conflict_rate_pct");
    if (cj.contains("user_agents")) {
      for (const cjson& u : need_array(cj, "user_agents"))
        c.workload.user_agents.push_back(u.get<std::string>());
    }
    if (cj.contains("status_weights")) {
      const cjson& sw = need_object(cj, "status_weights");
      for (auto it = sw.begin(); it != sw.end(); ++it) {
        int code = std::stoi(it.key());
        if (!it.value().is_number_unsigned())
          raise(ErrorCode::InvalidConfig, "status weight must be a non-negative integer");
        c.workload.status_weights[code] = it.value().get<uint32_t>();
      }
    }
    cfg.channels.push_back(std::move(c));
  }
  validate_scenario(cfg);
  return cfg;
}

Bytes ScenarioConfig::encode() const {
  cjson o = cjson::object();
  o["seed"] = seed;
  o["submit_interval_ms"] = submit_interval_ms;
  o["delay_ms_min"] = delay_ms_min;
  o["delay_ms_max"] = delay_ms_max;
  o["peers"] = cjson::array();
  for (const auto& p : peers) {
    cjson pj = cjson::object();
    pj["peer_id"] = p.peer_id;
    pj["fault"] = fault_name(p.fault.mode);
    if (p.fault.mode == FaultSpec::Mode::OFFLINE) {
      pj["offline_from_ms"] = p.fault.offline_from_ms;
      pj["offline_to_ms"] = p.fault.offline_to_ms;
    } else if (p.fault.mode == FaultSpec::Mode::TAMPERING) {
      pj["tamper_block"] = p.fault.tamper_block;
    }
    o["peers"].push_back(std::move(pj));
  }
  o["channels"] = cjson::array();
  for (const auto& c : channels) {
    cjson cj = cjson::object();
    cj["channel_id"] = c.channel_id;
    cj["pipeline"] = std::string(channel::pipeline_name(c.pipeline));
    cj["policy_k"] = c.policy_k;
    cj["max_block_txs"] = c.max_block_txs;
    cj["max_wait_ms"] = c.max_wait_ms;
    cj["members"] = c.members;
    cj["endorsers"] = c.endorsers;
    cj["datasources"] = c.datasources;
    cjson wj = cjson::object();
    wj["appends"] = c.workload.appends;
    wj["queries"] = c.workload.queries;
    wj["conflict_rate_pct"] = c.workload.conflict_rate_pct;
    cj["workload"] = std::move(wj);
    if (!c.workload.user_agents.empty()) cj["user_agents"] = c.workload.user_agents;
    if (!c.workload.status_weights.empty()) {
      cjson sw = cjson::object();
      for (const auto& [code, w] : c.workload.status_weights) sw[std::to_string(code)] = w;
      cj["status_weights"] = std::move(sw);
    }
    o["channels"].push_back(std::move(cj));
  }
  return dump_canonical(o);
}

void validate_scenario(const ScenarioConfig& cfg) {
  if (cfg.peers.empty()) raise(ErrorCode::InvalidConfig, "scenario needs at least one peer");
  if (cfg.channels.empty()) raise(ErrorCode::InvalidConfig, "scenario needs at least one channel");
  if (cfg.delay_ms_min > cfg.delay_ms_max)
    raise(ErrorCode::InvalidConfig, "delay_ms_min must not exceed delay_ms_max");
  std::set<std::string> peer_ids;
  for (const auto& p : cfg.peers) {
    if (p.peer_id.empty()) raise(ErrorCode::InvalidConfig, "peer_id must not be empty");
    if (!peer_ids.insert(p.peer_id).second)
      raise(ErrorCode::InvalidConfig, "duplicate peer_id " + p.peer_id);
    if (p.fault.mode == FaultSpec::Mode::OFFLINE &&
        p.fault.offline_from_ms >= p.fault.offline_to_ms)
      raise(ErrorCode::InvalidConfig, "offline window must be non-empty");
  }
  std::set<std::string> channel_ids;
  for (const auto& c : cfg.channels) {
    if (!channel_ids.insert(c.channel_id).second)
      raise(ErrorCode::InvalidConfig, "duplicate channel_id " + c.channel_id);
    if (c.members.empty())
      raise(ErrorCode::InvalidConfig, "channel " + c.channel_id + " has no members");
    std::set<std::string> members;
    for (const auto& m : c.members) {
      if (!peer_ids.count(m))
        raise(ErrorCode::InvalidConfig, "channel member " + m + " is not a declared peer");
      if (!members.insert(m).second)
        raise(ErrorCode::InvalidConfig, "duplicate channel member " + m);
    }
    for (const auto& e : c.endorsers) {
      if (!members.count(e))
        raise(ErrorCode::InvalidConfig, "endorser " + e + " is not a channel member");
    }
    if (c.pipeline == channel::Pipeline::EOV &&
        (c.policy_k < 1 || c.policy_k > c.endorsers.size()))
      raise(ErrorCode::InvalidPolicy, "policy_k must be between 1 and the endorser count");
    if (c.max_block_txs < 1)
      raise(ErrorCode::InvalidConfig, "max_block_txs must be at least 1");
    if (c.datasources < 1)
      raise(ErrorCode::InvalidConfig, "channel " + c.channel_id + " needs a datasource");
    if (c.workload.conflict_rate_pct > 100)
      raise(ErrorCode::InvalidConfig, "conflict_rate_pct must be 0..100");
  }
}

// ---------------------------------------------------------------------------
// Workload synthesis
// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string>& default_user_agents() {
  static const std::vector<std::string> pool = {
      "Mozilla/5.0 (X11; Linux x86_64) Firefox/121.0",
      "Mozilla/5.0 (Windows NT 10.0; Win64; x64) Chrome/120.0",
      "curl/8.4.0",
      "Googlebot/2.1 (+http://www.google.com/bot.html)",
  };
  return pool;
}

const std::map<int, uint32_t>& default_status_weights() {
  static const std::map<int, uint32_t> w = {
      {200, 70}, {301, 5}, {304, 8}, {403, 3}, {404, 10}, {500, 4},
  };
  return w;
}

const std::vector<std::string>& url_pool() {
  static const std::vector<std::string> pool = {
      "/",          "/index.html",        "/login",           "/api/v1/items",
      "/static/app.js", "/images/logo.png", "/checkout",        "/search?q=logs",
  };
  return pool;
}

int pick_status(Rng& rng, const std::map<int, uint32_t>& weights) {
  uint64_t total = 0;
  for (const auto& [code, w] : weights) total += w;
  uint64_t roll = rng.below(total == 0 ? 1 : total);
  for (const auto& [code, w] : weights) {
    if (roll < w) return code;
    roll -= w;
  }
  return 200;
}

constexpr int64_t kWorkloadEpochMs = 1700000000000;  // late 2023, arbitrary base

chaincode::WebLogData synth_weblog(Rng& rng, const WorkloadSpec& spec, int64_t datetime_ms) {
  const auto& uas = spec.user_agents.empty() ? default_user_agents() : spec.user_agents;
  const auto& weights = spec.status_weights.empty() ? default_status_weights() : spec.status_weights;
  chaincode::WebLogData w;
  w.url = rng.pick(url_pool());
  w.referer = rng.chance(30) ? "" : "https://ref.example" + rng.pick(url_pool());
  w.return_code = pick_status(rng, weights);
  w.user_agent = uas[rng.below(uas.size())];
  w.datetime_ms = datetime_ms;
  w.ip = "198.51.100." + std::to_string(rng.below(254) + 1);
  w.asset_id = chaincode::derive_asset_id(w);
  return w;
}

chaincode::QuerySpec synth_query(Rng& rng, const WorkloadSpec& spec, uint64_t appends) {
  const auto& uas = spec.user_agents.empty() ? default_user_agents() : spec.user_agents;
  chaincode::QuerySpec q;
  switch (rng.below(4)) {
    case 0: q.filter = chaincode::QuerySpec::Filter::ALL; break;
    case 1:
      q.filter = chaincode::QuerySpec::Filter::BY_IP;
      q.ip = "198.51.100." + std::to_string(rng.below(254) + 1);
      break;
    case 2:
      q.filter = chaincode::QuerySpec::Filter::BY_USER_AGENT;
      q.user_agent = uas[rng.below(uas.size())];
      break;
    default: {
      q.filter = chaincode::QuerySpec::Filter::BY_DATETIME_RANGE;
      int64_t span = static_cast<int64_t>(std::max<uint64_t>(appends, 1) * 1000);
      int64_t a = kWorkloadEpochMs + static_cast<int64_t>(rng.below(span));
      int64_t b = kWorkloadEpochMs + static_cast<int64_t>(rng.below(span));
      q.from_ms = std::min(a, b);
      q.to_ms = std::max(a, b) + 1;
      break;
    }
  }
  return q;
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

struct PeerChannelView {
  std::vector<Bytes> records;
  std::vector<ledger::Block> blocks;
  state::WorldState world;
  std::map<uint64_t, Bytes> buffered;  // out-of-order deliveries
  uint64_t exec_count = 0;     // order-execute re-executions
  uint64_t endorse_execs = 0;  // eov endorsement executions
  bool halted = false;
  std::string halt_reason;

  Digest32 tip_hash() const {
    return blocks.empty() ? kZeroDigest : ledger::compute_block_hash(blocks.back().header);
  }
};

struct SimPeer {
  PeerSpec spec;
  identity::KeyPair key;
  uint64_t tamper_pos_roll = 0;
  uint64_t tamper_val_roll = 0;
  bool tampered = false;
  std::map<std::string, PeerChannelView> views;

  bool online_at(uint64_t t) const {
    if (spec.fault.mode == FaultSpec::Mode::OFFLINE)
      return t < spec.fault.offline_from_ms || t >= spec.fault.offline_to_ms;
    return true;
  }
};

struct WorkItem {
  tx::SignedProposal sp;
  bool is_query = false;
  size_t ds_index = 0;
};

struct SimChannel {
  ChannelSpec spec;
  identity::KeyPair orderer_key;
  std::optional<txflow::ChannelRuntime> runtime;
  std::vector<identity::Credential> creds;
  std::map<std::string, uint64_t> ds_delay;
  std::map<std::string, uint64_t> peer_delay;
  std::vector<WorkItem> workload;

  ChannelMetrics metrics;
  std::map<std::string, uint64_t> submit_time;  // tx_id hex -> submit t
  std::set<std::string> workload_txids;
  std::vector<uint64_t> latencies;
  uint64_t workload_start = 0;
  uint64_t last_commit_t = 0;
};

struct Event {
  uint64_t t = 0;
  uint64_t seq = 0;
  enum class Kind { SUBMIT, ORDERER_RECV, TIMER, DELIVER, RECONNECT } kind = Kind::SUBMIT;
  size_t channel = 0;
  size_t item = 0;  // SUBMIT: workload index; TIMER: ordering epoch
  std::string peer_id;
  uint64_t block_no = 0;
  std::optional<tx::Envelope> envelope;
};

struct EventAfter {
  bool operator()(const Event& a, const Event& b) const {
    return std::tie(a.t, a.seq) > std::tie(b.t, b.seq);
  }
};

uint64_t percentile(std::vector<uint64_t> sorted, unsigned q) {
  if (sorted.empty()) return 0;
  size_t rank = (sorted.size() * q + 99) / 100;  // nearest-rank, 1-based
  if (rank == 0) rank = 1;
  return sorted[rank - 1];
}

std::string fixed_point_tps(uint64_t count, uint64_t elapsed_ms) {
  if (count == 0) return "0.000";
  if (elapsed_ms == 0) elapsed_ms = 1;
  uint64_t milli = count * 1000000 / elapsed_ms;
  std::string frac = std::to_string(milli % 1000);
  return std::to_string(milli / 1000) + "." + std::string(3 - frac.size(), '0') + frac;
}

class Sim {
 public:
  explicit Sim(const ScenarioConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {}

  ScenarioResult run() {
    setup();
    while (!queue_.empty()) {
      Event ev = queue_.top();
      queue_.pop();
      dispatch(ev);
    }
    return finalize();
  }

 private:
  void schedule(Event ev, uint64_t t) {
    ev.t = t;
    ev.seq = next_seq_++;
    queue_.push(std::move(ev));
  }

  void trace(uint64_t t, const std::string& line) {
    trace_.push_back("t=" + std::to_string(t) + " " + line);
  }

  SimPeer& peer(const std::string& id) { return peers_[peer_index_.at(id)]; }

  uint64_t draw_delay() { return cfg_.delay_ms_min + rng_.below(cfg_.delay_ms_max - cfg_.delay_ms_min + 1); }

  void setup() {
    validate_scenario(cfg_);
    for (const auto& ps : cfg_.peers) {
      SimPeer p;
      p.spec = ps;
      p.key = identity::KeyPair::generate(rng_);
      if (ps.fault.mode == FaultSpec::Mode::TAMPERING) {
        p.tamper_pos_roll = rng_.next_u64();
        p.tamper_val_roll = rng_.next_u64();
      }
      peer_index_[ps.peer_id] = peers_.size();
      peers_.push_back(std::move(p));
    }

    for (const auto& cs : cfg_.channels) {
      SimChannel ch;
      ch.spec = cs;
      ch.orderer_key = identity::KeyPair::generate(rng_);

      channel::ChannelConfig cc;
      cc.channel_id = cs.channel_id;
      cc.pipeline = cs.pipeline;
      cc.orderer_public_key = ch.orderer_key.pk;
      cc.policy_k = cs.policy_k;
      cc.max_block_txs = cs.max_block_txs;
      cc.max_wait_ms = cs.max_wait_ms;
      std::set<std::string> endorsers(cs.endorsers.begin(), cs.endorsers.end());
      for (const auto& m : cs.members) {
        cc.peers.push_back(channel::PeerInfo{m, peer(m).key.pk, endorsers.count(m) > 0});
        peer(m).views[cs.channel_id];  // join
        ch.peer_delay[m] = draw_delay();
      }
      ch.runtime = txflow::ChannelRuntime::create(cc, ch.orderer_key, 0);

      identity::Registry registry;
      for (uint32_t i = 0; i < cs.datasources; ++i) {
        identity::DataSource ds;
        ds.datasource_id = cs.channel_id + "-ds" + std::to_string(i);
        ds.ip = "192.0.2." + std::to_string(i % 254 + 1);
        ds.port = static_cast<uint16_t>(9000 + i % 1000);
        ds.username = "operator" + std::to_string(i);
        ds.url = "https://" + ds.datasource_id + ".example";
        ch.creds.push_back(registry.register_datasource(ds, "pw-" + ds.datasource_id, rng_));
        ch.ds_delay[ds.datasource_id] = draw_delay();
      }

      channels_.push_back(std::move(ch));
      SimChannel& sc = channels_.back();

      // registrations committed as setup blocks before any workload
      std::vector<tx::Envelope> reg_envs;
      for (const auto& cred : sc.creds) {
        const identity::ParticipantRecord& rec = *registry.find(cred.participant_id);
        tx::SignedProposal sp =
            txflow::make_registration_proposal(cred, cs.channel_id, rec, &rng_);
        reg_envs.push_back(make_envelope_for_pipeline(sc, sp));
      }
      for (auto& env : reg_envs) sc.runtime->ordering().submit(std::move(env), 0);
      while (auto batch = sc.runtime->ordering().force_cut()) {
        const ledger::Block& b = sc.runtime->commit_batch(std::move(*batch), 0, nullptr);
        sc.metrics.setup_committed += b.transactions.size();
        sc.last_commit_t = 0;
      }

      // genesis + setup blocks flow to members through normal delivery
      size_t ci = channels_.size() - 1;
      for (uint64_t bno = 0; bno < sc.runtime->chain().height(); ++bno) {
        for (const auto& m : cs.members) {
          Event ev;
          ev.kind = Event::Kind::DELIVER;
          ev.channel = ci;
          ev.peer_id = m;
          ev.block_no = bno;
          schedule(std::move(ev), sc.peer_delay[m]);
        }
      }

      // workload: generated up front so the event loop never touches the rng
      sc.workload_start = cfg_.delay_ms_max + 1;
      std::vector<chaincode::WebLogData> used;
      for (uint64_t i = 0; i < cs.workload.appends; ++i) {
        chaincode::WebLogData w;
        if (!used.empty() && rng_.below(100) < cs.workload.conflict_rate_pct) {
          w = used[rng_.below(used.size())];
        } else {
          w = synth_weblog(rng_, cs.workload,
                           kWorkloadEpochMs + static_cast<int64_t>(i) * 1000);
          used.push_back(w);
        }
        WorkItem item;
        item.ds_index = rng_.below(sc.creds.size());
        item.sp = txflow::make_data_append_proposal(sc.creds[item.ds_index], cs.channel_id, w,
                                                    &rng_);
        sc.workload.push_back(std::move(item));
      }
      for (uint64_t i = 0; i < cs.workload.queries; ++i) {
        WorkItem item;
        item.is_query = true;
        item.ds_index = rng_.below(sc.creds.size());
        item.sp = txflow::make_query_proposal(sc.creds[item.ds_index], cs.channel_id,
                                              synth_query(rng_, cs.workload, cs.workload.appends),
                                              &rng_);
        sc.workload.push_back(std::move(item));
      }
      // seeded interleave of appends and queries
      for (size_t i = sc.workload.size(); i > 1; --i)
        std::swap(sc.workload[i - 1], sc.workload[rng_.below(i)]);

      for (size_t i = 0; i < sc.workload.size(); ++i) {
        Event ev;
        ev.kind = Event::Kind::SUBMIT;
        ev.channel = ci;
        ev.item = i;
        schedule(std::move(ev), sc.workload_start + i * cfg_.submit_interval_ms);
      }
    }

    for (const auto& ps : cfg_.peers) {
      if (ps.fault.mode == FaultSpec::Mode::OFFLINE) {
        Event ev;
        ev.kind = Event::Kind::RECONNECT;
        ev.peer_id = ps.peer_id;
        schedule(std::move(ev), ps.fault.offline_to_ms);
      }
    }
  }

  // In the order-execute pipeline clients skip endorsement entirely: the
  // envelope carries only the signed proposal.
  tx::Envelope make_envelope_for_pipeline(SimChannel& ch, const tx::SignedProposal& sp) {
    if (ch.spec.pipeline == channel::Pipeline::ORDER_EXECUTE) {
      tx::Envelope env;
      env.tx_id = tx::compute_tx_id(sp.proposal);
      env.signed_proposal = sp;
      return env;
    }
    // setup-time endorsement for registrations runs against empty peer views,
    // which execute_system handles (nothing to read)
    auto env = endorse_now(ch, sp, 0);
    if (!env)
      raise(ErrorCode::InvalidConfig,
            "datasource registration cannot be endorsed (endorsers offline at start?)");
    return std::move(*env);
  }

  std::optional<tx::Envelope> endorse_now(SimChannel& ch, const tx::SignedProposal& sp,
                                          uint64_t t) {
    std::deque<state::MapStateView> views;
    std::vector<txflow::Endorser> endorsers;
    for (const auto& pi : ch.runtime->config().peers) {
      if (!pi.endorser) continue;
      SimPeer& p = peer(pi.peer_id);
      PeerChannelView& v = p.views.at(ch.spec.channel_id);
      views.emplace_back(v.world);
      txflow::Endorser e;
      e.peer_id = pi.peer_id;
      e.key = &p.key;
      e.view = &views.back();
      e.online = p.online_at(t) && !v.halted;
      e.exec_counter = &v.endorse_execs;
      endorsers.push_back(e);
    }
    txflow::EndorseResult r = txflow::endorse(sp, endorsers, ch.runtime->config());
    if (!r.ok()) {
      ch.metrics.endorse_failed++;
      trace(t, "endorse_fail channel=" + ch.spec.channel_id + " error=" +
                   std::string(error_code_name(r.error)) + " detail=" + r.detail);
      return std::nullopt;
    }
    return std::move(r.envelope);
  }

  void dispatch(const Event& ev) {
    switch (ev.kind) {
      case Event::Kind::SUBMIT: return on_submit(ev);
      case Event::Kind::ORDERER_RECV: return on_orderer_recv(ev);
      case Event::Kind::TIMER: return on_timer(ev);
      case Event::Kind::DELIVER: return on_deliver(ev);
      case Event::Kind::RECONNECT: return on_reconnect(ev);
    }
  }

  void on_submit(const Event& ev) {
    SimChannel& ch = channels_[ev.channel];
    const WorkItem& item = ch.workload[ev.item];
    std::string txid = to_hex(tx::compute_tx_id(item.sp.proposal));
    ch.submit_time[txid] = ev.t;
    ch.workload_txids.insert(txid);
    trace(ev.t, "submit channel=" + ch.spec.channel_id + " kind=" +
                    (item.is_query ? std::string("query") : std::string("append")) +
                    " tx=" + txid.substr(0, 12));

    std::optional<tx::Envelope> env;
    if (ch.spec.pipeline == channel::Pipeline::ORDER_EXECUTE) {
      env = make_envelope_for_pipeline(ch, item.sp);
    } else {
      env = endorse_now(ch, item.sp, ev.t);
    }
    if (!env) return;
    Event recv;
    recv.kind = Event::Kind::ORDERER_RECV;
    recv.channel = ev.channel;
    recv.envelope = std::move(env);
    schedule(std::move(recv),
             ev.t + ch.ds_delay.at(ch.creds[item.ds_index].participant_id));
  }

  void on_orderer_recv(const Event& ev) {
    SimChannel& ch = channels_[ev.channel];
    txflow::OrderingService& ord = ch.runtime->ordering();
    bool was_empty = ord.pending_count() == 0;
    bool accepted = ord.submit(*ev.envelope, ev.t);
    trace(ev.t, std::string("orderer_recv channel=") + ch.spec.channel_id +
                    (accepted ? " accepted" : " dropped"));
    if (!accepted) return;
    bool cut = false;
    while (auto batch = ord.take_batch_if_full()) {
      commit(ev.channel, std::move(*batch), ev.t);
      cut = true;
    }
    if (ord.pending_count() > 0 && (was_empty || cut)) arm_timer(ev.channel, ev.t);
  }

  void arm_timer(size_t ci, uint64_t now) {
    SimChannel& ch = channels_[ci];
    Event ev;
    ev.kind = Event::Kind::TIMER;
    ev.channel = ci;
    ev.item = ch.runtime->ordering().current_epoch();
    schedule(std::move(ev), now + ch.spec.max_wait_ms);
  }

  void on_timer(const Event& ev) {
    SimChannel& ch = channels_[ev.channel];
    auto batch = ch.runtime->ordering().take_batch_on_timer(ev.item);
    if (!batch) return;
    trace(ev.t, "block_timer channel=" + ch.spec.channel_id);
    commit(ev.channel, std::move(*batch), ev.t);
    if (ch.runtime->ordering().pending_count() > 0) arm_timer(ev.channel, ev.t);
  }

  void commit(size_t ci, std::vector<tx::Envelope> batch, uint64_t t) {
    SimChannel& ch = channels_[ci];
    const ledger::Block& b = ch.runtime->commit_batch(std::move(batch), t, nullptr);
    ch.last_commit_t = t;
    for (size_t i = 0; i < b.transactions.size(); ++i) {
      std::string txid = to_hex(b.transactions[i].tx_id);
      if (!ch.workload_txids.count(txid)) {
        ch.metrics.setup_committed++;
        continue;
      }
      if (b.validity_flags[i] == ledger::TxValidity::VALID) {
        ch.metrics.committed_valid++;
      } else {
        ch.metrics.committed_invalid++;
        ch.metrics.invalid_flags[std::string(ledger::validity_name(b.validity_flags[i]))]++;
      }
      ch.latencies.push_back(t - ch.submit_time.at(txid));
    }
    trace(t, "commit channel=" + ch.spec.channel_id + " block=" +
                 std::to_string(b.header.block_number) + " txs=" +
                 std::to_string(b.transactions.size()));
    for (const auto& m : ch.spec.members) {
      Event ev;
      ev.kind = Event::Kind::DELIVER;
      ev.channel = ci;
      ev.peer_id = m;
      ev.block_no = b.header.block_number;
      schedule(std::move(ev), t + ch.peer_delay.at(m));
    }
  }

  void on_deliver(const Event& ev) {
    SimChannel& ch = channels_[ev.channel];
    SimPeer& p = peer(ev.peer_id);
    PeerChannelView& v = p.views.at(ch.spec.channel_id);
    if (v.halted) return;
    if (!p.online_at(ev.t)) {
      trace(ev.t, "deliver_missed channel=" + ch.spec.channel_id + " peer=" + ev.peer_id +
                      " block=" + std::to_string(ev.block_no));
      return;
    }
    if (ev.block_no < v.records.size()) return;  // stale (already caught up)
    v.buffered[ev.block_no] = ch.runtime->chain().records()[ev.block_no];
    drain_buffer(ch, p, v, ev.t);
  }

  void drain_buffer(SimChannel& ch, SimPeer& p, PeerChannelView& v, uint64_t t) {
    while (!v.halted) {
      auto it = v.buffered.find(v.records.size());
      if (it == v.buffered.end()) break;
      Bytes record = std::move(it->second);
      v.buffered.erase(it);
      peer_apply(ch, p, v, record, t);
      if (!v.halted && p.spec.fault.mode == FaultSpec::Mode::TAMPERING && !p.tampered &&
          v.records.size() > p.spec.fault.tamper_block) {
        do_tamper(ch, p, v, t);
      }
    }
  }

  void peer_apply(SimChannel& ch, SimPeer& p, PeerChannelView& v, const Bytes& record,
                  uint64_t t) {
    auto halt = [&](const std::string& why) {
      v.halted = true;
      v.halt_reason = why;
      ch.metrics.halted_peers[p.spec.peer_id] = why;
      trace(t, "halt channel=" + ch.spec.channel_id + " peer=" + p.spec.peer_id + " " + why);
    };
    ledger::Block b;
    try {
      b = ledger::decode_block(record);
      if (ledger::encode_block(b) != record)
        raise(ErrorCode::TamperDetected, "record bytes are not canonical");
      if (b.header.block_number != v.records.size())
        raise(ErrorCode::TamperDetected, "unexpected block number");
      if (b.header.previous_hash != v.tip_hash())
        raise(ErrorCode::TamperDetected, "previous_hash does not match local tip");
      if (b.header.data_hash != ledger::compute_data_hash(b.transactions))
        raise(ErrorCode::TamperDetected, "data_hash mismatch");
      channel::ChannelConfig cfg;
      if (b.header.block_number == 0) {
        cfg = channel::decode_channel_config(
            b.transactions.at(0).signed_proposal.proposal.args.at(0));
      } else {
        cfg = channel::decode_channel_config(
            v.world.at(channel::channel_config_key()).value);
      }
      if (!identity::verify_detached(cfg.orderer_public_key, b.header_signature,
                                     ledger::encode_block_header(b.header)))
        raise(ErrorCode::TamperDetected, "orderer header signature does not verify");
      state::MapStateView view(v.world);
      if (cfg.pipeline == channel::Pipeline::ORDER_EXECUTE) {
        std::vector<std::vector<tx::WriteEntry>> executed;
        std::vector<ledger::TxValidity> flags =
            txflow::validate_order_execute(b, view, cfg, &v.exec_count, &executed);
        if (flags != b.validity_flags)
          raise(ErrorCode::TamperDetected, "validity flags disagree with local re-validation");
        txflow::apply_executed(v.world, b, flags, executed);
      } else {
        std::vector<ledger::TxValidity> flags = txflow::validate(b, view, cfg);
        if (flags != b.validity_flags)
          raise(ErrorCode::TamperDetected, "validity flags disagree with local re-validation");
        ledger::apply_block(v.world, b);
      }
    } catch (const Error& e) {
      halt(std::string("TamperDetected block=") + std::to_string(v.records.size()) + " " +
           e.what());
      return;
    }
    v.records.push_back(record);
    v.blocks.push_back(std::move(b));
    trace(t, "apply channel=" + ch.spec.channel_id + " peer=" + p.spec.peer_id + " block=" +
                 std::to_string(v.records.size() - 1));
  }

  void do_tamper(SimChannel& ch, SimPeer& p, PeerChannelView& v, uint64_t t) {
    p.tampered = true;
    Bytes& record = v.records[p.spec.fault.tamper_block];
    size_t pos = p.tamper_pos_roll % record.size();
    record[pos] = static_cast<char>(static_cast<uint8_t>(record[pos]) ^
                                    (1 + p.tamper_val_roll % 255));
    trace(t, "tamper channel=" + ch.spec.channel_id + " peer=" + p.spec.peer_id + " block=" +
                 std::to_string(p.spec.fault.tamper_block) + " pos=" + std::to_string(pos));
    ledger::VerificationReport report =
        ledger::verify_records(v.records, txflow::make_replayer());
    std::string why;
    if (report.ok) {
      why = "tamper escaped self-audit";  // must never happen; convergence test would fail
    } else {
      why = "TamperDetected block=" + std::to_string(*report.first_bad_block) + " kind=" +
            std::string(ledger::failure_kind_name(*report.failure_kind));
    }
    v.halted = true;
    v.halt_reason = why;
    ch.metrics.halted_peers[p.spec.peer_id] = why;
    trace(t, "halt channel=" + ch.spec.channel_id + " peer=" + p.spec.peer_id + " " + why);
  }

  void on_reconnect(const Event& ev) {
    SimPeer& p = peer(ev.peer_id);
    trace(ev.t, "reconnect peer=" + ev.peer_id);
    for (size_t ci = 0; ci < channels_.size(); ++ci) {
      SimChannel& ch = channels_[ci];
      auto vit = p.views.find(ch.spec.channel_id);
      if (vit == p.views.end()) continue;
      PeerChannelView& v = vit->second;
      if (v.halted) continue;
      const auto& canon = ch.runtime->chain().records();
      for (uint64_t bno = v.records.size(); bno < canon.size() && !v.halted; ++bno) {
        // catch-up pull straight from the ordering service's chain of record
        if (!v.buffered.count(bno)) v.buffered[bno] = canon[bno];
      }
      drain_buffer(ch, p, v, ev.t);
    }
  }

  ScenarioResult finalize() {
    ScenarioResult result;
    for (auto& ch : channels_) {
      ChannelMetrics& m = ch.metrics;
      m.blocks = ch.runtime->chain().height();
      m.orderer_drops = ch.runtime->ordering().drop_log().size();
      m.canonical_digest = to_hex(ledger::chain_digest(ch.runtime->chain().records()));
      m.elapsed_ms = ch.last_commit_t > ch.workload_start ? ch.last_commit_t - ch.workload_start
                                                          : 0;
      m.tps = fixed_point_tps(m.committed_valid + m.committed_invalid, m.elapsed_ms);
      std::sort(ch.latencies.begin(), ch.latencies.end());
      m.latency.p50_ms = percentile(ch.latencies, 50);
      m.latency.p95_ms = percentile(ch.latencies, 95);
      m.latency.p99_ms = percentile(ch.latencies, 99);
      for (const auto& member : ch.spec.members) {
        PeerChannelView& v = peer(member).views.at(ch.spec.channel_id);
        m.peer_digests[member] = to_hex(ledger::chain_digest(v.records));
        m.peer_exec_counts[member] = v.exec_count;      // zero under endorsement
        m.endorse_exec_counts[member] = v.endorse_execs;  // zero under order-execute
        result.peers[member][ch.spec.channel_id] = v.records;
      }
      result.canonical[ch.spec.channel_id] = ch.runtime->chain().records();
      result.members[ch.spec.channel_id] = ch.spec.members;
      result.metrics.channels[ch.spec.channel_id] = std::move(m);
    }
    result.trace = std::move(trace_);
    return result;
  }

  ScenarioConfig cfg_;
  Rng rng_;
  std::vector<SimPeer> peers_;
  std::map<std::string, size_t> peer_index_;
  std::deque<SimChannel> channels_;
  std::priority_queue<Event, std::vector<Event>, EventAfter> queue_;
  uint64_t next_seq_ = 0;
  std::vector<std::string> trace_;
};

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& cfg) { return Sim(cfg).run(); }

ScenarioResult run_order_execute_baseline(ScenarioConfig cfg) {
  for (auto& c : cfg.channels) c.pipeline = channel::Pipeline::ORDER_EXECUTE;
  return run_scenario(cfg);
}

IsolationReport assert_channel_isolation(const ScenarioResult& result) {
  IsolationReport report;
  auto scan_ledger = [&](const std::string& owner, const std::string& channel_id,
                         const std::vector<Bytes>& records) {
    for (const auto& r : records) {
      ledger::Block b = ledger::decode_block(r);
      for (const auto& env : b.transactions) {
        if (env.signed_proposal.proposal.channel_id != channel_id)
          report.violations.push_back(
              owner + ": block " + std::to_string(b.header.block_number) + " of channel " +
              channel_id + " holds an envelope for channel " +
              env.signed_proposal.proposal.channel_id);
      }
    }
  };
  for (const auto& [channel_id, records] : result.canonical)
    scan_ledger("orderer", channel_id, records);
  for (const auto& [peer_id, chans] : result.peers) {
    for (const auto& [channel_id, records] : chans) {
      auto mit = result.members.find(channel_id);
      bool member = mit != result.members.end() &&
                    std::find(mit->second.begin(), mit->second.end(), peer_id) !=
                        mit->second.end();
      if (!member && !records.empty())
        report.violations.push_back("peer " + peer_id + " holds " +
                                    std::to_string(records.size()) + " blocks of channel " +
                                    channel_id + " without being a member");
      scan_ledger("peer " + peer_id, channel_id, records);
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Metrics rendering
// ---------------------------------------------------------------------------

Bytes ScenarioMetrics::encode() const {
  cjson o = cjson::object();
  cjson chans = cjson::object();
  for (const auto& [id, m] : channels) {
    cjson c = cjson::object();
    c["blocks"] = m.blocks;
    c["committed_valid"] = m.committed_valid;
    c["committed_invalid"] = m.committed_invalid;
    cjson flags = cjson::object();
    for (const auto& [name, count] : m.invalid_flags) flags[name] = count;
    c["invalid_flags"] = std::move(flags);
    c["setup_committed"] = m.setup_committed;
    c["endorse_failed"] = m.endorse_failed;
    c["orderer_drops"] = m.orderer_drops;
    c["elapsed_ms"] = m.elapsed_ms;
    c["tps"] = m.tps;
    cjson lat = cjson::object();
    lat["p50_ms"] = m.latency.p50_ms;
    lat["p95_ms"] = m.latency.p95_ms;
    lat["p99_ms"] = m.latency.p99_ms;
    c["latency"] = std::move(lat);
    c["canonical_digest"] = m.canonical_digest;
    cjson digests = cjson::object();
    for (const auto& [peerid, hex] : m.peer_digests) digests[peerid] = hex;
    c["peer_digests"] = std::move(digests);
    cjson execs = cjson::object();
    for (const auto& [peerid, n] : m.peer_exec_counts) execs[peerid] = n;
    c["peer_exec_counts"] = std::move(execs);
    cjson endexecs = cjson::object();
    for (const auto& [peerid, n] : m.endorse_exec_counts) endexecs[peerid] = n;
    c["endorse_exec_counts"] = std::move(endexecs);
    cjson halts = cjson::object();
    for (const auto& [peerid, why] : m.halted_peers) halts[peerid] = why;
    c["halted_peers"] = std::move(halts);
    chans[id] = std::move(c);
  }
  o["channels"] = std::move(chans);
  return dump_canonical(o);
}

std::string render_metrics_table(const ScenarioMetrics& metrics) {
  std::ostringstream out;
  for (const auto& [id, m] : metrics.channels) {
    out << "channel " << id << "\n";
    out << "  blocks             " << m.blocks << "\n";
    out << "  committed valid    " << m.committed_valid << "\n";
    out << "  committed invalid  " << m.committed_invalid << "\n";
    for (const auto& [name, count] : m.invalid_flags)
      out << "    " << name << "  " << count << "\n";
    out << "  setup committed    " << m.setup_committed << "\n";
    out << "  endorse failed     " << m.endorse_failed << "\n";
    out << "  orderer drops      " << m.orderer_drops << "\n";
    out << "  elapsed (sim ms)   " << m.elapsed_ms << "\n";
    out << "  tps                " << m.tps << "\n";
    out << "  latency ms p50/p95/p99  " << m.latency.p50_ms << "/" << m.latency.p95_ms << "/"
        << m.latency.p99_ms << "\n";
    out << "  canonical digest   " << m.canonical_digest << "\n";
    for (const auto& [peerid, hex] : m.peer_digests) {
      out << "  peer " << peerid << "  " << hex
          << (hex == m.canonical_digest ? "  (match)" : "  (DIVERGED)") << "\n";
    }
    out << "  executions per peer (validate/endorse)";
    for (const auto& [peerid, n] : m.peer_exec_counts)
      out << "  " << peerid << ":" << n << "/" << m.endorse_exec_counts.at(peerid);
    out << "\n";
    for (const auto& [peerid, why] : m.halted_peers)
      out << "  halted " << peerid << ": " << why << "\n";
  }
  return out.str();
}

}  // namespace medusa::netsim
