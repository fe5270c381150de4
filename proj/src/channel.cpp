#include "medusa/channel.hpp"

#include <set>

#include "medusa/canonical.hpp"
#include "medusa/errors.hpp"

namespace medusa::channel {

std::string_view pipeline_name(Pipeline p) {
  return p == Pipeline::EOV ? "eov" : "order_execute";
}

Pipeline pipeline_from_name(std::string_view name) {
  if (name == "eov") return Pipeline::EOV;
  if (name == "order_execute") return Pipeline::ORDER_EXECUTE;
  raise(ErrorCode::DecodeError, "unknown pipeline: " + std::string(name));
}

std::vector<const PeerInfo*> ChannelConfig::endorsers() const {
  std::vector<const PeerInfo*> out;
  for (const auto& p : peers)
    if (p.endorser) out.push_back(&p);
  return out;
}

const PeerInfo* ChannelConfig::find_peer(std::string_view peer_id) const {
  for (const auto& p : peers)
    if (p.peer_id == peer_id) return &p;
  return nullptr;
}

bool ChannelConfig::is_member(std::string_view peer_id) const { return find_peer(peer_id) != nullptr; }

void validate_channel_config(const ChannelConfig& cfg) {
  if (cfg.channel_id.empty()) raise(ErrorCode::InvalidConfig, "channel_id must not be empty");
  for (char c : cfg.channel_id) {
    if (static_cast<unsigned char>(c) < 0x21 || c == '/')
      raise(ErrorCode::InvalidConfig, "channel_id must not contain spaces, slashes or control characters");
  }
  if (cfg.peers.empty()) raise(ErrorCode::InvalidConfig, "channel needs at least one peer");
  std::set<std::string> ids;
  for (const auto& p : cfg.peers) {
    if (p.peer_id.empty()) raise(ErrorCode::InvalidConfig, "peer_id must not be empty");
    if (!ids.insert(p.peer_id).second)
      raise(ErrorCode::InvalidConfig, "duplicate peer: " + p.peer_id);
  }
  size_t n_endorsers = cfg.endorsers().size();
  if (cfg.policy_k < 1 || cfg.policy_k > n_endorsers)
    raise(ErrorCode::InvalidPolicy, "endorsement policy k must be in [1, endorser count]");
  if (cfg.max_block_txs < 1) raise(ErrorCode::InvalidConfig, "max_block_txs must be >= 1");
}

Bytes encode_channel_config(const ChannelConfig& cfg) {
  cjson o = cjson::object();
  o["channel_id"] = cfg.channel_id;
  o["pipeline"] = std::string(pipeline_name(cfg.pipeline));
  o["orderer_public_key"] = to_hex(cfg.orderer_public_key);
  o["policy_k"] = cfg.policy_k;
  o["max_block_txs"] = cfg.max_block_txs;
  o["max_wait_ms"] = cfg.max_wait_ms;
  cjson peers = cjson::array();
  for (const auto& p : cfg.peers) {
    cjson po = cjson::object();
    po["peer_id"] = p.peer_id;
    po["public_key"] = to_hex(p.public_key);
    po["endorser"] = p.endorser;
    peers.push_back(std::move(po));
  }
  o["peers"] = std::move(peers);
  return dump_canonical(o);
}

ChannelConfig decode_channel_config(std::string_view bytes) {
  cjson o = parse_canonical(bytes);
  check_exact_keys(o, {"channel_id", "pipeline", "orderer_public_key", "policy_k", "max_block_txs",
                       "max_wait_ms", "peers"});
  ChannelConfig cfg;
  cfg.channel_id = need_string(o, "channel_id");
  cfg.pipeline = pipeline_from_name(need_string(o, "pipeline"));
  cfg.orderer_public_key = array_from_hex<32>(need_string(o, "orderer_public_key"));
  cfg.policy_k = need_u32(o, "policy_k");
  cfg.max_block_txs = need_u32(o, "max_block_txs");
  cfg.max_wait_ms = need_u64(o, "max_wait_ms");
  for (const cjson& po : need_array(o, "peers")) {
    check_exact_keys(po, {"peer_id", "public_key", "endorser"});
    PeerInfo p;
    p.peer_id = need_string(po, "peer_id");
    p.public_key = array_from_hex<32>(need_string(po, "public_key"));
    p.endorser = need_bool(po, "endorser");
    cfg.peers.push_back(std::move(p));
  }
  validate_channel_config(cfg);
  return cfg;
}

}  // namespace medusa::channel
