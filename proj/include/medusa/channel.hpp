#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "medusa/bytes.hpp"
#include "medusa/identity.hpp"

namespace medusa::channel {

enum class Pipeline { EOV, ORDER_EXECUTE };

std::string_view pipeline_name(Pipeline p);
Pipeline pipeline_from_name(std::string_view name);

struct PeerInfo {
  std::string peer_id;
  identity::PublicKey public_key{};
  bool endorser = true;

  friend bool operator==(const PeerInfo&, const PeerInfo&) = default;
};

// The channel configuration committed in the genesis block. Membership and
// policy are on-chain so they are themselves tamper-evident.
struct ChannelConfig {
  std::string channel_id;
  Pipeline pipeline = Pipeline::EOV;
  identity::PublicKey orderer_public_key{};
  uint32_t policy_k = 1;  // k-of-n over the endorser peers
  uint32_t max_block_txs = 10;
  uint64_t max_wait_ms = 50;
  std::vector<PeerInfo> peers;

  std::vector<const PeerInfo*> endorsers() const;
  const PeerInfo* find_peer(std::string_view peer_id) const;
  bool is_member(std::string_view peer_id) const;

  friend bool operator==(const ChannelConfig&, const ChannelConfig&) = default;
};

// Throws InvalidPolicy when k < 1 or k exceeds the endorser count, and
// InvalidConfig on structural problems (empty id, duplicate peers, ...).
void validate_channel_config(const ChannelConfig& cfg);

Bytes encode_channel_config(const ChannelConfig& cfg);
ChannelConfig decode_channel_config(std::string_view bytes);

inline const char* channel_config_key() { return "sys:channel"; }

}  // namespace medusa::channel
