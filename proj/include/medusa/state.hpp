#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "medusa/bytes.hpp"

namespace medusa::state {

// Version of a committed write: position of the transaction that set the key.
struct Version {
  uint64_t block = 0;
  uint32_t tx = 0;

  friend bool operator==(const Version&, const Version&) = default;
  friend auto operator<=>(const Version&, const Version&) = default;
};

struct Entry {
  Bytes value;
  Version version;

  friend bool operator==(const Entry&, const Entry&) = default;
};

using WorldState = std::map<std::string, Entry>;

// Read-only view over key/value state. Iteration is always in key order.
class StateView {
 public:
  virtual ~StateView() = default;
  virtual std::optional<Entry> get(std::string_view key) const = 0;
  virtual void for_each_prefix(std::string_view prefix,
                               const std::function<void(const std::string&, const Entry&)>& fn) const = 0;
};

class MapStateView final : public StateView {
 public:
  explicit MapStateView(const WorldState& map) : map_(&map) {}
  std::optional<Entry> get(std::string_view key) const override;
  void for_each_prefix(std::string_view prefix,
                       const std::function<void(const std::string&, const Entry&)>& fn) const override;

 private:
  const WorldState* map_;
};

// Base view plus an uncommitted delta; used for intra-block validation where
// later transactions must see earlier valid writes.
class OverlayStateView final : public StateView {
 public:
  explicit OverlayStateView(const StateView& base) : base_(&base) {}

  void put(const std::string& key, Entry entry) { delta_[key] = std::move(entry); }
  const WorldState& delta() const { return delta_; }

  std::optional<Entry> get(std::string_view key) const override;
  void for_each_prefix(std::string_view prefix,
                       const std::function<void(const std::string&, const Entry&)>& fn) const override;

 private:
  const StateView* base_;
  WorldState delta_;
};

// Digest over the canonical serialization of the full map; equal digests mean
// byte-equal values and equal versions for every key.
Digest32 state_digest(const WorldState& state);

}  // namespace medusa::state
