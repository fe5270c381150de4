#include "medusa/state.hpp"

#include "medusa/canonical.hpp"
#include "medusa/sha256.hpp"

namespace medusa::state {

static bool starts_with(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && s.compare(0, prefix.size(), prefix) == 0;
}

std::optional<Entry> MapStateView::get(std::string_view key) const {
  auto it = map_->find(std::string(key));
  if (it == map_->end()) return std::nullopt;
  return it->second;
}

void MapStateView::for_each_prefix(
    std::string_view prefix, const std::function<void(const std::string&, const Entry&)>& fn) const {
  for (auto it = map_->lower_bound(std::string(prefix)); it != map_->end(); ++it) {
    if (!starts_with(it->first, prefix)) break;
    fn(it->first, it->second);
  }
}

std::optional<Entry> OverlayStateView::get(std::string_view key) const {
  auto it = delta_.find(std::string(key));
  if (it != delta_.end()) return it->second;
  return base_->get(key);
}

void OverlayStateView::for_each_prefix(
    std::string_view prefix, const std::function<void(const std::string&, const Entry&)>& fn) const {
  // merge two key-ordered sequences, delta wins on ties
  auto dit = delta_.lower_bound(std::string(prefix));
  std::vector<std::pair<std::string, Entry>> base_rows;
  base_->for_each_prefix(prefix, [&](const std::string& k, const Entry& e) {
    if (delta_.find(k) == delta_.end()) base_rows.emplace_back(k, e);
  });
  size_t bi = 0;
  while (dit != delta_.end() && starts_with(dit->first, prefix) && bi < base_rows.size()) {
    if (base_rows[bi].first < dit->first) {
      fn(base_rows[bi].first, base_rows[bi].second);
      ++bi;
    } else {
      fn(dit->first, dit->second);
      ++dit;
    }
  }
  for (; bi < base_rows.size(); ++bi) fn(base_rows[bi].first, base_rows[bi].second);
  for (; dit != delta_.end() && starts_with(dit->first, prefix); ++dit) fn(dit->first, dit->second);
}

Digest32 state_digest(const WorldState& state) {
  Sha256 h;
  for (const auto& [key, entry] : state) {
    cjson row = cjson::object();
    row["key"] = key;
    row["value"] = to_hex(entry.value);
    row["version"] = cjson::array({entry.version.block, entry.version.tx});
    std::string line = dump_canonical(row);
    line.push_back('\n');
    h.update(line);
  }
  return h.finish();
}

}  // namespace medusa::state
