#include "natgrad/state_space.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

#include "natgrad/errors.hpp"

namespace natgrad {

namespace {

void check_subset(const StateSpace& space, std::span<const int> subset) {
  std::vector<char> seen(space.unit_count(), 0);
  for (int u : subset) {
    if (u < 0 || u >= space.unit_count())
      throw std::out_of_range("unknown unit index " + std::to_string(u));
    if (seen[u]) throw std::invalid_argument("duplicate unit " + std::to_string(u) + " in subset");
    seen[u] = 1;
  }
}

}  // namespace

StateSpace::StateSpace(std::vector<int> cardinalities, std::vector<int> visible,
                       std::int64_t cap)
    : cards_(std::move(cardinalities)), visible_(std::move(visible)), cap_(cap) {
  if (cards_.empty()) throw std::invalid_argument("state space needs at least one unit");
  for (int c : cards_)
    if (c < 2) throw std::invalid_argument("unit cardinality must be >= 2");

  std::vector<char> vis(cards_.size(), 0);
  for (int v : visible_) {
    if (v < 0 || v >= unit_count())
      throw std::out_of_range("visible unit " + std::to_string(v) + " out of range");
    if (vis[v]) throw std::invalid_argument("duplicate visible unit " + std::to_string(v));
    vis[v] = 1;
  }
  std::sort(visible_.begin(), visible_.end());
  for (int u = 0; u < unit_count(); ++u)
    if (!vis[u]) hidden_.push_back(u);

  for (int c : cards_) {
    if (total_ > cap_ / c)
      throw CapacityError("joint configuration count exceeds cap of " + std::to_string(cap_));
    total_ *= c;
  }
}

StateSpace StateSpace::binary(int unit_count, std::vector<int> visible) {
  return StateSpace(std::vector<int>(unit_count, 2), std::move(visible));
}

int StateSpace::cardinality(int unit) const {
  if (unit < 0 || unit >= unit_count())
    throw std::out_of_range("unknown unit index " + std::to_string(unit));
  return cards_[unit];
}

bool StateSpace::is_visible(int unit) const {
  return std::binary_search(visible_.begin(), visible_.end(), unit);
}

std::vector<int> StateSpace::all_units() const {
  std::vector<int> u(cards_.size());
  std::iota(u.begin(), u.end(), 0);
  return u;
}

std::int64_t config_count(const StateSpace& space, std::span<const int> subset) {
  check_subset(space, subset);
  std::int64_t n = 1;
  for (int u : subset) n *= space.cardinality(u);
  return n;
}

std::int64_t config_to_index(const StateSpace& space, std::span<const int> subset,
                             const Config& sub) {
  check_subset(space, subset);
  if (sub.size() != subset.size())
    throw std::invalid_argument("configuration does not cover the subset");
  std::int64_t idx = 0;
  for (std::size_t k = 0; k < subset.size(); ++k) {
    const int card = space.cardinality(subset[k]);
    if (sub[k] < 0 || sub[k] >= card)
      throw std::out_of_range("state " + std::to_string(sub[k]) + " out of range for unit " +
                              std::to_string(subset[k]));
    idx = idx * card + sub[k];
  }
  return idx;
}

Config index_to_config(const StateSpace& space, std::span<const int> subset,
                       std::int64_t index) {
  const std::int64_t n = config_count(space, subset);
  if (index < 0 || index >= n)
    throw std::out_of_range("configuration index " + std::to_string(index) + " out of range");
  Config c{std::vector<int>(subset.size())};
  for (std::size_t k = subset.size(); k-- > 0;) {
    const int card = space.cardinality(subset[k]);
    c[k] = static_cast<int>(index % card);
    index /= card;
  }
  return c;
}

Config restrict(const Config& full, std::span<const int> subset) {
  Config out{std::vector<int>(subset.size())};
  for (std::size_t k = 0; k < subset.size(); ++k) {
    if (subset[k] < 0 || static_cast<std::size_t>(subset[k]) >= full.size())
      throw std::out_of_range("unit " + std::to_string(subset[k]) + " not in configuration");
    out[k] = full[subset[k]];
  }
  return out;
}

std::vector<Config> enumerate_configs(const StateSpace& space, std::span<const int> subset) {
  const std::int64_t n = config_count(space, subset);
  std::vector<Config> out;
  out.reserve(static_cast<std::size_t>(n));
  Config c{std::vector<int>(subset.size(), 0)};
  for (std::int64_t i = 0; i < n; ++i) {
    out.push_back(c);
    for (std::size_t k = subset.size(); k-- > 0;) {
      if (++c[k] < space.cardinality(subset[k])) break;
      c[k] = 0;
    }
  }
  return out;
}

SubsetIndexer::SubsetIndexer(const StateSpace& space, std::span<const int> subset)
    : units_(subset.begin(), subset.end()), strides_(subset.size()) {
  check_subset(space, subset);
  for (std::size_t k = units_.size(); k-- > 0;) {
    strides_[k] = count_;
    count_ *= space.cardinality(units_[k]);
  }
}

bool next_config(Config& config, std::span<const int> units, const StateSpace& space) {
  for (std::size_t k = units.size(); k-- > 0;) {
    const int u = units[k];
    if (++config.states[u] < space.cardinality(u)) return true;
    config.states[u] = 0;
  }
  return false;
}

}  // namespace natgrad
