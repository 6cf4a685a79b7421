#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace natgrad {

inline constexpr std::int64_t kDefaultConfigCap = std::int64_t{1} << 26;

/// A configuration: one state index per unit (or per unit of a subset).
/// Binary units use index 0 for the state -1 and index 1 for +1.
struct Config {
  std::vector<int> states;

  bool operator==(const Config&) const = default;
  std::size_t size() const { return states.size(); }
  int operator[](std::size_t i) const { return states[i]; }
  int& operator[](std::size_t i) { return states[i]; }
};

/// Maps a binary state index to its spin value in {-1, +1}.
inline int spin(int state) { return 2 * state - 1; }

/// Finite product space of units with a visible/hidden split.
class StateSpace {
 public:
  StateSpace(std::vector<int> cardinalities, std::vector<int> visible,
             std::int64_t cap = kDefaultConfigCap);

  /// All-binary space with the given visible units.
  static StateSpace binary(int unit_count, std::vector<int> visible);

  int unit_count() const { return static_cast<int>(cards_.size()); }
  int cardinality(int unit) const;
  const std::vector<int>& cardinalities() const { return cards_; }
  const std::vector<int>& visible() const { return visible_; }
  const std::vector<int>& hidden() const { return hidden_; }
  bool is_visible(int unit) const;
  std::vector<int> all_units() const;
  std::int64_t total_configs() const { return total_; }
  std::int64_t cap() const { return cap_; }

 private:
  std::vector<int> cards_;
  std::vector<int> visible_;
  std::vector<int> hidden_;
  std::int64_t total_ = 1;
  std::int64_t cap_;
};

/// Product of cardinalities over `subset`; the empty subset has one configuration.
std::int64_t config_count(const StateSpace& space, std::span<const int> subset);

/// Mixed-radix index of a sub-configuration (one state per entry of
/// `subset`), first unit most significant.
std::int64_t config_to_index(const StateSpace& space, std::span<const int> subset,
                             const Config& sub);

Config index_to_config(const StateSpace& space, std::span<const int> subset,
                       std::int64_t index);

/// Sub-configuration of a full configuration on `subset`, in subset order.
Config restrict(const Config& full, std::span<const int> subset);

/// All configurations of `subset` in index order.
std::vector<Config> enumerate_configs(const StateSpace& space, std::span<const int> subset);

/// Precomputed strides for reading the index of a subset straight out of a
/// full configuration.
class SubsetIndexer {
 public:
  SubsetIndexer() = default;
  SubsetIndexer(const StateSpace& space, std::span<const int> subset);

  std::int64_t operator()(const Config& full) const {
    std::int64_t idx = 0;
    for (std::size_t k = 0; k < units_.size(); ++k) idx += full.states[units_[k]] * strides_[k];
    return idx;
  }
  std::int64_t count() const { return count_; }
  const std::vector<int>& units() const { return units_; }

 private:
  std::vector<int> units_;
  std::vector<std::int64_t> strides_;
  std::int64_t count_ = 1;
};

/// Advances `config` (restricted to `units`) to the next configuration in
/// index order. Returns false after wrapping around to all zeros.
bool next_config(Config& config, std::span<const int> units, const StateSpace& space);

}  // namespace natgrad
