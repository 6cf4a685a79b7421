#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "natgrad/state_space.hpp"

namespace natgrad {

enum class KernelFamily { Sigmoid, ExpFamily, TabularLogit };

const char* to_string(KernelFamily f);

/// Family tag plus the family-specific fixed data of a local kernel.
struct KernelSpec {
  KernelFamily family = KernelFamily::Sigmoid;
  /// ExpFamily only: one (parent configs x states) table per sufficient statistic.
  std::vector<Eigen::MatrixXd> statistics;

  static KernelSpec sigmoid() { return {KernelFamily::Sigmoid, {}}; }
  static KernelSpec tabular_logit() { return {KernelFamily::TabularLogit, {}}; }
  static KernelSpec exp_family(std::vector<Eigen::MatrixXd> stats) {
    return {KernelFamily::ExpFamily, std::move(stats)};
  }
};

/// The exponential-family form of a binary sigmoid kernel with
/// `parent_count` binary parents: statistics x_j x_r / 2 per parent and
/// -x_r / 2 for the threshold, so the parameter vector is shared verbatim.
KernelSpec sigmoid_as_exp_family(int parent_count);

/// A parametrised Markov kernel k(x_r | x_pa(r); theta) attached to one unit.
///
/// Parent configurations are indexed mixed-radix over `parents()` in the
/// given order, first parent most significant. The parameter block layout is
///   Sigmoid:      (w_1, ..., w_|pa|, threshold)
///   ExpFamily:    one natural parameter per statistic
///   TabularLogit: logit of (c, s) at c * cardinality + s
class Kernel {
 public:
  Kernel(int unit, std::vector<int> parents, KernelSpec spec, const StateSpace& space);

  int unit() const { return unit_; }
  const std::vector<int>& parents() const { return parents_; }
  KernelFamily family() const { return spec_.family; }
  const KernelSpec& spec() const { return spec_; }
  int cardinality() const { return card_; }
  std::int64_t parent_configs() const { return indexer_.count(); }
  int dim() const { return dim_; }

  std::int64_t parent_index(const Config& full) const { return indexer_(full); }

  /// ln k(s | c) for every state s.
  Eigen::VectorXd log_probs(std::int64_t c, const Eigen::Ref<const Eigen::VectorXd>& theta) const;
  Eigen::VectorXd probs(std::int64_t c, const Eigen::Ref<const Eigen::VectorXd>& theta) const;

  /// d ln k(s | c) / d theta.
  Eigen::VectorXd log_grad(std::int64_t c, int s, const Eigen::Ref<const Eigen::VectorXd>& theta) const;

  /// Row s holds d ln k(s | c) / d theta.
  Eigen::MatrixXd log_grads(std::int64_t c, const Eigen::Ref<const Eigen::VectorXd>& theta) const;

  /// Local field h = sum_j w_j x_j - threshold of a sigmoid kernel.
  double field(std::int64_t c, const Eigen::Ref<const Eigen::VectorXd>& theta) const;

  /// Spin of parent number j under parent configuration c (binary parents).
  int parent_spin(std::int64_t c, int j) const {
    return 2 * static_cast<int>((c >> (parents_.size() - 1 - j)) & 1) - 1;
  }

 private:
  int unit_;
  std::vector<int> parents_;
  KernelSpec spec_;
  int card_;
  int dim_;
  SubsetIndexer indexer_;
};

/// Numerically stable ln(1 + e^t).
inline double softplus(double t) {
  return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

/// 1 / (1 + e^-t) without overflow.
inline double logistic(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace natgrad
