#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "natgrad/kernel.hpp"
#include "natgrad/random.hpp"
#include "natgrad/state_space.hpp"

namespace natgrad {

/// Directed graph given by ordered parent lists.
struct Dag {
  std::vector<std::vector<int>> parents;

  int node_count() const { return static_cast<int>(parents.size()); }
  std::vector<std::vector<int>> children() const;
};

/// Topological order with ties broken by ascending node index.
/// Throws CycleError if the graph has a directed cycle.
std::vector<int> validate_dag(const Dag& dag);

using ParamVector = Eigen::VectorXd;

/// Dense probability vector over the configurations of `units`, indexed
/// mixed-radix with the first unit most significant.
struct JointTable {
  std::vector<int> units;
  std::vector<int> cards;
  Eigen::VectorXd p;

  std::int64_t size() const { return p.size(); }
  /// Index of a sub-configuration aligned with `units`.
  std::int64_t index(const Config& sub) const;
  Config config(std::int64_t index) const;
};

class DagModel {
 public:
  DagModel(StateSpace space, Dag dag, std::vector<KernelSpec> specs);

  const StateSpace& space() const { return space_; }
  const Dag& dag() const { return dag_; }
  const std::vector<int>& order() const { return order_; }
  const std::vector<std::vector<int>>& children() const { return children_; }
  int node_count() const { return dag_.node_count(); }
  const Kernel& kernel(int r) const { return kernels_.at(r); }

  int dim() const { return dim_; }
  int offset(int r) const { return offsets_.at(r); }
  int block_dim(int r) const { return kernels_.at(r).dim(); }
  /// Flat index of parameter i in the block of node r.
  int flat_index(int r, int i) const;

  auto block(const ParamVector& params, int r) const {
    return params.segment(offsets_.at(r), kernels_.at(r).dim());
  }
  auto block(ParamVector& params, int r) const {
    return params.segment(offsets_.at(r), kernels_.at(r).dim());
  }

  void check_params(const ParamVector& params) const;

 private:
  StateSpace space_;
  Dag dag_;
  std::vector<int> order_;
  std::vector<std::vector<int>> children_;
  std::vector<Kernel> kernels_;
  std::vector<int> offsets_;
  int dim_ = 0;
};

/// k^r(state | parent_config); `parent_config` is aligned with pa(r).
double kernel_prob(const DagModel& model, int r, const Config& parent_config, int state,
                   const ParamVector& params);

/// d ln k^r / d xi_r, length d_r.
Eigen::VectorXd kernel_log_grad(const DagModel& model, int r, const Config& parent_config,
                                int state, const ParamVector& params);

/// ln k^r as a (parent configs x states) table.
Eigen::MatrixXd kernel_log_table(const DagModel& model, int r, const ParamVector& params);

double log_joint(const DagModel& model, const ParamVector& params, const Config& full);

/// Joint distribution over all units, in unit order.
JointTable joint_table(const DagModel& model, const ParamVector& params);

/// Sums out every unit not in `subset`; the result follows `subset` order.
JointTable marginal(const JointTable& table, std::span<const int> subset);

/// Distribution over `target` given the states `given_states` of `given_units`.
JointTable conditional(const JointTable& table, std::span<const int> target,
                       std::span<const int> given_units, const Config& given_states);

Config ancestral_sample(const DagModel& model, const ParamVector& params, Rng& rng);

JointTable visible_marginal(const DagModel& model, const ParamVector& params);

/// d ln p(x; xi) / d xi at a single joint configuration.
Eigen::VectorXd log_joint_grad(const DagModel& model, const ParamVector& params, const Config& full);

/// Row x holds d ln p(x; xi) / d xi for every joint configuration x.
Eigen::MatrixXd joint_scores(const DagModel& model, const ParamVector& params);

/// Weights, logits and natural parameters uniform in [lo, hi]; sigmoid thresholds 0.
ParamVector init_params(const DagModel& model, Rng& rng, double lo = -0.5, double hi = 0.5);

/// Every coordinate uniform in [lo, hi], thresholds included.
ParamVector random_params(const DagModel& model, Rng& rng, double lo, double hi);

}  // namespace natgrad
