#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "natgrad/dag_model.hpp"
#include "natgrad/family.hpp"
#include "natgrad/linalg.hpp"
#include "natgrad/random.hpp"

namespace natgrad {

/// Symmetric block-diagonal matrix with one block per node, laid out in
/// `nodes` order.
struct BlockMatrix {
  std::vector<int> nodes;
  std::vector<Eigen::MatrixXd> blocks;

  int dim() const;
  std::vector<int> offsets() const;
  Eigen::MatrixXd dense() const;
  /// Block of the given node.
  const Eigen::MatrixXd& block_of(int node) const;
};

/// Local Fisher block of node r: sum over parent configs of p(x_pa) times
/// the kernel's own Fisher matrix.
Eigen::MatrixXd local_fisher_block(const DagModel& model, const ParamVector& params, int r);
Eigen::MatrixXd local_fisher_block(const DagModel& model, const ParamVector& params, int r,
                                   const JointTable& joint);

/// Blocks in topological order, matching the parameter layout.
BlockMatrix block_fisher(const DagModel& model, const ParamVector& params);

/// S^T diag(p) S by direct summation over the family's support.
Eigen::MatrixXd full_fisher_oracle(const ParametrisedFamily& family, const Eigen::VectorXd& params);
Eigen::MatrixXd full_fisher_oracle(const Eigen::VectorXd& p, const Eigen::MatrixXd& scores);
/// Enumerated joint Fisher of a DAG model.
Eigen::MatrixXd full_fisher_oracle(const DagModel& model, const ParamVector& params);

/// The joint distribution of a DAG model as a family over all configurations.
ParametrisedFamily joint_family(const DagModel& model);

/// Mixture over p(x_pa) of conditional covariances of the statistics.
/// Sigmoid nodes are handled through their exponential-family rewriting.
Eigen::MatrixXd expfam_fisher_block(const DagModel& model, const ParamVector& params, int r);

/// Cov(X_i X_j, X_k X_l) under p(v, h) ~ exp(sum W_ij v_i h_j), spins +-1.
/// Statistic (i, j) sits at index i * hidden_count + j.
Eigen::MatrixXd rbm_joint_fisher(int visible_count, int hidden_count, const Eigen::MatrixXd& w);

/// Largest entry outside the blocks when the pair statistics are grouped by
/// hidden unit (by_hidden) or by visible unit.
double rbm_off_block_max(const Eigen::MatrixXd& g, int visible_count, int hidden_count, bool by_hidden);

BlockMatrix block_pseudoinverse(const BlockMatrix& bm, double rel_tol = kPinvRelTol);

struct SparsityReport {
  std::int64_t total = 0;
  std::int64_t zeros = 0;
  std::int64_t nonzeros = 0;
  /// Nonzero count inside each diagonal block, when block sizes were given.
  std::vector<std::int64_t> per_block;
};

SparsityReport sparsity_report(const Eigen::MatrixXd& m, double abs_tol = 1e-10,
                               const std::vector<int>& block_sizes = {});

/// Parameter indices of the model, optionally restricted to sigmoid weights.
std::vector<int> weight_indices(const DagModel& model, bool weights_only);

/// Zeros of the enumerated Fisher that persist across `draws` random
/// parameter draws (uniform in [-1, 1]).
struct StructuralZeroReport {
  std::vector<int> indices;  ///< parameters kept in the count
  Eigen::MatrixXd max_abs;   ///< entrywise max |g| over the draws
  SparsityReport report;
};

StructuralZeroReport structural_zero_report(const DagModel& model, Rng& rng, int draws = 5,
                                            double abs_tol = 1e-10, bool weights_only = true);

/// Closed-form nonzero counts for l layers of n units: shallow l^2 n^3,
/// deep l n^3, each out of (l n^2)^2 weight pairs.
struct LayeredPrediction {
  int n = 0;
  int l = 0;
  std::int64_t entries = 0;
  std::int64_t shallow_nonzeros = 0;
  std::int64_t deep_nonzeros = 0;
  std::int64_t shallow_zeros = 0;
  std::int64_t deep_zeros = 0;
  std::int64_t zero_difference = 0;
};

LayeredPrediction layered_prediction(int n, int l);

}  // namespace natgrad
