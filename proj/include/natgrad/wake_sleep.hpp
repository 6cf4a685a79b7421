#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "natgrad/dag_model.hpp"
#include "natgrad/fisher.hpp"
#include "natgrad/objective.hpp"

namespace natgrad {

/// Recognition model q(x_H | x_V; eta) = prod_r l^r(x_r | x_pa'(r); eta_r)
/// over the hidden units, with pa'(r) drawn from V u H.
class RecognitionModel {
 public:
  /// `parents[k]` and `specs[k]` belong to space.hidden()[k].
  RecognitionModel(const StateSpace& space, std::vector<std::vector<int>> parents,
                   std::vector<KernelSpec> specs);

  /// Tabular kernels with pa'(r) = V plus every earlier hidden unit.
  static RecognitionModel full_tabular(const StateSpace& space);
  /// Tabular kernels with pa'(r) = V.
  static RecognitionModel factorised_tabular(const StateSpace& space);

  const StateSpace& space() const { return space_; }
  int hidden_count() const { return static_cast<int>(kernels_.size()); }
  /// Kernel of the k-th hidden unit.
  const Kernel& kernel(int k) const { return kernels_.at(k); }
  /// Hidden positions in sampling order.
  const std::vector<int>& order() const { return order_; }
  int dim() const { return dim_; }
  int offset(int k) const { return offsets_.at(k); }

  auto block(const Eigen::VectorXd& eta, int k) const {
    return eta.segment(offsets_.at(k), kernels_.at(k).dim());
  }
  auto block(Eigen::VectorXd& eta, int k) const {
    return eta.segment(offsets_.at(k), kernels_.at(k).dim());
  }
  void check_params(const Eigen::VectorXd& eta) const;

  /// ln q(x_H | x_V) at a full configuration.
  double log_q(const Eigen::VectorXd& eta, const Config& full) const;
  Eigen::VectorXd log_q_grad(const Eigen::VectorXd& eta, const Config& full) const;
  /// Fills the hidden units of `full` by ancestral sampling given its visible units.
  void sample_hidden(const Eigen::VectorXd& eta, Config& full, Rng& rng) const;

 private:
  StateSpace space_;
  std::vector<Kernel> kernels_;
  std::vector<int> order_;
  std::vector<int> offsets_;
  int dim_ = 0;
};

Eigen::VectorXd init_recognition_params(const RecognitionModel& recog, Rng& rng, double lo = -0.5,
                                        double hi = 0.5);

/// q(. | x_V) over space().hidden().
JointTable recog_conditional(const RecognitionModel& recog, const Eigen::VectorXd& eta, const Config& x_v);

/// ln q(x_H | x_V) for every joint configuration.
Eigen::VectorXd recog_log_table(const RecognitionModel& recog, const Eigen::VectorXd& eta);
/// Row x holds d ln q(x_H | x_V) / d eta.
Eigen::MatrixXd recog_scores(const RecognitionModel& recog, const Eigen::VectorXd& eta);

/// sum_x p(x; xi) ln [p(x_H | x_V; xi) / q(x_H | x_V; eta)].
double recognition_gap(const DagModel& model, const ParamVector& xi, const RecognitionModel& recog,
                       const Eigen::VectorXd& eta);

/// -E_{q*}[d ln p / d xi] with q*(x) = p*(x_V) q(x_H | x_V; eta).
ParamVector wake_gradient(const DagModel& model, const ParamVector& xi, const RecognitionModel& recog,
                          const Eigen::VectorXd& eta, const JointTable& target);
MCGradient wake_gradient_mc(const DagModel& model, const ParamVector& xi, const RecognitionModel& recog,
                            const Eigen::VectorXd& eta, const JointTable& target, int n_samples, Rng& rng);

/// -E_{p_xi}[d ln q / d eta]; the target plays no part.
Eigen::VectorXd sleep_gradient(const DagModel& model, const ParamVector& xi, const RecognitionModel& recog,
                               const Eigen::VectorXd& eta);
MCGradient sleep_gradient_mc(const DagModel& model, const ParamVector& xi, const RecognitionModel& recog,
                             const Eigen::VectorXd& eta, int n_samples, Rng& rng);

/// Logits ln p(x_r | x_pa'(r); xi) for tabular recognition kernels. Throws
/// RepresentabilityError if the resulting gap exceeds 1e-8.
Eigen::VectorXd exact_posterior_fit(const DagModel& model, const ParamVector& xi,
                                    const RecognitionModel& recog);

/// Per hidden unit, the recognition kernel's Fisher averaged over p(x_pa'(r); xi).
BlockMatrix recognition_block_fisher(const DagModel& model, const ParamVector& xi,
                                     const RecognitionModel& recog, const Eigen::VectorXd& eta);

struct WakeSleepSchedule {
  int k_sleep = 25;  ///< sleep steps per wake step
  double step_xi = 0.05;
  double step_eta = 0.05;
  int iters = 2000;  ///< wake steps
  bool natural = false;
  double pinv_rel_tol = kPinvRelTol;
  /// Ends a sleep phase early once the gap falls below this value.
  std::optional<double> gap_threshold = 1e-8;
  /// Replace each sleep phase by the exact posterior fit.
  bool exact_sleep = false;
  ExpectationMode mode = ExpectationMode::Exact;
  int n_samples = 100;
  std::uint64_t seed = 0;
};

void validate(const WakeSleepSchedule& s);

struct WakeSleepRow {
  int iter = 0;
  double E = 0.0;
  double gap = 0.0;
  double grad_xi_norm = 0.0;
  double grad_eta_norm = 0.0;
};

struct WakeSleepResult {
  std::vector<WakeSleepRow> rows;
  ParamVector xi;
  Eigen::VectorXd eta;
};

/// Each iteration runs a sleep phase on eta, then one wake step on xi.
/// Row 0 describes the starting point; row t the state after t iterations.
WakeSleepResult wake_sleep_train(const DagModel& model, const ParamVector& xi0, const RecognitionModel& recog,
                                 const Eigen::VectorXd& eta0, const JointTable& target,
                                 const WakeSleepSchedule& schedule);

}  // namespace natgrad
