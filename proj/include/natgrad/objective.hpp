#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "natgrad/dag_model.hpp"
#include "natgrad/fisher.hpp"
#include "natgrad/random.hpp"
#include "natgrad/sampler.hpp"

namespace natgrad {

/// sum p ln(p / q); zero entries of p contribute nothing.
double kl_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q);
double kl_divergence(const JointTable& p, const JointTable& q);

/// Checks that `target` is a normalised table over the visible units.
void check_target(const DagModel& model, const JointTable& target);

/// E = D(p* || p_V).
double objective(const DagModel& model, const ParamVector& params, const JointTable& target);

/// p*(x_V) p(x_H | x_V; xi) over all joint configurations.
Eigen::VectorXd target_posterior_table(const DagModel& model, const ParamVector& params,
                                       const JointTable& target);

ParamVector euclidean_grad_exact(const DagModel& model, const ParamVector& params,
                                 const JointTable& target);

/// Draws full configurations with x_V ~ p* and x_H ~ p(. | x_V).
using PosteriorSampler = std::function<Config(Rng&)>;

PosteriorSampler make_exact_posterior_sampler(const DagModel& model, const ParamVector& params,
                                              const JointTable& target);

struct MCGradient {
  ParamVector value;
  ParamVector std_error;
};

/// Sample mean of -d ln p(x; xi) over n posterior draws.
MCGradient euclidean_grad_mc(const DagModel& model, const ParamVector& params,
                             const PosteriorSampler& sampler, int n_samples, Rng& rng);

/// Blockwise G_r^+ grad_r.
ParamVector natural_direction(const DagModel& model, const ParamVector& params, const ParamVector& grad,
                              double pinv_rel_tol = kPinvRelTol);

ParamVector natural_grad(const DagModel& model, const ParamVector& params, const JointTable& target,
                         double pinv_rel_tol = kPinvRelTol);

enum class GradMode { Euclidean, Natural };
enum class ExpectationMode { Exact, MonteCarlo };
enum class PosteriorSamplerKind { Exact, Gibbs };

struct TrainConfig {
  double step = 0.05;
  int max_iters = 5000;
  GradMode grad_mode = GradMode::Euclidean;
  ExpectationMode expectation = ExpectationMode::Exact;
  int n_samples = 100;
  PosteriorSamplerKind sampler = PosteriorSamplerKind::Gibbs;
  GibbsConfig gibbs;
  double pinv_rel_tol = kPinvRelTol;
  double stop_tol = 1e-8;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& cfg);

struct TrainRow {
  int iter = 0;
  double E = 0.0;
  double grad_norm = 0.0;  ///< Euclidean norm of the (estimated) gradient
};

struct Trajectory {
  std::vector<TrainRow> rows;
  std::vector<ParamVector> params;  ///< one per row
  bool converged = false;
};

/// Fixed-step descent. Row 0 is the starting point; stops after max_iters
/// steps or when the gradient norm drops below stop_tol.
Trajectory train(const DagModel& model, const ParamVector& params0, const JointTable& target,
                 const TrainConfig& cfg);

}  // namespace natgrad
