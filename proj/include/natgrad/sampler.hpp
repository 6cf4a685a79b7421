#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "natgrad/dag_model.hpp"
#include "natgrad/random.hpp"

namespace natgrad {

enum class SweepOrder { Random, Sequential };

struct GibbsConfig {
  int burn_in = 1000;  ///< sweeps discarded before the first sample
  int thinning = 10;   ///< sweeps between emitted samples
  SweepOrder order = SweepOrder::Random;
  std::uint64_t seed = 0;
};

void validate(const GibbsConfig& cfg);

/// pa(s) u ch(s) u co-parents of s, sorted.
std::vector<int> markov_blanket(const Dag& dag, int s);

/// p(x_s | rest) for every state of s, read off the blanket of s.
Eigen::VectorXd gibbs_conditional(const DagModel& model, const ParamVector& params, int s,
                                  const Config& full);

/// Probability of the current state of binary sigmoid node s given the
/// rest, in the closed form 1 / (1 + e^{-x_s h_s} g_s).
double binary_gibbs_prob(const DagModel& model, const ParamVector& params, int s, const Config& full);

/// Single-site Gibbs over the hidden units with the visible units clamped
/// (clamp is aligned with space().visible()). Returns `steps` hidden
/// sub-configurations aligned with space().hidden().
std::vector<Config> gibbs_chain(const DagModel& model, const ParamVector& params, const Config& clamp,
                                int steps, const GibbsConfig& cfg, Rng& rng);

/// Exact p(x_H | x_V) by enumeration, over space().hidden().
JointTable clamped_posterior(const DagModel& model, const ParamVector& params, const Config& clamp);

/// Random-scan single-site transition matrix on the hidden configurations
/// (indexed like clamped_posterior).
Eigen::MatrixXd single_site_transition_matrix(const DagModel& model, const ParamVector& params,
                                              const Config& clamp);

/// Draws full configurations with x_V ~ p* and x_H from a clamped Gibbs
/// chain. One chain is kept per visible configuration and resumed on each
/// draw, so only the first visit pays the burn-in.
class TargetPosteriorSampler {
 public:
  TargetPosteriorSampler(const DagModel& model, ParamVector params, JointTable target, GibbsConfig cfg);

  /// Parameters for subsequent draws; chain states are kept.
  void set_params(ParamVector params) { params_ = std::move(params); }
  Config draw(Rng& rng);

 private:
  void sweep(Config& x, Rng& rng) const;

  const DagModel* model_;
  ParamVector params_;
  JointTable target_;
  GibbsConfig cfg_;
  std::map<std::int64_t, Config> chains_;
};

}  // namespace natgrad
