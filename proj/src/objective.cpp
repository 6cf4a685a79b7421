#include "natgrad/objective.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>

#include "natgrad/errors.hpp"

namespace natgrad {

double kl_divergence(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: size mismatch");
  double d = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (!(q[i] > 0.0)) throw std::invalid_argument("kl_divergence: nonpositive entry in q");
    if (p[i] > 0.0) d += p[i] * std::log(p[i] / q[i]);
  }
  return d;
}

double kl_divergence(const JointTable& p, const JointTable& q) {
  if (p.units != q.units || p.cards != q.cards)
    throw std::invalid_argument("kl_divergence: tables over different spaces");
  return kl_divergence(p.p, q.p);
}

void check_target(const DagModel& model, const JointTable& target) {
  const auto& vis = model.space().visible();
  if (target.units != vis) throw std::invalid_argument("target must be a table over the visible units");
  if (target.p.size() != config_count(model.space(), vis))
    throw std::invalid_argument("target table has the wrong length");
  if ((target.p.array() < 0.0).any()) throw std::invalid_argument("target has negative entries");
  if (std::abs(target.p.sum() - 1.0) > 1e-12) throw std::invalid_argument("target does not sum to 1");
}

double objective(const DagModel& model, const ParamVector& params, const JointTable& target) {
  check_target(model, target);
  return kl_divergence(target, visible_marginal(model, params));
}

Eigen::VectorXd target_posterior_table(const DagModel& model, const ParamVector& params,
                                       const JointTable& target) {
  check_target(model, target);
  const JointTable joint = joint_table(model, params);
  const JointTable pv = marginal(joint, model.space().visible());
  SubsetIndexer vidx(model.space(), model.space().visible());
  Eigen::VectorXd q(joint.size());
  Config x{std::vector<int>(model.node_count(), 0)};
  const auto units = model.space().all_units();
  std::int64_t i = 0;
  do {
    const std::int64_t v = vidx(x);
    q[i] = target.p[v] * joint.p[i] / pv.p[v];
    ++i;
  } while (next_config(x, units, model.space()));
  return q;
}

ParamVector euclidean_grad_exact(const DagModel& model, const ParamVector& params,
                                 const JointTable& target) {
  const Eigen::VectorXd q = target_posterior_table(model, params, target);
  return -(joint_scores(model, params).transpose() * q);
}

PosteriorSampler make_exact_posterior_sampler(const DagModel& model, const ParamVector& params,
                                              const JointTable& target) {
  auto q = std::make_shared<Eigen::VectorXd>(target_posterior_table(model, params, target));
  auto units = std::make_shared<std::vector<int>>(model.space().all_units());
  const StateSpace* space = &model.space();
  return [q, units, space](Rng& rng) { return index_to_config(*space, *units, categorical(rng, *q)); };
}

MCGradient euclidean_grad_mc(const DagModel& model, const ParamVector& params,
                             const PosteriorSampler& sampler, int n_samples, Rng& rng) {
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  model.check_params(params);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(model.dim());
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(model.dim());
  for (int t = 0; t < n_samples; ++t) {
    const Eigen::VectorXd g = -log_joint_grad(model, params, sampler(rng));
    sum += g;
    sq += g.cwiseProduct(g);
  }
  MCGradient out;
  out.value = sum / n_samples;
  if (n_samples > 1) {
    const Eigen::VectorXd var =
        ((sq - n_samples * out.value.cwiseProduct(out.value)) / (n_samples - 1)).cwiseMax(0.0);
    out.std_error = (var / n_samples).cwiseSqrt();
  } else {
    out.std_error = Eigen::VectorXd::Constant(model.dim(), std::numeric_limits<double>::infinity());
  }
  return out;
}

ParamVector natural_direction(const DagModel& model, const ParamVector& params, const ParamVector& grad,
                              double pinv_rel_tol) {
  model.check_params(grad);
  const BlockMatrix g = block_fisher(model, params);
  ParamVector out(model.dim());
  for (std::size_t k = 0; k < g.nodes.size(); ++k) {
    const int r = g.nodes[k];
    model.block(out, r) = pseudoinverse(g.blocks[k], pinv_rel_tol) * model.block(grad, r);
  }
  return out;
}

ParamVector natural_grad(const DagModel& model, const ParamVector& params, const JointTable& target,
                         double pinv_rel_tol) {
  return natural_direction(model, params, euclidean_grad_exact(model, params, target), pinv_rel_tol);
}

void validate(const TrainConfig& cfg) {
  if (!(cfg.step >= 0.0)) throw std::invalid_argument("step size must be >= 0");
  if (cfg.max_iters < 0) throw std::invalid_argument("max_iters must be >= 0");
  if (cfg.n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  if (!(cfg.pinv_rel_tol > 0.0)) throw std::invalid_argument("pinv_rel_tol must be positive");
  validate(cfg.gibbs);
}

Trajectory train(const DagModel& model, const ParamVector& params0, const JointTable& target,
                 const TrainConfig& cfg) {
  validate(cfg);
  check_target(model, target);
  model.check_params(params0);
  if (!params0.allFinite()) throw NumericError("non-finite initial parameters");
  Rng rng(cfg.seed);
  std::unique_ptr<TargetPosteriorSampler> gibbs;
  if (cfg.expectation == ExpectationMode::MonteCarlo && cfg.sampler == PosteriorSamplerKind::Gibbs)
    gibbs = std::make_unique<TargetPosteriorSampler>(model, params0, target, cfg.gibbs);

  auto gradient = [&](const ParamVector& xi) -> ParamVector {
    if (cfg.expectation == ExpectationMode::Exact) return euclidean_grad_exact(model, xi, target);
    if (gibbs) {
      gibbs->set_params(xi);
      return euclidean_grad_mc(model, xi, [&](Rng& g) { return gibbs->draw(g); }, cfg.n_samples, rng).value;
    }
    return euclidean_grad_mc(model, xi, make_exact_posterior_sampler(model, xi, target), cfg.n_samples, rng)
        .value;
  };
  auto check = [](int iter, double e, const ParamVector& g) {
    if (!std::isfinite(e) || !g.allFinite())
      throw NumericError("non-finite objective or gradient at iteration " + std::to_string(iter));
  };

  Trajectory tr;
  ParamVector xi = params0;
  ParamVector g = gradient(xi);
  double e = objective(model, xi, target);
  check(0, e, g);
  tr.rows.push_back({0, e, g.norm()});
  tr.params.push_back(xi);
  for (int it = 1; it <= cfg.max_iters; ++it) {
    if (g.norm() < cfg.stop_tol) {
      tr.converged = true;
      break;
    }
    const ParamVector dir =
        cfg.grad_mode == GradMode::Natural ? natural_direction(model, xi, g, cfg.pinv_rel_tol) : g;
    xi -= cfg.step * dir;
    if (!xi.allFinite()) throw NumericError("non-finite parameters at iteration " + std::to_string(it));
    g = gradient(xi);
    e = objective(model, xi, target);
    check(it, e, g);
    tr.rows.push_back({it, e, g.norm()});
    tr.params.push_back(xi);
  }
  if (!tr.converged && g.norm() < cfg.stop_tol) tr.converged = true;
  return tr;
}

}  // namespace natgrad
