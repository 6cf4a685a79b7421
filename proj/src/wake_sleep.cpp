#include "natgrad/wake_sleep.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

#include "natgrad/errors.hpp"

namespace natgrad {

RecognitionModel::RecognitionModel(const StateSpace& space, std::vector<std::vector<int>> parents,
                                   std::vector<KernelSpec> specs)
    : space_(space) {
  const auto& hid = space_.hidden();
  if (parents.size() != hid.size() || specs.size() != hid.size())
    throw std::invalid_argument("recognition model needs one kernel per hidden unit");
  Dag g;
  g.parents.assign(space_.unit_count(), {});
  for (std::size_t k = 0; k < hid.size(); ++k) g.parents[hid[k]] = parents[k];
  const std::vector<int> topo = validate_dag(g);

  std::vector<int> pos(space_.unit_count(), -1);
  for (std::size_t k = 0; k < hid.size(); ++k) pos[hid[k]] = static_cast<int>(k);
  for (std::size_t k = 0; k < hid.size(); ++k)
    kernels_.emplace_back(hid[k], std::move(parents[k]), std::move(specs[k]), space_);
  for (int u : topo)
    if (pos[u] >= 0) order_.push_back(pos[u]);
  offsets_.assign(hid.size(), 0);
  for (int k : order_) {
    offsets_[k] = dim_;
    dim_ += kernels_[k].dim();
  }
}

RecognitionModel RecognitionModel::full_tabular(const StateSpace& space) {
  std::vector<std::vector<int>> pa;
  std::vector<KernelSpec> specs;
  std::vector<int> prefix = space.visible();
  for (int h : space.hidden()) {
    pa.push_back(prefix);
    specs.push_back(KernelSpec::tabular_logit());
    prefix.push_back(h);
  }
  return RecognitionModel(space, std::move(pa), std::move(specs));
}

RecognitionModel RecognitionModel::factorised_tabular(const StateSpace& space) {
  const std::size_t m = space.hidden().size();
  return RecognitionModel(space, std::vector<std::vector<int>>(m, space.visible()),
                          std::vector<KernelSpec>(m, KernelSpec::tabular_logit()));
}

void RecognitionModel::check_params(const Eigen::VectorXd& eta) const {
  if (eta.size() != dim_)
    throw std::invalid_argument("recognition parameter vector has length " + std::to_string(eta.size()) +
                                ", expected " + std::to_string(dim_));
}

double RecognitionModel::log_q(const Eigen::VectorXd& eta, const Config& full) const {
  double lq = 0.0;
  for (int k = 0; k < hidden_count(); ++k) {
    const Kernel& l = kernels_[k];
    lq += l.log_probs(l.parent_index(full), block(eta, k))[full[l.unit()]];
  }
  return lq;
}

Eigen::VectorXd RecognitionModel::log_q_grad(const Eigen::VectorXd& eta, const Config& full) const {
  Eigen::VectorXd g(dim_);
  for (int k = 0; k < hidden_count(); ++k) {
    const Kernel& l = kernels_[k];
    g.segment(offsets_[k], l.dim()) = l.log_grad(l.parent_index(full), full[l.unit()], block(eta, k));
  }
  return g;
}

void RecognitionModel::sample_hidden(const Eigen::VectorXd& eta, Config& full, Rng& rng) const {
  for (int k : order_) {
    const Kernel& l = kernels_[k];
    full[l.unit()] = categorical(rng, l.probs(l.parent_index(full), block(eta, k)));
  }
}

Eigen::VectorXd init_recognition_params(const RecognitionModel& recog, Rng& rng, double lo, double hi) {
  Eigen::VectorXd eta(recog.dim());
  for (int k : recog.order()) {
    const Kernel& l = recog.kernel(k);
    auto b = recog.block(eta, k);
    for (int i = 0; i < l.dim(); ++i) b[i] = uniform(rng, lo, hi);
    if (l.family() == KernelFamily::Sigmoid) b[l.dim() - 1] = 0.0;
  }
  return eta;
}

JointTable recog_conditional(const RecognitionModel& recog, const Eigen::VectorXd& eta, const Config& x_v) {
  recog.check_params(eta);
  const StateSpace& space = recog.space();
  const auto& vis = space.visible();
  const auto& hid = space.hidden();
  if (x_v.size() != vis.size()) throw std::invalid_argument("visible configuration has the wrong size");
  Config x{std::vector<int>(space.unit_count(), 0)};
  for (std::size_t k = 0; k < vis.size(); ++k) x[vis[k]] = x_v[k];
  JointTable t;
  t.units = hid;
  for (int h : hid) t.cards.push_back(space.cardinality(h));
  t.p.resize(config_count(space, hid));
  std::int64_t i = 0;
  do {
    t.p[i++] = std::exp(recog.log_q(eta, x));
  } while (next_config(x, hid, space));
  return t;
}

Eigen::VectorXd recog_log_table(const RecognitionModel& recog, const Eigen::VectorXd& eta) {
  recog.check_params(eta);
  const StateSpace& space = recog.space();
  Eigen::VectorXd out(space.total_configs());
  Config x{std::vector<int>(space.unit_count(), 0)};
  const auto units = space.all_units();
  std::int64_t i = 0;
  do {
    out[i++] = recog.log_q(eta, x);
  } while (next_config(x, units, space));
  return out;
}

Eigen::MatrixXd recog_scores(const RecognitionModel& recog, const Eigen::VectorXd& eta) {
  recog.check_params(eta);
  const StateSpace& space = recog.space();
  Eigen::MatrixXd out(space.total_configs(), recog.dim());
  Config x{std::vector<int>(space.unit_count(), 0)};
  const auto units = space.all_units();
  std::int64_t i = 0;
  do {
    out.row(i++) = recog.log_q_grad(eta, x).transpose();
  } while (next_config(x, units, space));
  return out;
}

namespace {

void check_pair(const DagModel& model, const RecognitionModel& recog) {
  if (model.space().cardinalities() != recog.space().cardinalities() ||
      model.space().visible() != recog.space().visible())
    throw std::invalid_argument("recognition model is over a different state space");
}

/// ln p(x_H | x_V; xi) for every joint configuration.
Eigen::VectorXd log_posterior_table(const DagModel& model, const JointTable& joint) {
  const JointTable pv = marginal(joint, model.space().visible());
  SubsetIndexer vidx(model.space(), model.space().visible());
  Eigen::VectorXd out(joint.size());
  Config x{std::vector<int>(model.node_count(), 0)};
  const auto units = model.space().all_units();
  std::int64_t i = 0;
  do {
    out[i] = std::log(joint.p[i]) - std::log(pv.p[vidx(x)]);
    ++i;
  } while (next_config(x, units, model.space()));
  return out;
}

double gap_from(const Eigen::VectorXd& p, const Eigen::VectorXd& log_post, const Eigen::VectorXd& log_q) {
  return p.dot(log_post - log_q);
}

/// p*(x_V) q(x_H | x_V) for every joint configuration.
Eigen::VectorXd wake_weights(const RecognitionModel& recog, const Eigen::VectorXd& eta, const JointTable& target) {
  const StateSpace& space = recog.space();
  const Eigen::VectorXd lq = recog_log_table(recog, eta);
  SubsetIndexer vidx(space, space.visible());
  Eigen::VectorXd w(lq.size());
  Config x{std::vector<int>(space.unit_count(), 0)};
  const auto units = space.all_units();
  std::int64_t i = 0;
  do {
    w[i] = target.p[vidx(x)] * std::exp(lq[i]);
    ++i;
  } while (next_config(x, units, space));
  return w;
}

MCGradient mc_mean(int n, int dim, const std::function<Eigen::VectorXd()>& draw) {
  if (n < 1) throw std::invalid_argument("n_samples must be >= 1");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(dim);
  for (int t = 0; t < n; ++t) {
    const Eigen::VectorXd g = draw();
    sum += g;
    sq += g.cwiseProduct(g);
  }
  MCGradient out;
  out.value = sum / n;
  if (n > 1) {
    const Eigen::VectorXd var = ((sq - n * out.value.cwiseProduct(out.value)) / (n - 1)).cwiseMax(0.0);
    out.std_error = (var / n).cwiseSqrt();
  } else {
    out.std_error = Eigen::VectorXd::Constant(dim, std::numeric_limits<double>::infinity());
  }
  return out;
}

}  // namespace

double recognition_gap(const DagModel& model, const ParamVector& xi, const RecognitionModel& recog,
                       const Eigen::VectorXd& eta) {
  check_pair(model, recog);
  const JointTable joint = joint_table(model, xi);
  return gap_from(joint.p, log_posterior_table(model, joint), recog_log_table(recog, eta));
}

ParamVector wake_gradient(const DagModel& model, const ParamVector& xi, const RecognitionModel& recog,
                          const Eigen::VectorXd& eta, const JointTable& target) {
  check_pair(model, recog);
  check_target(model, target);
  return -(joint_scores(model, xi).transpose() * wake_weights(recog, eta, target));
}

MCGradient wake_gradient_mc(const DagModel& model, const ParamVector& xi, const RecognitionModel& recog,
                            const Eigen::VectorXd& eta, const JointTable& target, int n_samples, Rng& rng) {
  check_pair(model, recog);
  check_target(model, target);
  recog.check_params(eta);
  model.check_params(xi);
  const auto& vis = model.space().visible();
  return mc_mean(n_samples, model.dim(), [&] {
    const Config v = target.config(categorical(rng, target.p));
    Config x{std::vector<int>(model.node_count(), 0)};
    for (std::size_t k = 0; k < vis.size(); ++k) x[vis[k]] = v[k];
    recog.sample_hidden(eta, x, rng);
    return Eigen::VectorXd(-log_joint_grad(model, xi, x));
  });
}

Eigen::VectorXd sleep_gradient(const DagModel& model, const ParamVector& xi, const RecognitionModel& recog,
                               const Eigen::VectorXd& eta) {
  check_pair(model, recog);
  return -(recog_scores(recog, eta).transpose() * joint_table(model, xi).p);
}

MCGradient sleep_gradient_mc(const DagModel& model, const ParamVector& xi, const RecognitionModel& recog,
                             const Eigen::VectorXd& eta, int n_samples, Rng& rng) {
  check_pair(model, recog);
  recog.check_params(eta);
  return mc_mean(n_samples, recog.dim(), [&] {
    const Config x = ancestral_sample(model, xi, rng);
    return Eigen::VectorXd(-recog.log_q_grad(eta, x));
  });
}

Eigen::VectorXd exact_posterior_fit(const DagModel& model, const ParamVector& xi,
                                    const RecognitionModel& recog) {
  check_pair(model, recog);
  const JointTable joint = joint_table(model, xi);
  Eigen::VectorXd eta(recog.dim());
  for (int k = 0; k < recog.hidden_count(); ++k) {
    const Kernel& l = recog.kernel(k);
    if (l.family() != KernelFamily::TabularLogit)
      throw RepresentabilityError("exact posterior fit needs tabular recognition kernels");
    std::vector<int> units = l.parents();
    units.push_back(l.unit());
    const JointTable m = marginal(joint, units);
    const int card = l.cardinality();
    auto b = recog.block(eta, k);
    for (std::int64_t c = 0; c < l.parent_configs(); ++c) {
      const double mass = m.p.segment(c * card, card).sum();
      for (int s = 0; s < card; ++s) b[c * card + s] = std::log(m.p[c * card + s] / mass);
    }
  }
  const double gap = gap_from(joint.p, log_posterior_table(model, joint), recog_log_table(recog, eta));
  if (gap > 1e-8)
    throw RepresentabilityError("recognition structure cannot express the posterior (gap " +
                                std::to_string(gap) + ")");
  return eta;
}

BlockMatrix recognition_block_fisher(const DagModel& model, const ParamVector& xi,
                                     const RecognitionModel& recog, const Eigen::VectorXd& eta) {
  check_pair(model, recog);
  recog.check_params(eta);
  const JointTable joint = joint_table(model, xi);
  BlockMatrix bm;
  for (int k : recog.order()) {
    const Kernel& l = recog.kernel(k);
    const JointTable pa = marginal(joint, l.parents());
    const auto theta = recog.block(eta, k);
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(l.dim(), l.dim());
    for (std::int64_t c = 0; c < l.parent_configs(); ++c) {
      const Eigen::VectorXd lp = l.probs(c, theta);
      const Eigen::MatrixXd s = l.log_grads(c, theta);
      g.noalias() += pa.p[c] * (s.transpose() * lp.asDiagonal() * s);
    }
    bm.nodes.push_back(k);
    bm.blocks.push_back((g + g.transpose()) / 2.0);
  }
  return bm;
}

void validate(const WakeSleepSchedule& s) {
  if (s.k_sleep < 1) throw std::invalid_argument("k_sleep must be >= 1");
  if (!(s.step_xi >= 0.0) || !(s.step_eta >= 0.0)) throw std::invalid_argument("step sizes must be >= 0");
  if (s.iters < 0) throw std::invalid_argument("iters must be >= 0");
  if (s.n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  if (!(s.pinv_rel_tol > 0.0)) throw std::invalid_argument("pinv_rel_tol must be positive");
}

WakeSleepResult wake_sleep_train(const DagModel& model, const ParamVector& xi0, const RecognitionModel& recog,
                                 const Eigen::VectorXd& eta0, const JointTable& target,
                                 const WakeSleepSchedule& schedule) {
  validate(schedule);
  check_pair(model, recog);
  check_target(model, target);
  model.check_params(xi0);
  recog.check_params(eta0);
  if (!xi0.allFinite() || !eta0.allFinite()) throw NumericError("non-finite initial parameters");
  Rng rng(schedule.seed);
  const bool exact = schedule.mode == ExpectationMode::Exact;

  auto wake = [&](const ParamVector& xi, const Eigen::VectorXd& eta) -> ParamVector {
    return exact ? wake_gradient(model, xi, recog, eta, target)
                 : wake_gradient_mc(model, xi, recog, eta, target, schedule.n_samples, rng).value;
  };
  auto sleep = [&](const ParamVector& xi, const Eigen::VectorXd& eta, const JointTable& joint) -> Eigen::VectorXd {
    return exact ? Eigen::VectorXd(-(recog_scores(recog, eta).transpose() * joint.p))
                 : sleep_gradient_mc(model, xi, recog, eta, schedule.n_samples, rng).value;
  };
  auto check = [](int iter, const WakeSleepRow& row) {
    if (!std::isfinite(row.E) || !std::isfinite(row.gap) || !std::isfinite(row.grad_xi_norm) ||
        !std::isfinite(row.grad_eta_norm))
      throw NumericError("non-finite value during wake-sleep at iteration " + std::to_string(iter));
  };

  WakeSleepResult res{{}, xi0, eta0};
  ParamVector& xi = res.xi;
  Eigen::VectorXd& eta = res.eta;
  {
    const JointTable joint = joint_table(model, xi);
    WakeSleepRow row{0, objective(model, xi, target),
                     gap_from(joint.p, log_posterior_table(model, joint), recog_log_table(recog, eta)),
                     wake(xi, eta).norm(), sleep(xi, eta, joint).norm()};
    check(0, row);
    res.rows.push_back(row);
  }
  for (int t = 1; t <= schedule.iters; ++t) {
    const JointTable joint = joint_table(model, xi);
    const Eigen::VectorXd log_post = log_posterior_table(model, joint);
    double eta_norm = 0.0;
    if (schedule.exact_sleep) {
      eta = exact_posterior_fit(model, xi, recog);
    } else {
      for (int j = 0; j < schedule.k_sleep; ++j) {
        if (exact && schedule.gap_threshold &&
            gap_from(joint.p, log_post, recog_log_table(recog, eta)) < *schedule.gap_threshold)
          break;
        const Eigen::VectorXd g = sleep(xi, eta, joint);
        eta_norm = g.norm();
        if (schedule.natural) {
          const BlockMatrix f = block_pseudoinverse(recognition_block_fisher(model, xi, recog, eta),
                                                    schedule.pinv_rel_tol);
          for (std::size_t b = 0; b < f.nodes.size(); ++b) {
            const int k = f.nodes[b];
            recog.block(eta, k) -= schedule.step_eta * (f.blocks[b] * recog.block(g, k));
          }
        } else {
          eta -= schedule.step_eta * g;
        }
      }
      if (!eta.allFinite()) throw NumericError("non-finite recognition parameters at iteration " + std::to_string(t));
    }
    const ParamVector gw = wake(xi, eta);
    const ParamVector dir = schedule.natural ? natural_direction(model, xi, gw, schedule.pinv_rel_tol) : gw;
    xi -= schedule.step_xi * dir;
    if (!xi.allFinite()) throw NumericError("non-finite parameters at iteration " + std::to_string(t));

    const JointTable after = joint_table(model, xi);
    WakeSleepRow row{t, objective(model, xi, target),
                     gap_from(after.p, log_posterior_table(model, after), recog_log_table(recog, eta)),
                     gw.norm(), eta_norm};
    check(t, row);
    res.rows.push_back(row);
  }
  return res;
}

}  // namespace natgrad
