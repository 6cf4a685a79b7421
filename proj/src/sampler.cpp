#include "natgrad/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

namespace natgrad {

void validate(const GibbsConfig& cfg) {
  if (cfg.burn_in < 0) throw std::invalid_argument("burn_in must be >= 0");
  if (cfg.thinning < 1) throw std::invalid_argument("thinning must be >= 1");
}

std::vector<int> markov_blanket(const Dag& dag, int s) {
  if (s < 0 || s >= dag.node_count()) throw std::out_of_range("unknown node " + std::to_string(s));
  std::set<int> bl(dag.parents[s].begin(), dag.parents[s].end());
  for (int j = 0; j < dag.node_count(); ++j) {
    const auto& pa = dag.parents[j];
    if (std::find(pa.begin(), pa.end(), s) == pa.end()) continue;
    bl.insert(j);
    bl.insert(pa.begin(), pa.end());
  }
  bl.erase(s);
  return {bl.begin(), bl.end()};
}

Eigen::VectorXd gibbs_conditional(const DagModel& model, const ParamVector& params, int s,
                                  const Config& full) {
  const Kernel& ks = model.kernel(s);
  Config x = full;
  Eigen::VectorXd lp(ks.cardinality());
  for (int t = 0; t < ks.cardinality(); ++t) {
    x[s] = t;
    double v = ks.log_probs(ks.parent_index(x), model.block(params, s))[t];
    for (int i : model.children()[s]) {
      const Kernel& ki = model.kernel(i);
      v += ki.log_probs(ki.parent_index(x), model.block(params, i))[x[i]];
    }
    lp[t] = v;
  }
  const double m = lp.maxCoeff();
  Eigen::VectorXd p = (lp.array() - m).exp();
  return p / p.sum();
}

double binary_gibbs_prob(const DagModel& model, const ParamVector& params, int s, const Config& full) {
  const Kernel& ks = model.kernel(s);
  if (ks.family() != KernelFamily::Sigmoid)
    throw std::invalid_argument("node " + std::to_string(s) + " is not a sigmoid unit");
  const int xs = spin(full[s]);
  const double hs = ks.field(ks.parent_index(full), model.block(params, s));
  double log_g = 0.0;
  for (int i : model.children()[s]) {
    const Kernel& ki = model.kernel(i);
    if (ki.family() != KernelFamily::Sigmoid)
      throw std::invalid_argument("child " + std::to_string(i) + " is not a sigmoid unit");
    const auto theta = model.block(params, i);
    const auto& pa = ki.parents();
    const int j = static_cast<int>(std::find(pa.begin(), pa.end(), s) - pa.begin());
    const int xi = spin(full[i]);
    const double a = -xi * ki.field(ki.parent_index(full), theta);
    log_g += softplus(a) - softplus(a + 2.0 * theta[j] * xs * xi);
  }
  return logistic(xs * hs - log_g);
}

namespace {

Config full_from_clamp(const DagModel& model, const Config& clamp) {
  const auto& vis = model.space().visible();
  if (clamp.size() != vis.size()) throw std::invalid_argument("clamp does not cover the visible units");
  Config x{std::vector<int>(model.node_count(), 0)};
  for (std::size_t k = 0; k < vis.size(); ++k) {
    if (clamp[k] < 0 || clamp[k] >= model.space().cardinality(vis[k]))
      throw std::out_of_range("clamped state out of range");
    x[vis[k]] = clamp[k];
  }
  return x;
}

void gibbs_sweep(const DagModel& model, const ParamVector& params, const GibbsConfig& cfg, Config& x,
                 Rng& rng) {
  const auto& hid = model.space().hidden();
  const int m = static_cast<int>(hid.size());
  for (int k = 0; k < m; ++k) {
    const int s = hid[cfg.order == SweepOrder::Random ? uniform_int(rng, m) : k];
    x[s] = categorical(rng, gibbs_conditional(model, params, s, x));
  }
}

}  // namespace

std::vector<Config> gibbs_chain(const DagModel& model, const ParamVector& params, const Config& clamp,
                                int steps, const GibbsConfig& cfg, Rng& rng) {
  validate(cfg);
  if (steps < 0) throw std::invalid_argument("steps must be >= 0");
  std::vector<Config> out;
  if (steps == 0) return out;
  model.check_params(params);
  Config x = full_from_clamp(model, clamp);
  const auto& hid = model.space().hidden();
  for (int h : hid) x[h] = uniform_int(rng, model.space().cardinality(h));
  for (int b = 0; b < cfg.burn_in; ++b) gibbs_sweep(model, params, cfg, x, rng);
  out.reserve(steps);
  for (int t = 0; t < steps; ++t) {
    for (int b = 0; b < cfg.thinning; ++b) gibbs_sweep(model, params, cfg, x, rng);
    out.push_back(restrict(x, hid));
  }
  return out;
}

JointTable clamped_posterior(const DagModel& model, const ParamVector& params, const Config& clamp) {
  const auto& hid = model.space().hidden();
  Config x = full_from_clamp(model, clamp);
  JointTable t;
  t.units = hid;
  for (int h : hid) t.cards.push_back(model.space().cardinality(h));
  t.p.resize(config_count(model.space(), hid));
  std::int64_t i = 0;
  do {
    t.p[i++] = log_joint(model, params, x);
  } while (next_config(x, hid, model.space()));
  const double m = t.p.maxCoeff();
  t.p = (t.p.array() - m).exp();
  t.p /= t.p.sum();
  return t;
}

Eigen::MatrixXd single_site_transition_matrix(const DagModel& model, const ParamVector& params,
                                              const Config& clamp) {
  const auto& hid = model.space().hidden();
  const std::int64_t n = config_count(model.space(), hid);
  const int m = static_cast<int>(hid.size());
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
  if (m == 0) {
    t(0, 0) = 1.0;
    return t;
  }
  Config x = full_from_clamp(model, clamp);
  SubsetIndexer idx(model.space(), hid);
  std::int64_t i = 0;
  do {
    for (int s : hid) {
      const Eigen::VectorXd p = gibbs_conditional(model, params, s, x);
      Config y = x;
      for (int v = 0; v < p.size(); ++v) {
        y[s] = v;
        t(i, idx(y)) += p[v] / m;
      }
    }
    ++i;
  } while (next_config(x, hid, model.space()));
  return t;
}

TargetPosteriorSampler::TargetPosteriorSampler(const DagModel& model, ParamVector params,
                                               JointTable target, GibbsConfig cfg)
    : model_(&model), params_(std::move(params)), target_(std::move(target)), cfg_(cfg) {
  validate(cfg_);
  model.check_params(params_);
  if (target_.units != model.space().visible())
    throw std::invalid_argument("target must be a table over the visible units");
}

void TargetPosteriorSampler::sweep(Config& x, Rng& rng) const {
  gibbs_sweep(*model_, params_, cfg_, x, rng);
}

Config TargetPosteriorSampler::draw(Rng& rng) {
  const std::int64_t v = categorical(rng, target_.p);
  auto it = chains_.find(v);
  if (it == chains_.end()) {
    Config x = full_from_clamp(*model_, target_.config(v));
    for (int h : model_->space().hidden()) x[h] = uniform_int(rng, model_->space().cardinality(h));
    for (int b = 0; b < cfg_.burn_in; ++b) sweep(x, rng);
    it = chains_.emplace(v, std::move(x)).first;
  }
  for (int b = 0; b < cfg_.thinning; ++b) sweep(it->second, rng);
  return it->second;
}

}  // namespace natgrad
