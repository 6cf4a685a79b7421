#include "natgrad/fisher.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace natgrad {

int BlockMatrix::dim() const {
  int d = 0;
  for (const auto& b : blocks) d += static_cast<int>(b.rows());
  return d;
}

std::vector<int> BlockMatrix::offsets() const {
  std::vector<int> off;
  int d = 0;
  for (const auto& b : blocks) {
    off.push_back(d);
    d += static_cast<int>(b.rows());
  }
  return off;
}

Eigen::MatrixXd BlockMatrix::dense() const {
  const int d = dim();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
  int o = 0;
  for (const auto& b : blocks) {
    m.block(o, o, b.rows(), b.cols()) = b;
    o += static_cast<int>(b.rows());
  }
  return m;
}

const Eigen::MatrixXd& BlockMatrix::block_of(int node) const {
  for (std::size_t k = 0; k < nodes.size(); ++k)
    if (nodes[k] == node) return blocks[k];
  throw std::out_of_range("no block for node " + std::to_string(node));
}

Eigen::MatrixXd local_fisher_block(const DagModel& model, const ParamVector& params, int r,
                                   const JointTable& joint) {
  const Kernel& k = model.kernel(r);
  const JointTable pa = marginal(joint, k.parents());
  const auto theta = model.block(params, r);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(k.dim(), k.dim());
  for (std::int64_t c = 0; c < k.parent_configs(); ++c) {
    const Eigen::VectorXd kp = k.probs(c, theta);
    const Eigen::MatrixXd s = k.log_grads(c, theta);
    g.noalias() += pa.p[c] * (s.transpose() * kp.asDiagonal() * s);
  }
  return (g + g.transpose()) / 2.0;
}

Eigen::MatrixXd local_fisher_block(const DagModel& model, const ParamVector& params, int r) {
  return local_fisher_block(model, params, r, joint_table(model, params));
}

BlockMatrix block_fisher(const DagModel& model, const ParamVector& params) {
  const JointTable joint = joint_table(model, params);
  BlockMatrix bm;
  for (int r : model.order()) {
    bm.nodes.push_back(r);
    bm.blocks.push_back(local_fisher_block(model, params, r, joint));
  }
  return bm;
}

Eigen::MatrixXd full_fisher_oracle(const Eigen::VectorXd& p, const Eigen::MatrixXd& scores) {
  if (scores.rows() != p.size()) throw std::invalid_argument("score rows do not match distribution");
  Eigen::MatrixXd g = scores.transpose() * p.asDiagonal() * scores;
  return (g + g.transpose()) / 2.0;
}

Eigen::MatrixXd full_fisher_oracle(const ParametrisedFamily& family, const Eigen::VectorXd& params) {
  return full_fisher_oracle(family.prob(params), family.score(params));
}

ParametrisedFamily joint_family(const DagModel& model) {
  return {model.dim(),
          [&model](const Eigen::VectorXd& xi) { return joint_table(model, xi).p; },
          [&model](const Eigen::VectorXd& xi) { return joint_scores(model, xi); }};
}

Eigen::MatrixXd full_fisher_oracle(const DagModel& model, const ParamVector& params) {
  return full_fisher_oracle(joint_table(model, params).p, joint_scores(model, params));
}

Eigen::MatrixXd expfam_fisher_block(const DagModel& model, const ParamVector& params, int r) {
  const Kernel& k = model.kernel(r);
  std::vector<Eigen::MatrixXd> stats;
  if (k.family() == KernelFamily::ExpFamily) {
    stats = k.spec().statistics;
  } else if (k.family() == KernelFamily::Sigmoid) {
    stats = sigmoid_as_exp_family(static_cast<int>(k.parents().size())).statistics;
  } else {
    throw std::invalid_argument("node " + std::to_string(r) + " is not an exponential-family kernel");
  }
  const JointTable pa = marginal(joint_table(model, params), k.parents());
  const auto theta = model.block(params, r);
  const int d = static_cast<int>(stats.size());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd phi(k.cardinality(), d);
  for (std::int64_t c = 0; c < k.parent_configs(); ++c) {
    for (int i = 0; i < d; ++i) phi.col(i) = stats[i].row(c).transpose();
    const Eigen::VectorXd kp = k.probs(c, theta);
    const Eigen::RowVectorXd mean = kp.transpose() * phi;
    const Eigen::MatrixXd centred = phi.rowwise() - mean;
    g.noalias() += pa.p[c] * (centred.transpose() * kp.asDiagonal() * centred);
  }
  return (g + g.transpose()) / 2.0;
}

Eigen::MatrixXd rbm_joint_fisher(int visible_count, int hidden_count, const Eigen::MatrixXd& w) {
  if (w.rows() != visible_count || w.cols() != hidden_count)
    throw std::invalid_argument("weight matrix shape mismatch");
  const int n = visible_count + hidden_count;
  if (n > 26) throw std::invalid_argument("too many units to enumerate");
  const std::int64_t total = std::int64_t{1} << n;
  const int d = visible_count * hidden_count;
  Eigen::MatrixXd t(total, d);
  Eigen::VectorXd logp(total);
  for (std::int64_t z = 0; z < total; ++z) {
    auto sp = [&](int u) { return 2 * static_cast<int>((z >> (n - 1 - u)) & 1) - 1; };
    double e = 0.0;
    for (int i = 0; i < visible_count; ++i)
      for (int j = 0; j < hidden_count; ++j) {
        const double s = sp(i) * sp(visible_count + j);
        t(z, i * hidden_count + j) = s;
        e += w(i, j) * s;
      }
    logp[z] = e;
  }
  Eigen::VectorXd p = (logp.array() - logp.maxCoeff()).exp();
  p /= p.sum();
  const Eigen::RowVectorXd mean = p.transpose() * t;
  const Eigen::MatrixXd c = t.rowwise() - mean;
  Eigen::MatrixXd g = c.transpose() * p.asDiagonal() * c;
  return (g + g.transpose()) / 2.0;
}

double rbm_off_block_max(const Eigen::MatrixXd& g, int visible_count, int hidden_count, bool by_hidden) {
  const int d = visible_count * hidden_count;
  double m = 0.0;
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) {
      const int ga = by_hidden ? a % hidden_count : a / hidden_count;
      const int gb = by_hidden ? b % hidden_count : b / hidden_count;
      if (ga != gb) m = std::max(m, std::abs(g(a, b)));
    }
  return m;
}

BlockMatrix block_pseudoinverse(const BlockMatrix& bm, double rel_tol) {
  BlockMatrix out;
  out.nodes = bm.nodes;
  for (const auto& b : bm.blocks) out.blocks.push_back(pseudoinverse(b, rel_tol));
  return out;
}

SparsityReport sparsity_report(const Eigen::MatrixXd& m, double abs_tol,
                               const std::vector<int>& block_sizes) {
  SparsityReport r;
  r.total = m.size();
  r.zeros = (m.array().abs() < abs_tol).count();
  r.nonzeros = r.total - r.zeros;
  int o = 0;
  for (int s : block_sizes) {
    r.per_block.push_back((m.block(o, o, s, s).array().abs() >= abs_tol).count());
    o += s;
  }
  return r;
}

std::vector<int> weight_indices(const DagModel& model, bool weights_only) {
  std::vector<int> idx;
  for (int r : model.order()) {
    const Kernel& k = model.kernel(r);
    const int keep = (weights_only && k.family() == KernelFamily::Sigmoid) ? k.dim() - 1 : k.dim();
    for (int i = 0; i < keep; ++i) idx.push_back(model.offset(r) + i);
  }
  return idx;
}

StructuralZeroReport structural_zero_report(const DagModel& model, Rng& rng, int draws,
                                            double abs_tol, bool weights_only) {
  StructuralZeroReport out;
  out.indices = weight_indices(model, weights_only);
  const int d = static_cast<int>(out.indices.size());
  out.max_abs = Eigen::MatrixXd::Zero(d, d);
  for (int t = 0; t < draws; ++t) {
    const Eigen::MatrixXd g = full_fisher_oracle(model, random_params(model, rng, -1.0, 1.0));
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b)
        out.max_abs(a, b) = std::max(out.max_abs(a, b), std::abs(g(out.indices[a], out.indices[b])));
  }
  std::vector<int> sizes;
  for (int r : model.order()) {
    const Kernel& k = model.kernel(r);
    sizes.push_back((weights_only && k.family() == KernelFamily::Sigmoid) ? k.dim() - 1 : k.dim());
  }
  out.report = sparsity_report(out.max_abs, abs_tol, sizes);
  return out;
}

LayeredPrediction layered_prediction(int n, int l) {
  LayeredPrediction p;
  p.n = n;
  p.l = l;
  const std::int64_t n3 = std::int64_t{n} * n * n;
  const std::int64_t weights = std::int64_t{l} * n * n;
  p.entries = weights * weights;
  p.shallow_nonzeros = std::int64_t{l} * l * n3;
  p.deep_nonzeros = std::int64_t{l} * n3;
  p.shallow_zeros = p.entries - p.shallow_nonzeros;
  p.deep_zeros = p.entries - p.deep_nonzeros;
  p.zero_difference = p.deep_zeros - p.shallow_zeros;
  return p;
}

}  // namespace natgrad
