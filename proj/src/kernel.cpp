#include "natgrad/kernel.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace natgrad {

namespace {

double log_sum_exp(const Eigen::VectorXd& a) {
  const double m = a.maxCoeff();
  return m + std::log((a.array() - m).exp().sum());
}

}  // namespace

const char* to_string(KernelFamily f) {
  switch (f) {
    case KernelFamily::Sigmoid: return "sigmoid";
    case KernelFamily::ExpFamily: return "exp_family";
    case KernelFamily::TabularLogit: return "tabular_logit";
  }
  return "?";
}

KernelSpec sigmoid_as_exp_family(int parent_count) {
  const std::int64_t pc = std::int64_t{1} << parent_count;
  std::vector<Eigen::MatrixXd> stats;
  for (int j = 0; j <= parent_count; ++j) {
    Eigen::MatrixXd t(pc, 2);
    for (std::int64_t c = 0; c < pc; ++c) {
      for (int s = 0; s < 2; ++s) {
        const int xr = spin(s);
        if (j < parent_count) {
          const int xj = 2 * static_cast<int>((c >> (parent_count - 1 - j)) & 1) - 1;
          t(c, s) = 0.5 * xj * xr;
        } else {
          t(c, s) = -0.5 * xr;
        }
      }
    }
    stats.push_back(std::move(t));
  }
  return KernelSpec::exp_family(std::move(stats));
}

Kernel::Kernel(int unit, std::vector<int> parents, KernelSpec spec, const StateSpace& space)
    : unit_(unit),
      parents_(std::move(parents)),
      spec_(std::move(spec)),
      card_(space.cardinality(unit)),
      indexer_(space, parents_) {
  for (int p : parents_)
    if (p == unit_) throw std::invalid_argument("unit " + std::to_string(unit_) + " is its own parent");

  switch (spec_.family) {
    case KernelFamily::Sigmoid:
      if (card_ != 2)
        throw std::invalid_argument("sigmoid kernel on unit " + std::to_string(unit_) +
                                    " requires a binary unit");
      for (int p : parents_)
        if (space.cardinality(p) != 2)
          throw std::invalid_argument("sigmoid kernel on unit " + std::to_string(unit_) +
                                      " requires binary parents");
      dim_ = static_cast<int>(parents_.size()) + 1;
      break;
    case KernelFamily::ExpFamily:
      if (spec_.statistics.empty())
        throw std::invalid_argument("exp-family kernel needs at least one statistic");
      for (const auto& t : spec_.statistics)
        if (t.rows() != indexer_.count() || t.cols() != card_)
          throw std::invalid_argument("statistic table shape mismatch on unit " +
                                      std::to_string(unit_));
      dim_ = static_cast<int>(spec_.statistics.size());
      break;
    case KernelFamily::TabularLogit:
      dim_ = static_cast<int>(indexer_.count() * card_);
      break;
  }
}

double Kernel::field(std::int64_t c, const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  const int np = static_cast<int>(parents_.size());
  double h = -theta[np];
  for (int j = 0; j < np; ++j) h += theta[j] * parent_spin(c, j);
  return h;
}

Eigen::VectorXd Kernel::log_probs(std::int64_t c, const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  Eigen::VectorXd out(card_);
  switch (spec_.family) {
    case KernelFamily::Sigmoid: {
      const double h = field(c, theta);
      out[0] = -softplus(h);   // x = -1: ln sigma(-h)
      out[1] = -softplus(-h);  // x = +1: ln sigma(h)
      break;
    }
    case KernelFamily::ExpFamily: {
      Eigen::VectorXd a = Eigen::VectorXd::Zero(card_);
      for (int i = 0; i < dim_; ++i) a += theta[i] * spec_.statistics[i].row(c).transpose();
      out = a.array() - log_sum_exp(a);
      break;
    }
    case KernelFamily::TabularLogit: {
      Eigen::VectorXd a = theta.segment(c * card_, card_);
      out = a.array() - log_sum_exp(a);
      break;
    }
  }
  return out;
}

Eigen::VectorXd Kernel::probs(std::int64_t c, const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  if (spec_.family == KernelFamily::Sigmoid) {
    const double h = field(c, theta);
    Eigen::VectorXd out(2);
    out << logistic(-h), logistic(h);
    return out;
  }
  return log_probs(c, theta).array().exp();
}

Eigen::VectorXd Kernel::log_grad(std::int64_t c, int s,
                                 const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  if (s < 0 || s >= card_) throw std::out_of_range("kernel state out of range");
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim_);
  switch (spec_.family) {
    case KernelFamily::Sigmoid: {
      const int np = static_cast<int>(parents_.size());
      const int x = spin(s);
      const double r = logistic(-x * field(c, theta));  // 1 / (1 + e^{x h})
      for (int j = 0; j < np; ++j) g[j] = parent_spin(c, j) * x * r;
      g[np] = -x * r;
      break;
    }
    case KernelFamily::ExpFamily: {
      const Eigen::VectorXd k = probs(c, theta);
      for (int i = 0; i < dim_; ++i) {
        const auto row = spec_.statistics[i].row(c);
        g[i] = row[s] - row.dot(k.transpose());
      }
      break;
    }
    case KernelFamily::TabularLogit: {
      g.segment(c * card_, card_) = -probs(c, theta);
      g[c * card_ + s] += 1.0;
      break;
    }
  }
  return g;
}

Eigen::MatrixXd Kernel::log_grads(std::int64_t c, const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  Eigen::MatrixXd out(card_, dim_);
  for (int s = 0; s < card_; ++s) out.row(s) = log_grad(c, s, theta).transpose();
  return out;
}

}  // namespace natgrad
