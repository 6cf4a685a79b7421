#pragma once

#include <functional>

#include <Eigen/Dense>

namespace natgrad {

/// A smooth parametrised family of strictly positive distributions on a
/// finite set, with its score matrix (row z = d ln p(z) / d params).
struct ParametrisedFamily {
  int dim = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> prob;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> score;
};

/// A family of conditionals q(z | X(z); eta) over the atoms of a coarse
/// graining. `prob` returns q(z | X(z)) indexed by z, `score` its log-gradients.
struct ConditionalFamily {
  int dim = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> prob;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> score;
};

}  // namespace natgrad
