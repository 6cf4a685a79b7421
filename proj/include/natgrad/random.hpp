#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace natgrad {

using Rng = std::mt19937_64;

// Built from raw engine bits so streams are identical across standard libraries.
inline double uniform01(Rng& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& g, double a, double b) { return a + (b - a) * uniform01(g); }

inline int uniform_int(Rng& g, int n) {
  return static_cast<int>(uniform01(g) * n);
}

/// Inverse-CDF draw from unnormalised non-negative weights.
inline int categorical(Rng& g, const Eigen::Ref<const Eigen::VectorXd>& w) {
  const double total = w.sum();
  double u = uniform01(g) * total;
  const int n = static_cast<int>(w.size());
  for (int i = 0; i < n; ++i) {
    if (u < w[i]) return i;
    u -= w[i];
  }
  for (int i = n - 1; i >= 0; --i)
    if (w[i] > 0) return i;
  return n - 1;
}

inline Eigen::VectorXd uniform_vector(Rng& g, int n, double a, double b) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = uniform(g, a, b);
  return v;
}

}  // namespace natgrad
