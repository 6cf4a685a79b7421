#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace natgrad {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline constexpr double kPinvRelTol = 1e-12;

/// Largest |A - A^T| entry relative to max(1, max |A|).
template <typename Derived>
typename Derived::Scalar asymmetry(const Eigen::MatrixBase<Derived>& a) {
  using S = typename Derived::Scalar;
  if (a.size() == 0) return S(0);
  const S scale = std::max(S(1), a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() / scale;
}

/// Moore-Penrose inverse of a symmetric matrix by spectral decomposition.
/// Eigenvalues with |lambda| < rel_tol * max|lambda| * dim are dropped.
template <typename Derived>
Mat<typename Derived::Scalar> pseudoinverse(const Eigen::MatrixBase<Derived>& a,
                                            typename Derived::Scalar rel_tol = kPinvRelTol) {
  using S = typename Derived::Scalar;
  if (a.rows() != a.cols()) throw std::invalid_argument("pseudoinverse: matrix is not square");
  const Eigen::Index n = a.rows();
  if (n == 0) return Mat<S>(0, 0);
  if (asymmetry(a) > S(1e-10)) throw std::invalid_argument("pseudoinverse: matrix is not symmetric");
  const Mat<S> sym = (a + a.transpose()) / S(2);
  Eigen::SelfAdjointEigenSolver<Mat<S>> es(sym);
  if (es.info() != Eigen::Success) throw std::runtime_error("pseudoinverse: eigensolver failed");
  const Vec<S>& lam = es.eigenvalues();
  const S cutoff = rel_tol * lam.cwiseAbs().maxCoeff() * static_cast<S>(n);
  Vec<S> inv = Vec<S>::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i)
    if (std::abs(lam[i]) > cutoff && lam[i] != S(0)) inv[i] = S(1) / lam[i];
  const Mat<S>& u = es.eigenvectors();
  return u * inv.asDiagonal() * u.transpose();
}

/// Max-abs residuals of the four Penrose identities
///   A X A = A,  X A X = X,  (A X)^T = A X,  (X A)^T = X A.
template <typename DA, typename DX>
std::array<typename DA::Scalar, 4> penrose_residuals(const Eigen::MatrixBase<DA>& a,
                                                     const Eigen::MatrixBase<DX>& x) {
  using S = typename DA::Scalar;
  const Mat<S> ax = a * x;
  const Mat<S> xa = x * a;
  auto mx = [](const Mat<S>& m) { return m.size() ? m.cwiseAbs().maxCoeff() : S(0); };
  return {mx(ax * a - a), mx(xa * x - x), mx(ax.transpose() - ax), mx(xa.transpose() - xa)};
}

/// Numerical rank from singular values with a relative cutoff.
template <typename Derived>
int numerical_rank(const Eigen::MatrixBase<Derived>& a, typename Derived::Scalar rel_tol) {
  using S = typename Derived::Scalar;
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<Mat<S>> svd(a);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv[0] == S(0)) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > rel_tol * sv[0]) ++r;
  return r;
}

/// Orthonormal basis of the column space (relative SVD cutoff).
template <typename Derived>
Mat<typename Derived::Scalar> column_basis(const Eigen::MatrixBase<Derived>& a,
                                           typename Derived::Scalar rel_tol) {
  using S = typename Derived::Scalar;
  if (a.cols() == 0) return Mat<S>(a.rows(), 0);
  Eigen::JacobiSVD<Mat<S>> svd(a, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  int r = 0;
  if (sv.size() && sv[0] > S(0))
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv[i] > rel_tol * sv[0]) ++r;
  return svd.matrixU().leftCols(r);
}

}  // namespace natgrad
