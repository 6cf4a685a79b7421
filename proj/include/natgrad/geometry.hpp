#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "natgrad/dag_model.hpp"
#include "natgrad/family.hpp"
#include "natgrad/linalg.hpp"
#include "natgrad/state_space.hpp"

namespace natgrad {

class RecognitionModel;

/// Surjection X: Z -> X between flat index sets.
class CoarseGraining {
 public:
  CoarseGraining(std::vector<int> map, int codomain_size);

  static CoarseGraining identity(int n);
  /// Joint configurations of `space` onto configurations of `subset`.
  static CoarseGraining marginalisation(const StateSpace& space, std::span<const int> subset);

  int domain_size() const { return static_cast<int>(map_.size()); }
  int codomain_size() const { return static_cast<int>(atoms_.size()); }
  int operator()(int z) const { return map_.at(z); }
  const std::vector<int>& map() const { return map_; }
  const std::vector<std::vector<int>>& atoms() const { return atoms_; }

 private:
  std::vector<int> map_;
  std::vector<std::vector<int>> atoms_;
};

/// <V, W>_p = sum V W / p.
template <typename DP, typename DV, typename DW>
typename DP::Scalar fisher_inner(const Eigen::MatrixBase<DP>& p, const Eigen::MatrixBase<DV>& v,
                                 const Eigen::MatrixBase<DW>& w) {
  if (p.size() != v.size() || p.size() != w.size()) throw std::invalid_argument("fisher_inner: size mismatch");
  return (v.array() * w.array() / p.array()).sum();
}

/// X_* p: sums within atoms. Also the differential dX_* on tangent vectors.
Eigen::VectorXd pushforward(const CoarseGraining& cg, const Eigen::VectorXd& p);
Eigen::VectorXd pushforward_diff(const CoarseGraining& cg, const Eigen::VectorXd& v);
/// The |X| x |Z| 0/1 matrix of dX_*.
Eigen::MatrixXd pushforward_matrix(const CoarseGraining& cg);

struct HVDecomposition {
  Eigen::VectorXd horizontal;
  Eigen::VectorXd vertical;
};

/// V_H(z) = p(z) / p(X(z)) * (dX_* V)(X(z)), V_V = V - V_H.
HVDecomposition hv_decompose(const CoarseGraining& cg, const Eigen::VectorXd& p, const Eigen::VectorXd& v);

/// z -> p(z) / p(X(z)) U(X(z)).
Eigen::VectorXd horizontal_lift(const CoarseGraining& cg, const Eigen::VectorXd& p, const Eigen::VectorXd& u);

/// (<lift U, lift V>_p, <U, V>_{X_* p}).
std::pair<double, double> horizontal_inner_invariance(const CoarseGraining& cg, const Eigen::VectorXd& p,
                                                      const Eigen::VectorXd& u, const Eigen::VectorXd& v);

/// Column-stochastic matrix k(z | x), optionally coupled with a coarse
/// graining (support of column x inside the atom of x).
class MarkovKernelMatrix {
 public:
  explicit MarkovKernelMatrix(Eigen::MatrixXd k, std::optional<CoarseGraining> coupled = std::nullopt);

  const Eigen::MatrixXd& matrix() const { return k_; }
  const std::optional<CoarseGraining>& coupled() const { return cg_; }

 private:
  Eigen::MatrixXd k_;
  std::optional<CoarseGraining> cg_;
};

/// K_* p (z) = p(X(z)) k(z | X(z)).
Eigen::VectorXd markov_embed(const MarkovKernelMatrix& k, const Eigen::VectorXd& p);
Eigen::VectorXd markov_embed_diff(const MarkovKernelMatrix& k, const Eigen::VectorXd& u);

/// Columns d p / d params_i = diag(p) S.
Eigen::MatrixXd model_jacobian(const ParametrisedFamily& family, const Eigen::VectorXd& params);

struct CylindricityResult {
  bool is_cylindrical = false;
  int dim_T = 0;
  int dim_TH = 0;
  int dim_TV = 0;
  bool rank_unstable = false;
};

/// Dimensions of T, T n H_p and T n V_p for T = span of the Jacobian
/// columns at p, computed in Fisher-orthonormal coordinates.
CylindricityResult cylindricity_check(const Eigen::MatrixXd& jacobian, const CoarseGraining& cg,
                                      const Eigen::VectorXd& p, double rank_tol = 1e-9);

/// Riemannian gradient J G^+ J^T df as a tangent vector on the simplex.
Eigen::VectorXd grad_on_model(const ParametrisedFamily& family, const Eigen::VectorXd& params,
                              const Eigen::VectorXd& df, double pinv_rel_tol = kPinvRelTol);

/// Fisher-Rao gradient p (df - <p, df>) on the full simplex.
Eigen::VectorXd simplex_gradient(const Eigen::VectorXd& p, const Eigen::VectorXd& df);

/// d/dq of KL(target || q).
Eigen::VectorXd kl_to_target_derivative(const Eigen::VectorXd& target, const Eigen::VectorXd& q);

/// Softmax over n states with n logits.
ParametrisedFamily simplex_family(int n);
/// K_*(softmax(theta)), theta one logit per x.
ParametrisedFamily markov_image_family(const MarkovKernelMatrix& k);
/// p0 + t v, one parameter.
ParametrisedFamily linear_curve_family(const Eigen::VectorXd& p0, const Eigen::VectorXd& v);
/// X_* composed with a family on Z.
ParametrisedFamily pushforward_family(const ParametrisedFamily& family, const CoarseGraining& cg);

struct ProperProbe {
  int rank_at_point = 0;
  int max_rank_nearby = 0;
  bool proper = true;
};

/// Jacobian rank at the point against 10 nearby points (relative shift 1e-4).
ProperProbe properness_probe(const ParametrisedFamily& family, const Eigen::VectorXd& params,
                             double rank_tol = 1e-9, std::uint64_t seed = 0);

struct InvarianceResult {
  double residual = 0.0;  ///< NaN when flagged
  bool flagged_singular = false;
};

/// || dX_*(grad^M (f o X_*)) - grad^{X_* M} f || in the Fisher-Rao norm at
/// X_* p, with `df_x` the derivative of f on the codomain.
InvarianceResult gradient_invariance_residual(const ParametrisedFamily& family, const Eigen::VectorXd& params,
                                              const CoarseGraining& cg,
                                              const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& df_x);

/// q(z | x) = softmax of one logit per z within its atom.
ConditionalFamily atom_softmax_family(const CoarseGraining& cg);
/// ln p(z | X(z); xi) from a family on Z, i.e. the exact fit of atom_softmax_family.
Eigen::VectorXd atom_softmax_fit(const ParametrisedFamily& family, const CoarseGraining& cg,
                                 const Eigen::VectorXd& xi);
/// d eta / d xi of atom_softmax_fit: S(z) - E[S | X(z)].
Eigen::MatrixXd atom_softmax_fit_jacobian(const ParametrisedFamily& family, const CoarseGraining& cg,
                                          const Eigen::VectorXd& xi);
/// The model's own conditional p(z | X(z); xi') with eta = xi'.
ConditionalFamily own_conditional_family(const ParametrisedFamily& family, const CoarseGraining& cg);
/// q(x_H | x_V; eta) over joint configurations (coarse graining onto V).
ConditionalFamily recognition_family(const RecognitionModel& recog);

struct ProductExtension {
  Eigen::VectorXd p;
  Eigen::MatrixXd dH;  ///< |Z| x d
  Eigen::MatrixXd dV;  ///< |Z| x d'
  Eigen::MatrixXd GH;
  Eigen::MatrixXd GV;
  Eigen::MatrixXd cross;           ///< <dH_i, dV_j>
  Eigen::MatrixXd marginal_fisher; ///< Fisher of xi -> X_* p_xi, enumerated directly
  CylindricityResult cylindricity;
};

/// p(z; xi, eta) = p(X(z); xi) q(z | X(z); eta) with its horizontal and
/// vertical tangents and Gram matrices.
ProductExtension product_extension_assemble(const ParametrisedFamily& family, const CoarseGraining& cg,
                                            const ConditionalFamily& cond, const Eigen::VectorXd& xi,
                                            const Eigen::VectorXd& eta);

enum class JacobianMode { FiniteDifference, Analytic };

struct DiffComplResult {
  Eigen::MatrixXd GH;               ///< G - J^T G^V J
  Eigen::MatrixXd marginal_fisher;  ///< direct enumeration
  Eigen::MatrixXd correction;       ///< J^T G^V J
  Eigen::MatrixXd J;                ///< d eta / d xi
  double max_abs_diff = 0.0;
};

/// G^H through the full Fisher minus the vertical correction.
DiffComplResult gh_via_diffcompl(const ParametrisedFamily& family, const CoarseGraining& cg,
                                 const ConditionalFamily& cond,
                                 const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& eta_of_xi,
                                 const Eigen::VectorXd& xi, JacobianMode mode,
                                 const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& analytic_j = {});

/// Frobenius norms of the (r, s) sub-blocks for consecutive blocks of the given sizes.
Eigen::MatrixXd block_norms(const Eigen::MatrixXd& m, const std::vector<int>& sizes);

/// Central-difference Jacobian of a vector map, step h.
Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double h = 1e-5);

}  // namespace natgrad
