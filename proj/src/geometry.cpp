#include "natgrad/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "natgrad/fisher.hpp"
#include "natgrad/random.hpp"
#include "natgrad/wake_sleep.hpp"

namespace natgrad {

CoarseGraining::CoarseGraining(std::vector<int> map, int codomain_size)
    : map_(std::move(map)), atoms_(codomain_size) {
  if (codomain_size < 1) throw std::invalid_argument("coarse graining needs a nonempty codomain");
  for (int z = 0; z < domain_size(); ++z) {
    const int x = map_[z];
    if (x < 0 || x >= codomain_size) throw std::out_of_range("coarse graining maps outside its codomain");
    atoms_[x].push_back(z);
  }
  for (int x = 0; x < codomain_size; ++x)
    if (atoms_[x].empty()) throw std::invalid_argument("coarse graining is not surjective (empty atom " + std::to_string(x) + ")");
}

CoarseGraining CoarseGraining::identity(int n) {
  std::vector<int> m(n);
  for (int i = 0; i < n; ++i) m[i] = i;
  return CoarseGraining(std::move(m), n);
}

CoarseGraining CoarseGraining::marginalisation(const StateSpace& space, std::span<const int> subset) {
  SubsetIndexer idx(space, subset);
  std::vector<int> m(space.total_configs());
  Config x{std::vector<int>(space.unit_count(), 0)};
  const auto units = space.all_units();
  std::int64_t i = 0;
  do {
    m[i++] = static_cast<int>(idx(x));
  } while (next_config(x, units, space));
  return CoarseGraining(std::move(m), static_cast<int>(idx.count()));
}

Eigen::VectorXd pushforward(const CoarseGraining& cg, const Eigen::VectorXd& p) {
  if (p.size() != cg.domain_size()) throw std::invalid_argument("pushforward: size mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(cg.codomain_size());
  for (int z = 0; z < cg.domain_size(); ++z) out[cg(z)] += p[z];
  return out;
}

Eigen::VectorXd pushforward_diff(const CoarseGraining& cg, const Eigen::VectorXd& v) {
  return pushforward(cg, v);
}

Eigen::MatrixXd pushforward_matrix(const CoarseGraining& cg) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(cg.codomain_size(), cg.domain_size());
  for (int z = 0; z < cg.domain_size(); ++z) d(cg(z), z) = 1.0;
  return d;
}

Eigen::VectorXd horizontal_lift(const CoarseGraining& cg, const Eigen::VectorXd& p, const Eigen::VectorXd& u) {
  if (p.size() != cg.domain_size() || u.size() != cg.codomain_size())
    throw std::invalid_argument("horizontal_lift: size mismatch");
  const Eigen::VectorXd px = pushforward(cg, p);
  Eigen::VectorXd out(p.size());
  for (int z = 0; z < cg.domain_size(); ++z) out[z] = p[z] / px[cg(z)] * u[cg(z)];
  return out;
}

HVDecomposition hv_decompose(const CoarseGraining& cg, const Eigen::VectorXd& p, const Eigen::VectorXd& v) {
  if (v.size() != p.size()) throw std::invalid_argument("hv_decompose: size mismatch");
  HVDecomposition d;
  d.horizontal = horizontal_lift(cg, p, pushforward_diff(cg, v));
  d.vertical = v - d.horizontal;
  return d;
}

std::pair<double, double> horizontal_inner_invariance(const CoarseGraining& cg, const Eigen::VectorXd& p,
                                                      const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  const Eigen::VectorXd px = pushforward(cg, p);
  return {fisher_inner(p, horizontal_lift(cg, p, u), horizontal_lift(cg, p, v)), fisher_inner(px, u, v)};
}

MarkovKernelMatrix::MarkovKernelMatrix(Eigen::MatrixXd k, std::optional<CoarseGraining> coupled)
    : k_(std::move(k)), cg_(std::move(coupled)) {
  if ((k_.array() < 0.0).any()) throw std::invalid_argument("Markov kernel has negative entries");
  for (Eigen::Index x = 0; x < k_.cols(); ++x)
    if (std::abs(k_.col(x).sum() - 1.0) > 1e-12)
      throw std::invalid_argument("Markov kernel column " + std::to_string(x) + " does not sum to 1");
  if (cg_) {
    if (cg_->domain_size() != k_.rows() || cg_->codomain_size() != k_.cols())
      throw std::invalid_argument("Markov kernel shape does not match the coarse graining");
    for (Eigen::Index z = 0; z < k_.rows(); ++z)
      for (Eigen::Index x = 0; x < k_.cols(); ++x)
        if ((*cg_)(static_cast<int>(z)) != x && k_(z, x) != 0.0)
          throw std::invalid_argument("Markov kernel puts mass outside the atom of x");
  }
}

Eigen::VectorXd markov_embed(const MarkovKernelMatrix& k, const Eigen::VectorXd& p) {
  if (!k.coupled()) throw std::invalid_argument("Markov embedding needs a kernel coupled with a coarse graining");
  if (p.size() != k.matrix().cols()) throw std::invalid_argument("markov_embed: size mismatch");
  return k.matrix() * p;
}

Eigen::VectorXd markov_embed_diff(const MarkovKernelMatrix& k, const Eigen::VectorXd& u) {
  return markov_embed(k, u);
}

Eigen::MatrixXd model_jacobian(const ParametrisedFamily& family, const Eigen::VectorXd& params) {
  return family.prob(params).asDiagonal() * family.score(params);
}

namespace {

struct RankInfo {
  int rank = 0;
  bool unstable = false;
};

RankInfo rank_info(const Eigen::MatrixXd& a, double tol) {
  RankInfo r;
  if (a.size() == 0) return r;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv[0] == 0.0) return r;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    const double rel = sv[i] / sv[0];
    if (rel > tol) ++r.rank;
    if (rel > tol / 10.0 && rel < tol * 10.0) r.unstable = true;
  }
  return r;
}

Eigen::MatrixXd horizontal_basis(const CoarseGraining& cg, const Eigen::VectorXd& p) {
  const int nx = cg.codomain_size();
  Eigen::MatrixXd h(cg.domain_size(), std::max(0, nx - 1));
  for (int x = 0; x + 1 < nx; ++x) {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(nx);
    u[x] = 1.0;
    u[nx - 1] = -1.0;
    h.col(x) = horizontal_lift(cg, p, u);
  }
  return h;
}

}  // namespace

CylindricityResult cylindricity_check(const Eigen::MatrixXd& jacobian, const CoarseGraining& cg,
                                      const Eigen::VectorXd& p, double rank_tol) {
  if (jacobian.rows() != cg.domain_size() || p.size() != cg.domain_size())
    throw std::invalid_argument("cylindricity_check: size mismatch");
  const Eigen::VectorXd isp = p.cwiseSqrt().cwiseInverse();
  const Eigen::VectorXd px = pushforward(cg, p);
  const Eigen::MatrixXd jt = isp.asDiagonal() * jacobian;
  const Eigen::MatrixXd djt = px.cwiseSqrt().cwiseInverse().asDiagonal() * (pushforward_matrix(cg) * jacobian);
  const Eigen::MatrixXd ht = isp.asDiagonal() * horizontal_basis(cg, p);
  Eigen::MatrixXd cat(jt.rows(), jt.cols() + ht.cols());
  cat << jt, ht;

  const RankInfo rt = rank_info(jt, rank_tol);
  const RankInfo rd = rank_info(djt, rank_tol);
  const RankInfo rh = rank_info(ht, rank_tol);
  const RankInfo rc = rank_info(cat, rank_tol);
  CylindricityResult res;
  res.dim_T = rt.rank;
  res.dim_TV = rt.rank - rd.rank;
  res.dim_TH = rt.rank + rh.rank - rc.rank;
  res.is_cylindrical = res.dim_TH + res.dim_TV == res.dim_T;
  res.rank_unstable = rt.unstable || rd.unstable || rh.unstable || rc.unstable;
  return res;
}

Eigen::VectorXd grad_on_model(const ParametrisedFamily& family, const Eigen::VectorXd& params,
                              const Eigen::VectorXd& df, double pinv_rel_tol) {
  const Eigen::VectorXd p = family.prob(params);
  const Eigen::MatrixXd s = family.score(params);
  if (df.size() != p.size()) throw std::invalid_argument("grad_on_model: derivative has the wrong size");
  const Eigen::MatrixXd j = p.asDiagonal() * s;
  const Eigen::MatrixXd g = full_fisher_oracle(p, s);
  return j * (pseudoinverse(g, pinv_rel_tol) * (j.transpose() * df));
}

Eigen::VectorXd simplex_gradient(const Eigen::VectorXd& p, const Eigen::VectorXd& df) {
  return p.cwiseProduct(df.array().matrix() - Eigen::VectorXd::Constant(p.size(), p.dot(df)));
}

Eigen::VectorXd kl_to_target_derivative(const Eigen::VectorXd& target, const Eigen::VectorXd& q) {
  return -target.cwiseQuotient(q);
}

ParametrisedFamily simplex_family(int n) {
  auto prob = [n](const Eigen::VectorXd& th) -> Eigen::VectorXd {
    if (th.size() != n) throw std::invalid_argument("simplex_family: wrong parameter length");
    Eigen::VectorXd e = (th.array() - th.maxCoeff()).exp();
    return e / e.sum();
  };
  auto score = [prob, n](const Eigen::VectorXd& th) -> Eigen::MatrixXd {
    const Eigen::VectorXd s = prob(th);
    Eigen::MatrixXd out = Eigen::MatrixXd::Identity(n, n);
    out.rowwise() -= s.transpose();
    return out;
  };
  return {n, prob, score};
}

ParametrisedFamily markov_image_family(const MarkovKernelMatrix& k) {
  const Eigen::MatrixXd km = k.matrix();
  const ParametrisedFamily base = simplex_family(static_cast<int>(km.cols()));
  auto prob = [km, base](const Eigen::VectorXd& th) -> Eigen::VectorXd { return km * base.prob(th); };
  auto score = [km, base](const Eigen::VectorXd& th) -> Eigen::MatrixXd {
    const Eigen::VectorXd s = base.prob(th);
    const Eigen::VectorXd p = km * s;
    const Eigen::MatrixXd j = km * (s.asDiagonal() * base.score(th));
    return p.cwiseInverse().asDiagonal() * j;
  };
  return {static_cast<int>(km.cols()), prob, score};
}

ParametrisedFamily linear_curve_family(const Eigen::VectorXd& p0, const Eigen::VectorXd& v) {
  auto prob = [p0, v](const Eigen::VectorXd& t) -> Eigen::VectorXd { return p0 + t[0] * v; };
  auto score = [p0, v](const Eigen::VectorXd& t) -> Eigen::MatrixXd {
    return v.cwiseQuotient(p0 + t[0] * v);
  };
  return {1, prob, score};
}

ParametrisedFamily pushforward_family(const ParametrisedFamily& family, const CoarseGraining& cg) {
  auto prob = [family, cg](const Eigen::VectorXd& xi) -> Eigen::VectorXd {
    return pushforward(cg, family.prob(xi));
  };
  auto score = [family, cg](const Eigen::VectorXd& xi) -> Eigen::MatrixXd {
    const Eigen::VectorXd p = family.prob(xi);
    const Eigen::VectorXd px = pushforward(cg, p);
    return px.cwiseInverse().asDiagonal() * (pushforward_matrix(cg) * (p.asDiagonal() * family.score(xi)));
  };
  return {family.dim, prob, score};
}

Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double h) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd j(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd a = x, b = x;
    a[i] += h;
    b[i] -= h;
    j.col(i) = (f(a) - f(b)) / (2.0 * h);
  }
  return j;
}

ProperProbe properness_probe(const ParametrisedFamily& family, const Eigen::VectorXd& params, double rank_tol,
                             std::uint64_t seed) {
  auto weighted_rank = [&](const Eigen::VectorXd& th) {
    const Eigen::VectorXd p = family.prob(th);
    return rank_info(p.cwiseSqrt().asDiagonal() * family.score(th), rank_tol).rank;
  };
  ProperProbe pr;
  pr.rank_at_point = weighted_rank(params);
  pr.max_rank_nearby = pr.rank_at_point;
  Rng rng(seed);
  const double scale = 1e-4 * std::max(1.0, params.size() ? params.cwiseAbs().maxCoeff() : 0.0);
  for (int t = 0; t < 10; ++t) {
    const Eigen::VectorXd th = params + scale * uniform_vector(rng, static_cast<int>(params.size()), -1.0, 1.0);
    pr.max_rank_nearby = std::max(pr.max_rank_nearby, weighted_rank(th));
  }
  pr.proper = pr.rank_at_point == pr.max_rank_nearby;
  return pr;
}

InvarianceResult gradient_invariance_residual(const ParametrisedFamily& family, const Eigen::VectorXd& params,
                                              const CoarseGraining& cg,
                                              const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& df_x) {
  const ParametrisedFamily fx = pushforward_family(family, cg);
  InvarianceResult res;
  if (!properness_probe(family, params).proper || !properness_probe(fx, params).proper) {
    res.flagged_singular = true;
    res.residual = std::numeric_limits<double>::quiet_NaN();
    return res;
  }
  const Eigen::VectorXd p = family.prob(params);
  const Eigen::VectorXd px = pushforward(cg, p);
  const Eigen::VectorXd dfx = df_x(px);
  Eigen::VectorXd dfz(p.size());
  for (int z = 0; z < cg.domain_size(); ++z) dfz[z] = dfx[cg(z)];
  const Eigen::VectorXd lhs = pushforward_diff(cg, grad_on_model(family, params, dfz));
  const Eigen::VectorXd rhs = grad_on_model(fx, params, dfx);
  const Eigen::VectorXd diff = lhs - rhs;
  res.residual = std::sqrt(std::max(0.0, fisher_inner(px, diff, diff)));
  return res;
}

ConditionalFamily atom_softmax_family(const CoarseGraining& cg) {
  const int nz = cg.domain_size();
  auto prob = [cg, nz](const Eigen::VectorXd& eta) -> Eigen::VectorXd {
    if (eta.size() != nz) throw std::invalid_argument("atom_softmax_family: wrong parameter length");
    Eigen::VectorXd q(nz);
    for (const auto& atom : cg.atoms()) {
      double m = -std::numeric_limits<double>::infinity();
      for (int z : atom) m = std::max(m, eta[z]);
      double s = 0.0;
      for (int z : atom) s += std::exp(eta[z] - m);
      for (int z : atom) q[z] = std::exp(eta[z] - m) / s;
    }
    return q;
  };
  auto score = [cg, nz, prob](const Eigen::VectorXd& eta) -> Eigen::MatrixXd {
    const Eigen::VectorXd q = prob(eta);
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(nz, nz);
    for (const auto& atom : cg.atoms())
      for (int z : atom) {
        for (int w : atom) s(z, w) = -q[w];
        s(z, z) += 1.0;
      }
    return s;
  };
  return {nz, prob, score};
}

Eigen::VectorXd atom_softmax_fit(const ParametrisedFamily& family, const CoarseGraining& cg,
                                 const Eigen::VectorXd& xi) {
  const Eigen::VectorXd p = family.prob(xi);
  const Eigen::VectorXd px = pushforward(cg, p);
  Eigen::VectorXd eta(p.size());
  for (int z = 0; z < cg.domain_size(); ++z) eta[z] = std::log(p[z]) - std::log(px[cg(z)]);
  return eta;
}

namespace {

/// Rows S(z) - sum_{z' in atom} p(z' | x) S(z').
Eigen::MatrixXd conditional_scores(const Eigen::VectorXd& p, const Eigen::MatrixXd& s, const CoarseGraining& cg) {
  const Eigen::VectorXd px = pushforward(cg, p);
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(cg.codomain_size(), s.cols());
  for (int z = 0; z < cg.domain_size(); ++z) mean.row(cg(z)) += p[z] / px[cg(z)] * s.row(z);
  Eigen::MatrixXd out(s.rows(), s.cols());
  for (int z = 0; z < cg.domain_size(); ++z) out.row(z) = s.row(z) - mean.row(cg(z));
  return out;
}

}  // namespace

Eigen::MatrixXd atom_softmax_fit_jacobian(const ParametrisedFamily& family, const CoarseGraining& cg,
                                          const Eigen::VectorXd& xi) {
  return conditional_scores(family.prob(xi), family.score(xi), cg);
}

ConditionalFamily own_conditional_family(const ParametrisedFamily& family, const CoarseGraining& cg) {
  auto prob = [family, cg](const Eigen::VectorXd& xi) -> Eigen::VectorXd {
    const Eigen::VectorXd p = family.prob(xi);
    const Eigen::VectorXd px = pushforward(cg, p);
    Eigen::VectorXd q(p.size());
    for (int z = 0; z < cg.domain_size(); ++z) q[z] = p[z] / px[cg(z)];
    return q;
  };
  auto score = [family, cg](const Eigen::VectorXd& xi) -> Eigen::MatrixXd {
    return conditional_scores(family.prob(xi), family.score(xi), cg);
  };
  return {family.dim, prob, score};
}

ConditionalFamily recognition_family(const RecognitionModel& recog) {
  const RecognitionModel* r = &recog;
  auto prob = [r](const Eigen::VectorXd& eta) -> Eigen::VectorXd {
    return recog_log_table(*r, eta).array().exp();
  };
  auto score = [r](const Eigen::VectorXd& eta) -> Eigen::MatrixXd { return recog_scores(*r, eta); };
  return {recog.dim(), prob, score};
}

ProductExtension product_extension_assemble(const ParametrisedFamily& family, const CoarseGraining& cg,
                                            const ConditionalFamily& cond, const Eigen::VectorXd& xi,
                                            const Eigen::VectorXd& eta) {
  const Eigen::VectorXd pz = family.prob(xi);
  if (pz.size() != cg.domain_size()) throw std::invalid_argument("family and coarse graining disagree on |Z|");
  const Eigen::VectorXd px = pushforward(cg, pz);
  const Eigen::MatrixXd sx =
      px.cwiseInverse().asDiagonal() * (pushforward_matrix(cg) * (pz.asDiagonal() * family.score(xi)));
  const Eigen::VectorXd q = cond.prob(eta);
  const Eigen::MatrixXd r = cond.score(eta);

  ProductExtension ext;
  ext.p.resize(pz.size());
  ext.dH.resize(pz.size(), sx.cols());
  ext.dV.resize(pz.size(), r.cols());
  for (int z = 0; z < cg.domain_size(); ++z) {
    ext.p[z] = px[cg(z)] * q[z];
    ext.dH.row(z) = ext.p[z] * sx.row(cg(z));
    ext.dV.row(z) = ext.p[z] * r.row(z);
  }
  const Eigen::VectorXd ip = ext.p.cwiseInverse();
  ext.GH = ext.dH.transpose() * ip.asDiagonal() * ext.dH;
  ext.GV = ext.dV.transpose() * ip.asDiagonal() * ext.dV;
  ext.cross = ext.dH.transpose() * ip.asDiagonal() * ext.dV;
  ext.marginal_fisher = full_fisher_oracle(px, sx);
  Eigen::MatrixXd tangents(ext.p.size(), ext.dH.cols() + ext.dV.cols());
  tangents << ext.dH, ext.dV;
  ext.cylindricity = cylindricity_check(tangents, cg, ext.p);
  return ext;
}

DiffComplResult gh_via_diffcompl(const ParametrisedFamily& family, const CoarseGraining& cg,
                                 const ConditionalFamily& cond,
                                 const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& eta_of_xi,
                                 const Eigen::VectorXd& xi, JacobianMode mode,
                                 const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& analytic_j) {
  DiffComplResult res;
  const Eigen::VectorXd eta = eta_of_xi(xi);
  if (mode == JacobianMode::Analytic) {
    if (!analytic_j) throw std::invalid_argument("analytic Jacobian requested but none supplied");
    res.J = analytic_j(xi);
  } else {
    res.J = fd_jacobian(eta_of_xi, xi, 1e-5);
  }
  const ProductExtension ext = product_extension_assemble(family, cg, cond, xi, eta);
  const Eigen::MatrixXd g = full_fisher_oracle(family, xi);
  res.correction = res.J.transpose() * ext.GV * res.J;
  res.GH = g - res.correction;
  res.marginal_fisher = ext.marginal_fisher;
  res.max_abs_diff = (res.GH - res.marginal_fisher).cwiseAbs().maxCoeff();
  return res;
}

Eigen::MatrixXd block_norms(const Eigen::MatrixXd& m, const std::vector<int>& sizes) {
  const int n = static_cast<int>(sizes.size());
  Eigen::MatrixXd out(n, n);
  int ro = 0;
  for (int a = 0; a < n; ++a) {
    int co = 0;
    for (int b = 0; b < n; ++b) {
      out(a, b) = m.block(ro, co, sizes[a], sizes[b]).norm();
      co += sizes[b];
    }
    ro += sizes[a];
  }
  return out;
}

}  // namespace natgrad
