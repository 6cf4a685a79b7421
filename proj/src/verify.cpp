#include "natgrad/verify.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <iterator>
#include <limits>
#include <stdexcept>
#include <thread>

#include "natgrad/builders.hpp"
#include "natgrad/fisher.hpp"
#include "natgrad/geometry.hpp"
#include "natgrad/objective.hpp"
#include "natgrad/sampler.hpp"
#include "natgrad/wake_sleep.hpp"

namespace natgrad {

namespace {

using Checks = std::vector<CheckResult>;

void below(Checks& out, const std::string& suite, const std::string& name, double residual, double tol) {
  out.push_back({suite, name, residual, tol, "<", std::isfinite(residual) && residual < tol});
}

void above(Checks& out, const std::string& suite, const std::string& name, double residual, double tol) {
  out.push_back({suite, name, residual, tol, ">", std::isfinite(residual) && residual > tol});
}

void expected_failure(Checks& out, const std::string& suite, const std::string& name, bool failed) {
  out.push_back({suite, name, failed ? 1.0 : 0.0, 0.5, "expected", failed});
}

double max_abs(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& ref) {
  return max_abs(a - ref) / std::max(max_abs(ref), 1e-8);
}

/// Symmetric PSD matrix of the given rank with nonzero eigenvalues in [0.1, 4].
Eigen::MatrixXd random_psd(Rng& rng, int n, int rank) {
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = uniform(rng, -1.0, 1.0);
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(m).householderQ();
  const Eigen::VectorXd lam = uniform_vector(rng, rank, 0.1, 4.0);
  return q.leftCols(rank) * lam.asDiagonal() * q.leftCols(rank).transpose();
}

Eigen::VectorXd random_simplex_point(Rng& rng, int n) {
  Eigen::VectorXd p = uniform_vector(rng, n, 0.05, 1.0);
  return p / p.sum();
}

Eigen::VectorXd random_tangent(Rng& rng, int n) {
  Eigen::VectorXd v = uniform_vector(rng, n, -1.0, 1.0);
  return v.array() - v.mean();
}

CoarseGraining random_coarse_graining(Rng& rng, int nz, int nx) {
  std::vector<int> map(nz);
  for (int z = 0; z < nz; ++z) map[z] = z < nx ? z : uniform_int(rng, nx);
  std::shuffle(map.begin(), map.end(), rng);
  return CoarseGraining(std::move(map), nx);
}

MarkovKernelMatrix random_coupled_kernel(Rng& rng, const CoarseGraining& cg) {
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(cg.domain_size(), cg.codomain_size());
  for (int x = 0; x < cg.codomain_size(); ++x) {
    double s = 0.0;
    for (int z : cg.atoms()[x]) s += (k(z, x) = uniform(rng, 0.05, 1.0));
    k.col(x) /= s;
  }
  return MarkovKernelMatrix(std::move(k), cg);
}

std::vector<int> block_sizes(const DagModel& model) {
  std::vector<int> sizes;
  for (int r : model.order()) sizes.push_back(model.block_dim(r));
  return sizes;
}

Checks fisher_suite(std::uint64_t seed) {
  const std::string s = "fisher";
  Checks out;
  Rng rng(seed);

  double off = 0.0, local = 0.0, psd = 0.0;
  for (int t = 0; t < 20; ++t) {
    const int nodes = 2 + uniform_int(rng, 9);
    const DagModel model = random_sigmoid_net(rng, nodes, 1 + uniform_int(rng, nodes));
    const ParamVector xi = random_params(model, rng, -1.0, 1.0);
    const Eigen::MatrixXd full = full_fisher_oracle(model, xi);
    const BlockMatrix bm = block_fisher(model, xi);
    const auto offs = bm.offsets();
    Eigen::MatrixXd masked = full;
    for (std::size_t b = 0; b < bm.blocks.size(); ++b) {
      const auto& g = bm.blocks[b];
      local = std::max(local, max_abs(full.block(offs[b], offs[b], g.rows(), g.cols()) - g));
      masked.block(offs[b], offs[b], g.rows(), g.cols()).setZero();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
      const double top = es.eigenvalues().cwiseAbs().maxCoeff();
      if (top > 0) psd = std::max(psd, -es.eigenvalues().minCoeff() / top);
    }
    off = std::max(off, max_abs(masked));
  }
  below(out, s, "block_structure_off_block_max", off, 1e-10);
  below(out, s, "block_structure_local_block_match", local, 1e-10);
  below(out, s, "blocks_positive_semidefinite", psd, 1e-10);

  double cov = 0.0;
  for (int t = 0; t < 10; ++t) {
    const DagModel model = t % 2 ? random_mixed_net(rng, 5, 2) : random_sigmoid_net(rng, 6, 3);
    const ParamVector xi = random_params(model, rng, -1.0, 1.0);
    for (int r = 0; r < model.node_count(); ++r) {
      if (model.kernel(r).family() == KernelFamily::TabularLogit) continue;
      cov = std::max(cov, max_abs(expfam_fisher_block(model, xi, r) - local_fisher_block(model, xi, r)));
    }
  }
  below(out, s, "expfam_covariance_form", cov, 1e-12);

  double rewrite = 0.0;
  for (int npa = 0; npa <= 4; ++npa) {
    const StateSpace space = StateSpace::binary(npa + 1, {npa});
    std::vector<int> pa(npa);
    for (int j = 0; j < npa; ++j) pa[j] = j;
    const Kernel sig(npa, pa, KernelSpec::sigmoid(), space);
    const Kernel ef(npa, pa, sigmoid_as_exp_family(npa), space);
    const Eigen::VectorXd theta = uniform_vector(rng, npa + 1, -2.0, 2.0);
    for (std::int64_t c = 0; c < sig.parent_configs(); ++c)
      rewrite = std::max(rewrite, max_abs(sig.probs(c, theta) - ef.probs(c, theta)));
  }
  below(out, s, "sigmoid_as_expfam_kernel", rewrite, 1e-12);

  for (bool deep : {false, true}) {
    const DagModel m = layered_sigmoid_net(3, 3, deep);
    const auto rep = structural_zero_report(m, rng);
    const double expect = deep ? 648.0 : 486.0;
    below(out, s, deep ? "deep_3x3x3_zero_count" : "shallow_3x9_zero_count",
          std::abs(static_cast<double>(rep.report.zeros) - expect), 0.5);
  }
  {
    const auto sh = structural_zero_report(layered_sigmoid_net(3, 3, false), rng).report.zeros;
    const auto dp = structural_zero_report(layered_sigmoid_net(3, 3, true), rng).report.zeros;
    below(out, s, "zero_count_difference", std::abs(static_cast<double>(dp - sh) - 162.0), 0.5);
    const auto sh2 = structural_zero_report(layered_sigmoid_net(2, 2, false), rng).report.nonzeros;
    const auto dp2 = structural_zero_report(layered_sigmoid_net(2, 2, true), rng).report.nonzeros;
    const LayeredPrediction pred = layered_prediction(2, 2);
    below(out, s, "layered_formula_n2_l2_shallow",
          std::abs(static_cast<double>(sh2 - pred.shallow_nonzeros)) + std::abs(static_cast<double>(sh2 - 32)), 0.5);
    below(out, s, "layered_formula_n2_l2_deep",
          std::abs(static_cast<double>(dp2 - pred.deep_nonzeros)) + std::abs(static_cast<double>(dp2 - 16)), 0.5);
  }

  double penrose = 0.0, blockwise = 0.0;
  for (int t = 0; t < 50; ++t) {
    const int n = 2 + uniform_int(rng, 7);
    const Eigen::MatrixXd a = random_psd(rng, n, uniform_int(rng, n));
    for (double r : penrose_residuals(a, pseudoinverse(a))) penrose = std::max(penrose, r);

    BlockMatrix bm;
    for (int k = 0; k < 3; ++k) {
      const int d = 1 + uniform_int(rng, 4);
      bm.nodes.push_back(k);
      bm.blocks.push_back(random_psd(rng, d, uniform_int(rng, d + 1)));
    }
    blockwise = std::max(blockwise, max_abs(block_pseudoinverse(bm).dense() - pseudoinverse(bm.dense())));
  }
  below(out, s, "pinv_penrose_identities", penrose, 1e-8);
  below(out, s, "block_pinv_equals_dense_pinv", blockwise, 1e-10);

  below(out, s, "rbm_identity_at_zero_weights",
        max_abs(rbm_joint_fisher(2, 2, Eigen::MatrixXd::Zero(2, 2)) - Eigen::MatrixXd::Identity(4, 4)), 1e-12);
  double rbm = std::numeric_limits<double>::infinity();
  for (int t = 0; t < 10; ++t) {
    Eigen::MatrixXd w(2, 2);
    for (int i = 0; i < 4; ++i) w(i) = (uniform01(rng) < 0.5 ? -1.0 : 1.0) * uniform(rng, 0.5, 1.5);
    const Eigen::MatrixXd g = rbm_joint_fisher(2, 2, w);
    rbm = std::min({rbm, rbm_off_block_max(g, 2, 2, true), rbm_off_block_max(g, 2, 2, false)});
  }
  above(out, s, "rbm_off_block_entry", rbm, 1e-3);
  return out;
}

Checks gradient_suite(std::uint64_t seed) {
  const std::string s = "gradient";
  Checks out;
  Rng rng(seed);

  double fd = 0.0;
  for (int t = 0; t < 50; ++t) {
    const int nodes = 2 + uniform_int(rng, 9);
    const DagModel model = random_sigmoid_net(rng, nodes, 1 + uniform_int(rng, nodes));
    const ParamVector xi = random_params(model, rng, -1.0, 1.0);
    const JointTable target = random_target(model, rng);
    const auto e = [&](const Eigen::VectorXd& x) { return Eigen::VectorXd::Constant(1, objective(model, x, target)); };
    const Eigen::VectorXd num = fd_jacobian(e, xi).row(0).transpose();
    fd = std::max(fd, rel_err(euclidean_grad_exact(model, xi, target), num));
  }
  below(out, s, "euclidean_gradient_vs_finite_differences", fd, 1e-6);

  double simplex = 0.0;
  for (int t = 0; t < 10; ++t) {
    const int card = 2 + uniform_int(rng, 4);
    const DagModel model(StateSpace({card}, {0}), Dag{{{}}}, {KernelSpec::tabular_logit()});
    const ParamVector xi = random_params(model, rng, -1.0, 1.0);
    const JointTable target = random_target(model, rng);
    const Eigen::VectorXd p = joint_table(model, xi).p;
    const Eigen::VectorXd tangent = p.asDiagonal() * (joint_scores(model, xi) * natural_grad(model, xi, target));
    simplex = std::max(simplex, max_abs(tangent - simplex_gradient(p, kl_to_target_derivative(target.p, p))));
  }
  below(out, s, "natural_gradient_matches_simplex_gradient", simplex, 1e-8);

  double locality = 0.0;
  for (int t = 0; t < 10; ++t) {
    const int nodes = 2 + uniform_int(rng, 4);
    Dag dag;
    dag.parents.assign(nodes, {});
    std::vector<int> vis(nodes);
    for (int i = 0; i < nodes; ++i) vis[i] = i;
    const DagModel model(StateSpace::binary(nodes, vis), dag, std::vector<KernelSpec>(nodes, KernelSpec::sigmoid()));
    ParamVector xi = random_params(model, rng, -1.0, 1.0);
    JointTable target;
    target.units = vis;
    target.cards.assign(nodes, 2);
    target.p = Eigen::VectorXd::Ones(std::int64_t{1} << nodes);
    for (int i = 0; i < nodes; ++i) {
      const double q = uniform(rng, 0.1, 0.9);
      for (std::int64_t c = 0; c < target.p.size(); ++c) target.p[c] *= (c >> (nodes - 1 - i)) & 1 ? q : 1 - q;
    }
    const ParamVector g0 = euclidean_grad_exact(model, xi, target);
    const int r = uniform_int(rng, nodes);
    for (int o = 0; o < nodes; ++o)
      if (o != r) model.block(xi, o) += uniform_vector(rng, model.block_dim(o), -1.0, 1.0);
    locality = std::max(locality, max_abs(model.block(euclidean_grad_exact(model, xi, target), r) - model.block(g0, r)));
  }
  below(out, s, "gradient_locality_product_net", locality, 1e-12);
  return out;
}

Checks gibbs_suite(std::uint64_t seed) {
  const std::string s = "gibbs";
  Checks out;
  Rng rng(seed);

  double cond = 0.0, closed = 0.0;
  for (int t = 0; t < 20; ++t) {
    const bool mixed = t % 4 == 3;
    const int nodes = 2 + uniform_int(rng, 6);
    const DagModel model = mixed ? random_mixed_net(rng, nodes, 1) : random_sigmoid_net(rng, nodes, 1);
    const ParamVector xi = random_params(model, rng, -1.0, 1.0);
    const JointTable joint = joint_table(model, xi);
    const auto units = model.space().all_units();
    Config x{std::vector<int>(nodes, 0)};
    do {
      for (int u = 0; u < nodes; ++u) {
        std::vector<int> rest;
        for (int v : units)
          if (v != u) rest.push_back(v);
        const std::vector<int> target{u};
        const Eigen::VectorXd exact = conditional(joint, target, rest, restrict(x, rest)).p;
        const Eigen::VectorXd gc = gibbs_conditional(model, xi, u, x);
        cond = std::max(cond, max_abs(gc - exact));
        if (!mixed) closed = std::max(closed, std::abs(binary_gibbs_prob(model, xi, u, x) - gc[x[u]]));
      }
    } while (next_config(x, units, model.space()));
  }
  below(out, s, "blanket_conditional_vs_enumeration", cond, 1e-12);
  below(out, s, "closed_form_vs_blanket_conditional", closed, 1e-12);

  double balance = 0.0, stationary = 0.0;
  for (int t = 0; t < 10; ++t) {
    const int hidden = 1 + uniform_int(rng, 3);
    const int nodes = hidden + 1 + uniform_int(rng, 3);
    const DagModel model = random_sigmoid_net(rng, nodes, nodes - hidden);
    const ParamVector xi = random_params(model, rng, -1.0, 1.0);
    for (const Config& clamp : enumerate_configs(model.space(), model.space().visible())) {
      const Eigen::VectorXd pi = clamped_posterior(model, xi, clamp).p;
      const Eigen::MatrixXd tm = single_site_transition_matrix(model, xi, clamp);
      const Eigen::MatrixXd flow = pi.asDiagonal() * tm;
      balance = std::max(balance, max_abs(flow - flow.transpose()));
      stationary = std::max(stationary, max_abs(tm.transpose() * pi - pi));
    }
  }
  below(out, s, "detailed_balance", balance, 1e-12);
  below(out, s, "posterior_stationary", stationary, 1e-12);

  {
    const DagModel model = random_sigmoid_net(rng, 3, 2, 2);
    const ParamVector xi = random_params(model, rng, -1.0, 1.0);
    const Config clamp{{1, 0}};
    GibbsConfig cfg;
    cfg.burn_in = 10;
    cfg.thinning = 1;
    const int n = 20000;
    const auto chain = gibbs_chain(model, xi, clamp, n, cfg, rng);
    double hits = 0.0;
    for (const Config& h : chain) hits += h[0];
    const double p1 = clamped_posterior(model, xi, clamp).p[1];
    const double se = std::sqrt(p1 * (1 - p1) / n);
    below(out, s, "chain_marginal_standard_errors", std::abs(hits / n - p1) / se, 4.0);
  }
  return out;
}

/// The linear curve p0 + t (V_H + V_V) through a random point, with both
/// components nonzero, the target far from the pushed-forward point.
struct CurveCase {
  CoarseGraining cg;
  Eigen::VectorXd p0;
  Eigen::VectorXd v;
  Eigen::VectorXd target;
};

CurveCase curve_case(Rng& rng) {
  const int nz = 6;
  CoarseGraining cg({0, 0, 1, 1, 2, 2}, 3);
  const Eigen::VectorXd p0 = random_simplex_point(rng, nz);
  const Eigen::VectorXd vh = horizontal_lift(cg, p0, random_tangent(rng, 3));
  Eigen::VectorXd vv = uniform_vector(rng, nz, -1.0, 1.0);
  vv -= horizontal_lift(cg, p0, pushforward_diff(cg, vv));
  Eigen::VectorXd v = vh / std::sqrt(fisher_inner(p0, vh, vh)) + vv / std::sqrt(fisher_inner(p0, vv, vv));
  v *= 0.1 * p0.minCoeff() / v.cwiseAbs().maxCoeff();
  Eigen::VectorXd target(3);
  target << 0.8, 0.15, 0.05;
  return {cg, p0, v, target};
}

Checks geometry_suite(std::uint64_t seed) {
  const std::string s = "geometry";
  Checks out;
  Rng rng(seed);

  double simplex = 0.0, image = 0.0;
  int simplex_dims = 0, image_dims = 0;
  for (int t = 0; t < 10; ++t) {
    const int nz = 4 + uniform_int(rng, 13);
    const int nx = 2 + uniform_int(rng, std::min(nz - 2, 5));
    const CoarseGraining cg = random_coarse_graining(rng, nz, nx);
    const Eigen::VectorXd target = random_simplex_point(rng, nx);
    const auto df = [&](const Eigen::VectorXd& q) { return kl_to_target_derivative(target, q); };

    const ParametrisedFamily full = simplex_family(nz);
    const Eigen::VectorXd th = uniform_vector(rng, nz, -1.0, 1.0);
    const InvarianceResult a = gradient_invariance_residual(full, th, cg, df);
    simplex = std::max(simplex, a.flagged_singular ? std::numeric_limits<double>::infinity() : a.residual);
    const auto ca = cylindricity_check(model_jacobian(full, th), cg, full.prob(th));
    simplex_dims += !ca.is_cylindrical || ca.dim_TH != nx - 1 || ca.dim_TV != nz - nx;

    const ParametrisedFamily mk = markov_image_family(random_coupled_kernel(rng, cg));
    const Eigen::VectorXd tx = uniform_vector(rng, nx, -1.0, 1.0);
    const InvarianceResult b = gradient_invariance_residual(mk, tx, cg, df);
    image = std::max(image, b.flagged_singular ? std::numeric_limits<double>::infinity() : b.residual);
    const auto cb = cylindricity_check(model_jacobian(mk, tx), cg, mk.prob(tx));
    image_dims += !cb.is_cylindrical || cb.dim_TV != 0;
  }
  below(out, s, "gradient_invariance_full_simplex", simplex, 1e-8);
  below(out, s, "gradient_invariance_markov_image", image, 1e-8);
  below(out, s, "full_simplex_cylindrical", simplex_dims, 0.5);
  below(out, s, "markov_image_cylindrical_no_vertical", image_dims, 0.5);

  {
    const CurveCase c = curve_case(rng);
    const ParametrisedFamily curve = linear_curve_family(c.p0, c.v);
    const Eigen::VectorXd t0 = Eigen::VectorXd::Zero(1);
    const auto df = [&](const Eigen::VectorXd& q) { return kl_to_target_derivative(c.target, q); };
    const InvarianceResult r = gradient_invariance_residual(curve, t0, c.cg, df);
    above(out, s, "noncylindrical_curve_residual", r.flagged_singular ? 0.0 : r.residual, 1e-3);
    const auto cyl = cylindricity_check(model_jacobian(curve, t0), c.cg, c.p0);
    expected_failure(out, s, "noncylindrical_curve_cylindricity_expected_failure", !cyl.is_cylindrical);
  }

  double iso = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int nx = 2 + uniform_int(rng, 4);
    const int nz = nx + uniform_int(rng, 8);
    const CoarseGraining cg = random_coarse_graining(rng, nz, nx);
    const MarkovKernelMatrix k = random_coupled_kernel(rng, cg);
    const Eigen::VectorXd p = random_simplex_point(rng, nx);
    const Eigen::VectorXd u = random_tangent(rng, nx), v = random_tangent(rng, nx);
    const double rhs = fisher_inner(p, u, v);
    const double lhs = fisher_inner(markov_embed(k, p), markov_embed_diff(k, u), markov_embed_diff(k, v));
    iso = std::max(iso, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
  }
  below(out, s, "markov_embedding_isometry", iso, 1e-10);

  {
    Eigen::MatrixXd km(3, 2);
    km << 1.0, 0.0, 0.0, 0.4, 0.0, 0.6;
    const MarkovKernelMatrix k(km, CoarseGraining({0, 1, 1}, 2));
    const Eigen::VectorXd p = Eigen::VectorXd::Constant(2, 0.5);
    Eigen::VectorXd u(2);
    u << 1.0, -1.0;
    const Eigen::VectorXd ku = markov_embed_diff(k, u);
    below(out, s, "isometry_worked_example_coarse_side", std::abs(fisher_inner(p, u, u) - 4.0), 1e-12);
    below(out, s, "isometry_worked_example_fine_side", std::abs(fisher_inner(markov_embed(k, p), ku, ku) - 4.0), 1e-12);
  }

  double orth = 0.0, pyth = 0.0, lift = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int nx = 2 + uniform_int(rng, 4);
    const int nz = nx + uniform_int(rng, 8);
    const CoarseGraining cg = random_coarse_graining(rng, nz, nx);
    const Eigen::VectorXd p = random_simplex_point(rng, nz);
    const Eigen::VectorXd v = random_tangent(rng, nz);
    const HVDecomposition d = hv_decompose(cg, p, v);
    const double vv = fisher_inner(p, v, v);
    orth = std::max(orth, std::abs(fisher_inner(p, d.horizontal, d.vertical)) / std::max(1.0, vv));
    pyth = std::max(pyth, std::abs(vv - fisher_inner(p, d.horizontal, d.horizontal) -
                                   fisher_inner(p, d.vertical, d.vertical)) / std::max(1.0, vv));
    const auto [l, r] = horizontal_inner_invariance(cg, p, random_tangent(rng, nx), random_tangent(rng, nx));
    lift = std::max(lift, std::abs(l - r) / std::max(1.0, std::abs(r)));
  }
  below(out, s, "horizontal_vertical_orthogonality", orth, 1e-12);
  below(out, s, "pythagoras", pyth, 1e-12);
  below(out, s, "horizontal_lift_compatibility", lift, 1e-12);

  double cross = 0.0, gh = 0.0, fd = 0.0, analytic = 0.0, coupling = std::numeric_limits<double>::infinity();
  int cyl_fail = 0;
  for (int t = 0; t < 5; ++t) {
    const DagModel model = acceptance_net();
    const ParamVector xi = random_params(model, rng, -1.0, 1.0);
    const ParametrisedFamily fam = joint_family(model);
    const CoarseGraining cg = CoarseGraining::marginalisation(model.space(), model.space().visible());
    const ConditionalFamily cond = atom_softmax_family(cg);
    const Eigen::VectorXd eta = uniform_vector(rng, cond.dim, -1.0, 1.0);
    const ProductExtension ext = product_extension_assemble(fam, cg, cond, xi, eta);
    cyl_fail += !ext.cylindricity.is_cylindrical;
    cross = std::max(cross, max_abs(ext.cross));
    gh = std::max(gh, max_abs(ext.GH - ext.marginal_fisher));

    const auto fit = [&](const Eigen::VectorXd& x) { return atom_softmax_fit(fam, cg, x); };
    const DiffComplResult a = gh_via_diffcompl(fam, cg, cond, fit, xi, JacobianMode::FiniteDifference);
    fd = std::max(fd, a.max_abs_diff);
    const DiffComplResult b = gh_via_diffcompl(fam, cg, cond, fit, xi, JacobianMode::Analytic,
                                               [&](const Eigen::VectorXd& x) { return atom_softmax_fit_jacobian(fam, cg, x); });
    analytic = std::max(analytic, b.max_abs_diff);
    const Eigen::MatrixXd norms = block_norms(a.correction, block_sizes(model));
    double off = 0.0;
    for (Eigen::Index i = 0; i < norms.rows(); ++i)
      for (Eigen::Index j = 0; j < norms.cols(); ++j)
        if (i != j) off = std::max(off, norms(i, j));
    coupling = std::min(coupling, off);
  }
  below(out, s, "product_extension_cylindrical", cyl_fail, 0.5);
  below(out, s, "product_extension_hv_orthogonality", cross, 1e-12);
  below(out, s, "product_extension_horizontal_gram_is_marginal_fisher", gh, 1e-10);
  below(out, s, "diffcompl_fd_jacobian", fd, 1e-6);
  below(out, s, "diffcompl_analytic_jacobian", analytic, 1e-10);
  above(out, s, "locality_coupling_off_block_norm", coupling, 1e-6);

  double reparam = 0.0;
  for (int t = 0; t < 5; ++t) {
    const DagModel model = random_sigmoid_net(rng, 4, 2);
    const ParametrisedFamily fam = joint_family(model);
    const ParamVector xi = random_params(model, rng, -1.0, 1.0);
    const Eigen::VectorXd df = uniform_vector(rng, static_cast<int>(model.space().total_configs()), -1.0, 1.0);
    const Eigen::VectorXd base = grad_on_model(fam, xi, df);
    const int d = fam.dim;
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) a(i, j) += 0.3 * uniform(rng, -1.0, 1.0);
    const ParametrisedFamily re{d, [fam, a](const Eigen::VectorXd& th) { return fam.prob(a * th); },
                                [fam, a](const Eigen::VectorXd& th) -> Eigen::MatrixXd { return fam.score(a * th) * a; }};
    const Eigen::VectorXd th = a.fullPivLu().solve(xi);
    reparam = std::max(reparam, max_abs(grad_on_model(re, th, df) - base));
    const ParametrisedFamily dup{2 * d, [fam, d](const Eigen::VectorXd& th2) { return fam.prob(th2.head(d) + th2.tail(d)); },
                                 [fam, d](const Eigen::VectorXd& th2) -> Eigen::MatrixXd {
                                   const Eigen::MatrixXd sc = fam.score(th2.head(d) + th2.tail(d));
                                   Eigen::MatrixXd out2(sc.rows(), 2 * d);
                                   out2 << sc, sc;
                                   return out2;
                                 }};
    Eigen::VectorXd th2(2 * d);
    th2 << 0.5 * xi, 0.5 * xi;
    reparam = std::max(reparam, max_abs(grad_on_model(dup, th2, df) - base));
  }
  below(out, s, "model_gradient_reparametrisation_invariance", reparam, 1e-8);
  return out;
}

Checks wakesleep_suite(std::uint64_t seed) {
  const std::string s = "wakesleep";
  Checks out;
  Rng rng(seed);

  double wake = 0.0, gap = 0.0, sleep = 0.0;
  for (int t = 0; t < 10; ++t) {
    const int nodes = 3 + uniform_int(rng, 4);
    const DagModel model = random_sigmoid_net(rng, nodes, 1 + uniform_int(rng, nodes - 1));
    const ParamVector xi = random_params(model, rng, -1.0, 1.0);
    const JointTable target = random_target(model, rng);
    const RecognitionModel recog = RecognitionModel::full_tabular(model.space());
    const Eigen::VectorXd eta = exact_posterior_fit(model, xi, recog);
    gap = std::max(gap, recognition_gap(model, xi, recog, eta));
    wake = std::max(wake, max_abs(wake_gradient(model, xi, recog, eta, target) - euclidean_grad_exact(model, xi, target)));

    const Eigen::VectorXd eta_r = init_recognition_params(recog, rng, -1.0, 1.0);
    const auto d = [&](const Eigen::VectorXd& e) {
      return Eigen::VectorXd::Constant(1, recognition_gap(model, xi, recog, e));
    };
    sleep = std::max(sleep, rel_err(sleep_gradient(model, xi, recog, eta_r), fd_jacobian(d, eta_r).row(0).transpose()));
  }
  below(out, s, "wake_gradient_exact_with_matched_recognition", wake, 1e-12);
  below(out, s, "exact_posterior_fit_gap", gap, 1e-10);
  below(out, s, "sleep_gradient_vs_finite_differences", sleep, 1e-6);

  {
    const DagModel model = random_sigmoid_net(rng, 5, 2);
    const ParamVector xi = random_params(model, rng, -1.0, 1.0);
    const RecognitionModel recog = RecognitionModel::full_tabular(model.space());
    Eigen::VectorXd eta = init_recognition_params(recog, rng);
    double prev = recognition_gap(model, xi, recog, eta), rise = 0.0;
    for (int k = 0; k < 500; ++k) {
      eta -= 0.05 * sleep_gradient(model, xi, recog, eta);
      const double g = recognition_gap(model, xi, recog, eta);
      rise = std::max(rise, g - prev);
      prev = g;
    }
    below(out, s, "sleep_descent_monotone_gap", rise, 1e-12);
  }

  {
    const DagModel model = acceptance_net();
    Rng init(seed);
    const ParamVector xi0 = init_params(model, init);
    const RecognitionModel recog = RecognitionModel::full_tabular(model.space());
    const Eigen::VectorXd eta0 = init_recognition_params(recog, init);
    WakeSleepSchedule sched;
    sched.seed = seed;
    const WakeSleepResult res = wake_sleep_train(model, xi0, recog, eta0, acceptance_target(), sched);
    below(out, s, "acceptance_net_final_to_initial_E", res.rows.back().E / res.rows.front().E, 0.1);
  }
  return out;
}

using SuiteFn = Checks (*)(std::uint64_t);

struct Suite {
  const char* name;
  SuiteFn fn;
};

constexpr Suite kSuites[] = {
    {"fisher", fisher_suite},
    {"gradient", gradient_suite},
    {"gibbs", gibbs_suite},
    {"geometry", geometry_suite},
    {"wakesleep", wakesleep_suite},
};

}  // namespace

const std::vector<std::string>& verify_suite_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& s : kSuites) n.emplace_back(s.name);
    n.emplace_back("all");
    return n;
  }();
  return names;
}

std::vector<CheckResult> run_verify(const std::string& suite, std::uint64_t seed, int threads) {
  std::vector<std::size_t> chosen;
  for (std::size_t k = 0; k < std::size(kSuites); ++k)
    if (suite == "all" || suite == kSuites[k].name) chosen.push_back(k);
  if (chosen.empty()) throw std::invalid_argument("unknown verification suite '" + suite + "'");

  std::vector<Checks> results(chosen.size());
  std::vector<std::exception_ptr> errors(chosen.size());
  const auto run = [&](std::size_t i) {
    try {
      results[i] = kSuites[chosen[i]].fn(seed + chosen[i]);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, chosen.size());
  if (workers == 1) {
    for (std::size_t i = 0; i < chosen.size(); ++i) run(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < chosen.size(); i += workers) run(i);
      });
    for (auto& t : pool) t.join();
  }
  std::vector<CheckResult> all;
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    all.insert(all.end(), results[i].begin(), results[i].end());
  }
  return all;
}

}  // namespace natgrad
