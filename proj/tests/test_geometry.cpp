#include <cmath>

#include <doctest.h>

#include "natgrad/builders.hpp"
#include "natgrad/fisher.hpp"
#include "natgrad/geometry.hpp"
#include "oracles.hpp"

using namespace natgrad;

namespace {

const CoarseGraining kPairs({0, 0, 1, 1}, 2);

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Eigen::VectorXd random_point(Rng& rng, int n) {
  Eigen::VectorXd p = uniform_vector(rng, n, 0.05, 1.0);
  return p / p.sum();
}

Eigen::VectorXd random_tangent(Rng& rng, int n) {
  Eigen::VectorXd v = uniform_vector(rng, n, -1.0, 1.0);
  return v.array() - v.mean();
}

}  // namespace

TEST_SUITE("geometry") {
  TEST_CASE("fisher inner product") {
    const Eigen::VectorXd p = vec({0.5, 0.5}), v = vec({1, -1});
    CHECK(fisher_inner(p, v, v) == doctest::Approx(4.0));
    CHECK(fisher_inner(p, Eigen::VectorXd::Zero(2), v) == 0.0);
    Rng rng(1);
    const Eigen::VectorXd q = random_point(rng, 5), a = random_tangent(rng, 5), b = random_tangent(rng, 5);
    CHECK(fisher_inner(q, a, b) == doctest::Approx(fisher_inner(q, b, a)).epsilon(1e-15));
    CHECK(fisher_inner(q, a, a) > 0.0);
    CHECK_THROWS(fisher_inner(p, vec({1, 0, -1}), vec({1, 0, -1})));
  }

  TEST_CASE("coarse graining and push-forward") {
    CHECK(kPairs.atoms() == std::vector<std::vector<int>>{{0, 1}, {2, 3}});
    const Eigen::VectorXd x = pushforward(kPairs, vec({0.1, 0.2, 0.3, 0.4}));
    CHECK(x[0] == doctest::Approx(0.3));
    CHECK(x[1] == doctest::Approx(0.7));
    CHECK(oracle::max_abs(pushforward(kPairs, Eigen::VectorXd::Constant(4, 0.25)) - vec({0.5, 0.5})) < 1e-15);
    const Eigen::VectorXd p = vec({0.1, 0.2, 0.7});
    CHECK(pushforward(CoarseGraining::identity(3), p) == p);
    CHECK(oracle::max_abs(pushforward_diff(kPairs, vec({1, -1, 0, 0}))) == 0.0);
    CHECK(oracle::max_abs(pushforward_matrix(kPairs) * vec({1, 2, 3, 4}) - vec({3, 7})) == 0.0);
    CHECK_THROWS(CoarseGraining({0, 0}, 2));  // not onto
    CHECK_THROWS(CoarseGraining({0, 3}, 2));

    const StateSpace s({2, 3}, {1});
    const CoarseGraining m = CoarseGraining::marginalisation(s, s.visible());
    CHECK(m.domain_size() == 6);
    CHECK(m.codomain_size() == 3);
    CHECK(m(4) == 1);  // (1, 1) -> 1
  }

  TEST_CASE("horizontal and vertical parts") {
    const Eigen::VectorXd p = vec({0.1, 0.2, 0.3, 0.4});
    HVDecomposition d = hv_decompose(kPairs, p, vec({1, -1, 2, -2}));
    CHECK(oracle::max_abs(d.horizontal) < 1e-15);
    // Proportional to p on each atom: purely horizontal.
    d = hv_decompose(kPairs, p, vec({0.1, 0.2, -0.3, -0.4}) * 2.0);
    CHECK(oracle::max_abs(d.vertical) < 1e-15);

    Rng rng(3);
    double orth = 0.0, pyth = 0.0, lift = 0.0;
    for (int t = 0; t < 1000; ++t) {
      const Eigen::VectorXd q = random_point(rng, 4), v = random_tangent(rng, 4);
      const HVDecomposition h = hv_decompose(kPairs, q, v);
      const double n2 = std::max(1.0, fisher_inner(q, v, v));
      orth = std::max(orth, std::abs(fisher_inner(q, h.horizontal, h.vertical)) / n2);
      pyth = std::max(pyth, std::abs(fisher_inner(q, v, v) - fisher_inner(q, h.horizontal, h.horizontal) -
                                     fisher_inner(q, h.vertical, h.vertical)) / n2);
      CHECK(oracle::max_abs(h.horizontal + h.vertical - v) < 1e-15);
      const Eigen::VectorXd u = random_tangent(rng, 2), w = random_tangent(rng, 2);
      const auto [lhs, rhs] = horizontal_inner_invariance(kPairs, q, u, w);
      lift = std::max(lift, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
    }
    CHECK(orth < 1e-12);
    CHECK(pyth < 1e-12);
    CHECK(lift < 1e-12);
    const auto zero = horizontal_inner_invariance(kPairs, p, Eigen::VectorXd::Zero(2), vec({1, -1}));
    CHECK(zero.first == 0.0);
    CHECK(zero.second == 0.0);
  }

  TEST_CASE("a vertical component strictly increases the norm") {
    const Eigen::VectorXd p = vec({0.1, 0.2, 0.3, 0.4});
    const Eigen::VectorXd u = vec({1, -1});
    const Eigen::VectorXd h = horizontal_lift(kPairs, p, u);
    const Eigen::VectorXd v = h + vec({0.05, -0.05, 0, 0});
    const Eigen::VectorXd px = pushforward(kPairs, p);
    const Eigen::VectorXd dv = pushforward_diff(kPairs, v);
    CHECK(oracle::max_abs(dv - u) < 1e-15);
    CHECK(fisher_inner(p, v, v) - fisher_inner(px, dv, dv) > 1e-6);
    CHECK(std::abs(fisher_inner(p, h, h) - fisher_inner(px, u, u)) < 1e-12);
  }

  TEST_CASE("Markov embedding") {
    const CoarseGraining cg({0, 1, 1}, 2);
    Eigen::MatrixXd k(3, 2);
    k << 1, 0, 0, 0.4, 0, 0.6;
    const MarkovKernelMatrix mk(k, cg);
    const Eigen::VectorXd p = vec({0.5, 0.5}), u = vec({1, -1});
    const Eigen::VectorXd kp = markov_embed(mk, p);
    CHECK(oracle::max_abs(kp - vec({0.5, 0.2, 0.3})) < 1e-15);
    const Eigen::VectorXd ku = markov_embed_diff(mk, u);
    CHECK(fisher_inner(kp, ku, ku) == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(oracle::max_abs(pushforward(cg, kp) - p) < 1e-15);

    Eigen::MatrixXd bad(3, 2);
    bad << 0.5, 0, 0.5, 0.4, 0, 0.6;  // column 0 leaks out of its atom
    CHECK_THROWS(MarkovKernelMatrix(bad, cg));
    Eigen::MatrixXd unnorm = k;
    unnorm(0, 0) = 0.9;
    CHECK_THROWS(MarkovKernelMatrix(unnorm));

    // A deterministic kernel only relabels.
    Eigen::MatrixXd perm = Eigen::MatrixXd::Zero(2, 2);
    perm << 0, 1, 1, 0;
    const MarkovKernelMatrix swap(perm, CoarseGraining({1, 0}, 2));
    const Eigen::VectorXd q = vec({0.3, 0.7});
    CHECK(markov_embed(swap, q) == vec({0.7, 0.3}));
  }

  TEST_CASE("model Jacobian") {
    Rng rng(5);
    const DagModel m = random_sigmoid_net(rng, 3, 1);
    const ParamVector xi = random_params(m, rng, -1.0, 1.0);
    const ParametrisedFamily fam = joint_family(m);
    const Eigen::MatrixXd j = model_jacobian(fam, xi);
    CHECK(oracle::max_abs(j - fd_jacobian(fam.prob, xi)) < 1e-6);
    CHECK(oracle::max_abs(j.colwise().sum()) < 1e-10);

    ParametrisedFamily constant;
    constant.dim = 2;
    constant.prob = [](const Eigen::VectorXd&) { return vec({0.2, 0.8}); };
    constant.score = [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Zero(2, 2); };
    CHECK(oracle::max_abs(model_jacobian(constant, vec({1, 2}))) == 0.0);
  }

  TEST_CASE("cylindricity") {
    const ParametrisedFamily full = simplex_family(4);
    const Eigen::VectorXd th = vec({0.1, -0.3, 0.5, 0.2});
    const CylindricityResult c = cylindricity_check(model_jacobian(full, th), kPairs, full.prob(th));
    CHECK(c.is_cylindrical);
    CHECK(c.dim_T == 3);
    CHECK(c.dim_TH == 1);
    CHECK(c.dim_TV == 2);

    Eigen::MatrixXd k(4, 2);
    k << 0.3, 0, 0.7, 0, 0, 0.5, 0, 0.5;
    const ParametrisedFamily img = markov_image_family(MarkovKernelMatrix(k, kPairs));
    const CylindricityResult ci = cylindricity_check(model_jacobian(img, vec({0.2, -0.4})), kPairs,
                                                     img.prob(vec({0.2, -0.4})));
    CHECK(ci.is_cylindrical);
    CHECK(ci.dim_TV == 0);
    CHECK(ci.dim_T == 1);

    // Tangent mixing a horizontal and a vertical part.
    const Eigen::VectorXd p0 = vec({0.1, 0.2, 0.3, 0.4});
    const Eigen::VectorXd v = horizontal_lift(kPairs, p0, vec({1, -1})) + vec({0.1, -0.1, 0, 0});
    const ParametrisedFamily curve = linear_curve_family(p0, v);
    const CylindricityResult cc = cylindricity_check(model_jacobian(curve, vec({0.0})), kPairs, p0);
    CHECK_FALSE(cc.is_cylindrical);
    CHECK(cc.dim_T == 1);
    CHECK(cc.dim_TH + cc.dim_TV == 0);
  }

  TEST_CASE("gradient on a model") {
    const Eigen::VectorXd target = vec({0.1, 0.2, 0.3, 0.4});
    const ParametrisedFamily full = simplex_family(4);
    const Eigen::VectorXd th = vec({0.3, 0.0, -0.2, 0.5});
    const Eigen::VectorXd p = full.prob(th);
    const Eigen::VectorXd df = kl_to_target_derivative(target, p);
    const Eigen::VectorXd g = grad_on_model(full, th, df);
    // Closed form: p (df - <p, df>) with df = -target / p, i.e. p - target.
    CHECK(oracle::max_abs(g - (p - target)) < 1e-8);
    CHECK(oracle::max_abs(simplex_gradient(p, df) - (p - target)) < 1e-14);
    CHECK(oracle::max_abs(grad_on_model(full, th, Eigen::VectorXd::Constant(4, 2.5))) < 1e-12);

    // Duplicated coordinates: softmax(A theta) with A = [I I].
    ParametrisedFamily dup;
    dup.dim = 8;
    dup.prob = [&](const Eigen::VectorXd& t) { return full.prob(t.head(4) + t.tail(4)); };
    dup.score = [&](const Eigen::VectorXd& t) {
      const Eigen::MatrixXd s = full.score(t.head(4) + t.tail(4));
      Eigen::MatrixXd out(s.rows(), 8);
      out << s, s;
      return out;
    };
    Eigen::VectorXd th2(8);
    th2 << 0.1 * th, 0.9 * th;
    CHECK(oracle::max_abs(grad_on_model(dup, th2, df) - g) < 1e-8);
  }

  TEST_CASE("gradient invariance under coarse graining") {
    const ParametrisedFamily full = simplex_family(4);
    const Eigen::VectorXd tx = vec({0.6, 0.4});
    const auto df = [&](const Eigen::VectorXd& q) { return kl_to_target_derivative(tx, q); };
    const InvarianceResult r = gradient_invariance_residual(full, vec({0.2, -0.1, 0.4, 0.0}), kPairs, df);
    CHECK_FALSE(r.flagged_singular);
    CHECK(r.residual < 1e-8);

    const Eigen::VectorXd p0 = vec({0.1, 0.2, 0.3, 0.4});
    const ParametrisedFamily curve =
        linear_curve_family(p0, horizontal_lift(kPairs, p0, vec({1, -1})) + vec({0.1, -0.1, 0, 0}));
    CHECK(gradient_invariance_residual(curve, vec({0.0}), kPairs, df).residual > 1e-3);
  }

  TEST_CASE("properness probe") {
    // theta -> p0 + theta^3 v has a vanishing Jacobian at 0 only.
    const Eigen::VectorXd p0 = vec({0.25, 0.25, 0.5}), v = vec({1, -1, 0});
    ParametrisedFamily cubic;
    cubic.dim = 1;
    cubic.prob = [=](const Eigen::VectorXd& t) { return Eigen::VectorXd(p0 + std::pow(t[0], 3) * v); };
    cubic.score = [=](const Eigen::VectorXd& t) {
      return Eigen::MatrixXd((3 * t[0] * t[0] * v).cwiseQuotient(p0 + std::pow(t[0], 3) * v));
    };
    const ProperProbe at0 = properness_probe(cubic, vec({0.0}));
    CHECK_FALSE(at0.proper);
    CHECK(at0.rank_at_point == 0);
    CHECK(at0.max_rank_nearby == 1);
    CHECK(properness_probe(cubic, vec({0.1})).proper);
    const auto df = [](const Eigen::VectorXd& q) { return Eigen::VectorXd(q.cwiseInverse()); };
    const InvarianceResult flagged = gradient_invariance_residual(cubic, vec({0.0}), CoarseGraining::identity(3), df);
    CHECK(flagged.flagged_singular);
    CHECK(std::isnan(flagged.residual));
  }

  TEST_CASE("product extensions") {
    Rng rng(11);
    const DagModel m = acceptance_net();
    const ParamVector xi = random_params(m, rng, -1.0, 1.0);
    const ParametrisedFamily fam = joint_family(m);
    const CoarseGraining cg = CoarseGraining::marginalisation(m.space(), m.space().visible());

    // Extension I: the model's own conditional at xi reproduces p_xi.
    const ProductExtension one = product_extension_assemble(fam, cg, own_conditional_family(fam, cg), xi, xi);
    CHECK(oracle::max_abs(one.p - fam.prob(xi)) < 1e-14);
    CHECK(oracle::max_abs(one.cross) < 1e-12);

    const ConditionalFamily atoms = atom_softmax_family(cg);
    const Eigen::VectorXd eta = uniform_vector(rng, cg.domain_size(), -1.0, 1.0);
    const ProductExtension two = product_extension_assemble(fam, cg, atoms, xi, eta);
    CHECK(std::abs(two.p.sum() - 1.0) < 1e-12);
    CHECK(two.cylindricity.is_cylindrical);
    CHECK(oracle::max_abs(two.cross) < 1e-12);
    CHECK(oracle::max_abs(two.GH - two.marginal_fisher) < 1e-10);
    CHECK(oracle::max_abs(pushforward(cg, two.p) - pushforward(cg, fam.prob(xi))) < 1e-14);

    const Eigen::VectorXd fit = atom_softmax_fit(fam, cg, xi);
    CHECK(oracle::max_abs(product_extension_assemble(fam, cg, atoms, xi, fit).p - fam.prob(xi)) < 1e-14);

    const auto eta_of = [&](const Eigen::VectorXd& x) { return atom_softmax_fit(fam, cg, x); };
    const DiffComplResult fd = gh_via_diffcompl(fam, cg, atoms, eta_of, xi, JacobianMode::FiniteDifference);
    CHECK(fd.max_abs_diff < 1e-6);
    const DiffComplResult an = gh_via_diffcompl(fam, cg, atoms, eta_of, xi, JacobianMode::Analytic,
                                                [&](const Eigen::VectorXd& x) {
                                                  return atom_softmax_fit_jacobian(fam, cg, x);
                                                });
    CHECK(an.max_abs_diff < 1e-10);
    CHECK(oracle::max_abs(an.J - fd.J) < 1e-6);

    std::vector<int> sizes;
    for (int r : m.order()) sizes.push_back(m.block_dim(r));
    const Eigen::MatrixXd norms = block_norms(an.correction, sizes);
    double off = 0.0;
    for (Eigen::Index a = 0; a < norms.rows(); ++a)
      for (Eigen::Index b = 0; b < norms.cols(); ++b)
        if (a != b) off = std::max(off, norms(a, b));
    CHECK(off > 1e-6);
  }

  TEST_CASE("identity coarse graining has no vertical part") {
    Rng rng(13);
    const DagModel m = random_sigmoid_net(rng, 3, 3);
    const ParamVector xi = random_params(m, rng, -1.0, 1.0);
    const ParametrisedFamily fam = joint_family(m);
    const CoarseGraining id = CoarseGraining::identity(8);
    const ConditionalFamily atoms = atom_softmax_family(id);
    const auto eta_of = [&](const Eigen::VectorXd& x) { return atom_softmax_fit(fam, id, x); };
    const DiffComplResult r = gh_via_diffcompl(fam, id, atoms, eta_of, xi, JacobianMode::FiniteDifference);
    CHECK(oracle::max_abs(r.correction) < 1e-12);
    CHECK(oracle::max_abs(r.GH - full_fisher_oracle(m, xi)) < 1e-12);
  }
}
