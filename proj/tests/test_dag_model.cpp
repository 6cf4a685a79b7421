#include <cmath>

#include <doctest.h>

#include "natgrad/builders.hpp"
#include "natgrad/dag_model.hpp"
#include "natgrad/errors.hpp"
#include "oracles.hpp"

using namespace natgrad;

namespace {

DagModel chain(int n) {
  Dag d;
  for (int r = 0; r < n; ++r) d.parents.push_back(r ? std::vector<int>{r - 1} : std::vector<int>{});
  return DagModel(StateSpace::binary(n, {n - 1}), d, std::vector<KernelSpec>(n, KernelSpec::sigmoid()));
}

}  // namespace

TEST_SUITE("dag_model") {
  TEST_CASE("validate_dag") {
    CHECK(validate_dag(Dag{{{}, {0}, {1}}}) == std::vector<int>{0, 1, 2});
    CHECK(validate_dag(Dag{{{}, {}, {}}}) == std::vector<int>{0, 1, 2});
    CHECK(validate_dag(Dag{{{2}, {}, {}}}) == std::vector<int>{1, 2, 0});
    CHECK_THROWS_AS(validate_dag(Dag{{{1}, {0}}}), CycleError);
    CHECK_THROWS(validate_dag(Dag{{{3}, {}}}));
  }

  TEST_CASE("sigmoid kernel values") {
    const DagModel m = chain(2);
    ParamVector xi = ParamVector::Zero(m.dim());
    CHECK(kernel_prob(m, 1, Config{{1}}, 1, xi) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(kernel_prob(m, 1, Config{{1}}, 0, xi) == doctest::Approx(0.5).epsilon(1e-15));
    xi[m.flat_index(1, 0)] = 1.0;
    CHECK(kernel_prob(m, 1, Config{{1}}, 1, xi) == doctest::Approx(0.731059).epsilon(1e-6));
    CHECK(std::abs(kernel_prob(m, 1, Config{{1}}, 1, xi) - 1.0 / (1.0 + std::exp(-1.0))) < 1e-15);
  }

  TEST_CASE("tabular kernel with equal logits is uniform") {
    const DagModel m(StateSpace({3}, {0}), Dag{{{}}}, {KernelSpec::tabular_logit()});
    const ParamVector xi = ParamVector::Constant(3, 0.7);
    for (int s = 0; s < 3; ++s) CHECK(kernel_prob(m, 0, Config{}, s, xi) == doctest::Approx(1.0 / 3).epsilon(1e-14));
    CHECK(m.dim() == 3);
  }

  TEST_CASE("sigmoid log-gradient at zero parameters") {
    const DagModel m = chain(2);
    const ParamVector xi = ParamVector::Zero(m.dim());
    for (int xp : {0, 1})
      for (int xr : {0, 1}) {
        const Eigen::VectorXd g = kernel_log_grad(m, 1, Config{{xp}}, xr, xi);
        CHECK(g[0] == doctest::Approx(spin(xp) * spin(xr) / 2.0));
        CHECK(g[1] == doctest::Approx(-spin(xr) / 2.0));
      }
  }

  TEST_CASE("score identity and finite differences on mixed kernels") {
    Rng rng(7);
    double identity = 0.0, fd = 0.0;
    for (int t = 0; t < 20; ++t) {
      const DagModel m = random_mixed_net(rng, 4, 1);
      const ParamVector xi = random_params(m, rng, -1.0, 1.0);
      for (int r = 0; r < m.node_count(); ++r) {
        const Kernel& k = m.kernel(r);
        const auto theta = m.block(xi, r);
        for (std::int64_t c = 0; c < k.parent_configs(); ++c) {
          identity = std::max(identity, oracle::max_abs(k.log_grads(c, theta).transpose() * k.probs(c, theta)));
          for (int s = 0; s < k.cardinality(); ++s) {
            const auto f = [&](const Eigen::VectorXd& th) { return k.log_probs(c, th)[s]; };
            fd = std::max(fd, oracle::max_abs(k.log_grad(c, s, theta) - oracle::fd_gradient(f, theta)));
          }
        }
      }
    }
    CHECK(identity < 1e-12);
    CHECK(fd < 1e-6);
  }

  TEST_CASE("joint table: normalisation, factorisation, hand example") {
    const DagModel one(StateSpace::binary(1, {0}), Dag{{{}}}, {KernelSpec::sigmoid()});
    ParamVector th(1);
    th << -std::log(0.7 / 0.3);  // k(+1) = sigma(-theta) = 0.7
    const JointTable t1 = joint_table(one, th);
    CHECK(t1.p[0] == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(t1.p[1] == doctest::Approx(0.7).epsilon(1e-14));

    // Chain 0 -> 1 with w = 1, thresholds 0.
    const DagModel c = chain(2);
    ParamVector xi = ParamVector::Zero(c.dim());
    xi[c.flat_index(1, 0)] = 1.0;
    const double a = 1.0 / (1.0 + std::exp(-1.0));
    const JointTable t = joint_table(c, xi);
    CHECK(t.p[0] == doctest::Approx(0.5 * a));
    CHECK(t.p[1] == doctest::Approx(0.5 * (1 - a)));
    CHECK(t.p[2] == doctest::Approx(0.5 * (1 - a)));
    CHECK(t.p[3] == doctest::Approx(0.5 * a));

    Rng rng(3);
    for (int k = 0; k < 5; ++k) {
      const DagModel m = random_mixed_net(rng, 5, 2);
      const ParamVector x = random_params(m, rng, -1.0, 1.0);
      const JointTable j = joint_table(m, x);
      CHECK(std::abs(j.p.sum() - 1.0) < 1e-10);
      CHECK(j.p.minCoeff() > 0.0);
      double worst = 0.0;
      for (std::int64_t i = 0; i < j.size(); ++i) {
        const Config cfg = j.config(i);
        double s = 0.0;
        for (int r = 0; r < m.node_count(); ++r)
          s += std::log(kernel_prob(m, r, restrict(cfg, m.dag().parents[r]), cfg[r], x));
        worst = std::max(worst, std::abs(s - std::log(j.p[i])));
        worst = std::max(worst, std::abs(s - log_joint(m, x, cfg)));
      }
      CHECK(worst < 1e-12);
    }
  }

  TEST_CASE("edgeless nets are product distributions") {
    const DagModel m(StateSpace::binary(2, {0, 1}), Dag{{{}, {}}}, std::vector<KernelSpec>(2, KernelSpec::sigmoid()));
    ParamVector xi(2);
    xi << 0.3, -0.8;
    const JointTable j = joint_table(m, xi);
    const JointTable a = marginal(j, std::vector<int>{0});
    const JointTable b = marginal(j, std::vector<int>{1});
    for (int i = 0; i < 2; ++i)
      for (int k = 0; k < 2; ++k) CHECK(j.p[2 * i + k] == doctest::Approx(a.p[i] * b.p[k]).epsilon(1e-14));
    const JointTable cnd = conditional(j, std::vector<int>{0}, std::vector<int>{1}, Config{{1}});
    CHECK(oracle::max_abs(cnd.p - a.p) < 1e-14);
  }

  TEST_CASE("marginal and conditional") {
    JointTable t;
    t.units = {0, 1};
    t.cards = {2, 2};
    t.p = Eigen::Vector4d(0.1, 0.2, 0.3, 0.4);
    const JointTable m0 = marginal(t, std::vector<int>{0});
    CHECK(m0.p[0] == doctest::Approx(0.3));
    CHECK(m0.p[1] == doctest::Approx(0.7));
    CHECK(oracle::max_abs(marginal(t, std::vector<int>{0, 1}).p - t.p) == 0.0);
    const JointTable m10 = marginal(t, std::vector<int>{1, 0});
    CHECK(m10.p[1] == doctest::Approx(0.3));
    CHECK(oracle::max_abs(conditional(t, std::vector<int>{0, 1}, std::vector<int>{}, Config{}).p - t.p) < 1e-15);
    const JointTable c = conditional(t, std::vector<int>{1}, std::vector<int>{0}, Config{{1}});
    CHECK(c.p[0] == doctest::Approx(3.0 / 7));
    t.p << 0.0, 0.0, 0.5, 0.5;
    CHECK_THROWS_AS(conditional(t, std::vector<int>{1}, std::vector<int>{0}, Config{{0}}), ZeroMassError);
  }

  TEST_CASE("ancestral sampling matches the joint") {
    Rng rng(11);
    const DagModel m = random_sigmoid_net(rng, 3, 1, 2);
    const ParamVector xi = random_params(m, rng, -1.0, 1.0);
    const JointTable j = joint_table(m, xi);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(8);
    const int n = 100000;
    Rng draw(5);
    for (int i = 0; i < n; ++i) counts[j.index(ancestral_sample(m, xi, draw))] += 1.0;
    for (int i = 0; i < 8; ++i) {
      const double se = std::sqrt(j.p[i] * (1 - j.p[i]) / n);
      CHECK(std::abs(counts[i] / n - j.p[i]) < 3 * se + 1e-12);
    }
    Rng r1(9), r2(9);
    for (int i = 0; i < 20; ++i) CHECK(ancestral_sample(m, xi, r1) == ancestral_sample(m, xi, r2));

    ParamVector forced = ParamVector::Zero(m.dim());
    for (int r = 0; r < m.node_count(); ++r) forced[m.offset(r) + m.block_dim(r) - 1] = -30.0;
    for (int i = 0; i < 10; ++i) CHECK(ancestral_sample(m, forced, r1) == Config{{1, 1, 1}});
  }

  TEST_CASE("parameter layout is contiguous in topological order") {
    const DagModel m(StateSpace::binary(3, {0}), Dag{{{2}, {}, {}}}, std::vector<KernelSpec>(3, KernelSpec::sigmoid()));
    CHECK(m.order() == std::vector<int>{1, 2, 0});
    CHECK(m.offset(1) == 0);
    CHECK(m.offset(2) == 1);
    CHECK(m.offset(0) == 2);
    CHECK(m.block_dim(0) == 2);
    CHECK(m.dim() == 4);
    CHECK_THROWS(DagModel(StateSpace({3, 2}, {0}), Dag{{{}, {0}}}, std::vector<KernelSpec>(2, KernelSpec::sigmoid())));
  }

  TEST_CASE("visible marginal of the acceptance net") {
    const DagModel m = acceptance_net();
    Rng rng(1);
    const ParamVector xi = random_params(m, rng, -1.0, 1.0);
    const JointTable v = visible_marginal(m, xi);
    CHECK(v.units == std::vector<int>{0, 1});
    CHECK(oracle::max_abs(v.p - oracle::marginal(oracle::joint(m, xi), 4, {0, 1})) < 1e-14);
  }
}
