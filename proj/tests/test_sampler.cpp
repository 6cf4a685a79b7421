#include <cmath>

#include <doctest.h>

#include "natgrad/builders.hpp"
#include "natgrad/sampler.hpp"
#include "oracles.hpp"

using namespace natgrad;

TEST_SUITE("sampler") {
  TEST_CASE("markov blanket") {
    CHECK(markov_blanket(Dag{{{}, {0}, {1}}}, 1) == std::vector<int>{0, 2});
    CHECK(markov_blanket(Dag{{{}, {}, {0, 1}}}, 0) == std::vector<int>{1, 2});
    CHECK(markov_blanket(Dag{{{}, {}, {0}}}, 1).empty());
    CHECK_THROWS(markov_blanket(Dag{{{}, {}}}, 2));
  }

  TEST_CASE("conditionals against enumeration") {
    Rng rng(31);
    double worst = 0.0, closed = 0.0, blanket = 0.0;
    for (int t = 0; t < 10; ++t) {
      const DagModel m = random_sigmoid_net(rng, 3 + uniform_int(rng, 4), 1);
      const ParamVector xi = random_params(m, rng, -1.5, 1.5);
      const Eigen::VectorXd p = oracle::joint(m, xi);
      const int n = m.node_count();
      for (std::int64_t i = 0; i < p.size(); ++i) {
        Config x{std::vector<int>(n)};
        for (int u = 0; u < n; ++u) x[u] = oracle::spin_of(i, u, n) > 0;
        for (int s = 0; s < n; ++s) {
          const std::int64_t bit = std::int64_t{1} << (n - 1 - s);
          const double up = p[i | bit], down = p[i & ~bit];
          const Eigen::VectorXd c = gibbs_conditional(m, xi, s, x);
          worst = std::max(worst, std::abs(c[1] - up / (up + down)));
          closed = std::max(closed, std::abs(binary_gibbs_prob(m, xi, s, x) - c[x[s]]));

          // Flip every unit outside the blanket of s.
          const auto bl = markov_blanket(m.dag(), s);
          Config y = x;
          for (int u = 0; u < n; ++u)
            if (u != s && std::find(bl.begin(), bl.end(), u) == bl.end()) y[u] = 1 - y[u];
          blanket = std::max(blanket, oracle::max_abs(gibbs_conditional(m, xi, s, y) - c));
        }
      }
    }
    CHECK(worst < 1e-12);
    CHECK(closed < 1e-12);
    CHECK(blanket == 0.0);
  }

  TEST_CASE("childless node and zero child weights") {
    // 0 -> 1: node 1 is childless; node 0's only child has weight 0.
    const DagModel m(StateSpace::binary(2, {}), Dag{{{}, {0}}}, std::vector<KernelSpec>(2, KernelSpec::sigmoid()));
    ParamVector xi(3);
    xi << 0.4, 0.0, -0.7;  // theta_0, w_01, theta_1
    const Config x{{1, 0}};
    const Eigen::VectorXd c1 = gibbs_conditional(m, xi, 1, x);
    CHECK(c1[0] == doctest::Approx(kernel_prob(m, 1, Config{{1}}, 0, xi)).epsilon(1e-15));
    CHECK(binary_gibbs_prob(m, xi, 0, x) == doctest::Approx(oracle::sigma(-0.4)).epsilon(1e-14));
  }

  TEST_CASE("binary closed form rejects other kernels") {
    const DagModel m(StateSpace({2, 2}, {0}), Dag{{{}, {0}}},
                     {KernelSpec::sigmoid(), KernelSpec::tabular_logit()});
    CHECK_THROWS(binary_gibbs_prob(m, ParamVector::Zero(m.dim()), 0, Config{{0, 0}}));
  }

  TEST_CASE("detailed balance and stationarity") {
    Rng rng(6);
    for (int t = 0; t < 5; ++t) {
      const DagModel m = random_sigmoid_net(rng, 4, 1);
      const ParamVector xi = random_params(m, rng, -1.0, 1.0);
      for (int v = 0; v < 2; ++v) {
        const Config clamp{{v}};
        const Eigen::VectorXd pi = clamped_posterior(m, xi, clamp).p;
        const Eigen::MatrixXd tm = single_site_transition_matrix(m, xi, clamp);
        const Eigen::MatrixXd flow = pi.asDiagonal() * tm;
        CHECK(oracle::max_abs(flow - flow.transpose()) < 1e-12);
        CHECK(oracle::max_abs(tm.rowwise().sum().array() - 1.0) < 1e-12);
        CHECK(oracle::max_abs(tm.transpose() * pi - pi) < 1e-12);
      }
    }
  }

  TEST_CASE("gibbs chain") {
    Rng rng(17);
    const DagModel m(StateSpace::binary(2, {0}), Dag{{{1}, {}}}, std::vector<KernelSpec>(2, KernelSpec::sigmoid()));
    const ParamVector xi = random_params(m, rng, -1.0, 1.0);
    const Config clamp{{1}};
    GibbsConfig cfg;
    cfg.burn_in = 10;
    cfg.thinning = 1;
    CHECK(gibbs_chain(m, xi, clamp, 0, cfg, rng).empty());
    CHECK_THROWS(gibbs_chain(m, xi, Config{}, 5, cfg, rng));
    cfg.thinning = 0;
    CHECK_THROWS(gibbs_chain(m, xi, clamp, 5, cfg, rng));
    cfg.thinning = 1;

    const int n = 100000;
    const auto samples = gibbs_chain(m, xi, clamp, n, cfg, rng);
    REQUIRE(samples.size() == static_cast<std::size_t>(n));
    double up = 0;
    for (const Config& s : samples) up += s[0];
    const double p = clamped_posterior(m, xi, clamp).p[1];
    CHECK(std::abs(up / n - p) < 3 * std::sqrt(p * (1 - p) / n));

    Rng a(4), b(4);
    CHECK(gibbs_chain(m, xi, clamp, 30, cfg, a) == gibbs_chain(m, xi, clamp, 30, cfg, b));
  }

  TEST_CASE("chain over several hidden units approaches the posterior") {
    Rng rng(23);
    const DagModel m = acceptance_net();
    const ParamVector xi = random_params(m, rng, -1.0, 1.0);
    const Config clamp{{1, 0}};
    GibbsConfig cfg;
    cfg.burn_in = 100;
    cfg.thinning = 5;
    cfg.order = SweepOrder::Sequential;
    const auto samples = gibbs_chain(m, xi, clamp, 20000, cfg, rng);
    const JointTable post = clamped_posterior(m, xi, clamp);
    Eigen::VectorXd freq = Eigen::VectorXd::Zero(post.size());
    for (const Config& s : samples) freq[post.index(s)] += 1.0 / samples.size();
    CHECK(oracle::max_abs(freq - post.p) < 0.02);
  }

  TEST_CASE("target posterior sampler") {
    Rng rng(29);
    const DagModel m(StateSpace::binary(2, {0}), Dag{{{1}, {}}}, std::vector<KernelSpec>(2, KernelSpec::sigmoid()));
    const ParamVector xi = random_params(m, rng, -1.0, 1.0);
    JointTable target;
    target.units = {0};
    target.cards = {2};
    target.p = Eigen::Vector2d(0.3, 0.7);
    GibbsConfig cfg;
    cfg.burn_in = 5;
    cfg.thinning = 1;
    TargetPosteriorSampler sampler(m, xi, target, cfg);

    // Joint of (x_V, x_H) under p*(x_V) p(x_H | x_V).
    Eigen::Vector4d want;
    for (int v = 0; v < 2; ++v) {
      const Eigen::VectorXd post = clamped_posterior(m, xi, Config{{v}}).p;
      for (int h = 0; h < 2; ++h) want[2 * v + h] = target.p[v] * post[h];
    }
    const int n = 100000;
    Eigen::Vector4d freq = Eigen::Vector4d::Zero();
    for (int i = 0; i < n; ++i) {
      const Config x = sampler.draw(rng);
      freq[2 * x[0] + x[1]] += 1.0 / n;
    }
    for (int i = 0; i < 4; ++i) CHECK(std::abs(freq[i] - want[i]) < 4 * std::sqrt(want[i] * (1 - want[i]) / n));
    CHECK(std::abs(freq[2] + freq[3] - 0.7) < 4 * std::sqrt(0.21 / n));

    TargetPosteriorSampler s1(m, xi, target, cfg), s2(m, xi, target, cfg);
    Rng a(8), b(8);
    for (int i = 0; i < 50; ++i) CHECK(s1.draw(a) == s2.draw(b));

    target.units = {1};
    CHECK_THROWS(TargetPosteriorSampler(m, xi, target, cfg));
  }
}
