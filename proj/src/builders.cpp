#include "natgrad/builders.hpp"

#include <algorithm>
#include <stdexcept>

namespace natgrad {

namespace {

std::vector<int> last_units(int nodes, int count) {
  std::vector<int> v;
  for (int u = nodes - count; u < nodes; ++u) v.push_back(u);
  return v;
}

std::vector<int> draw_parents(Rng& rng, int r, int max_parents) {
  std::vector<int> pa;
  for (int j = 0; j < r; ++j)
    if (uniform01(rng) < 0.5) pa.push_back(j);
  while (static_cast<int>(pa.size()) > max_parents) pa.erase(pa.begin() + uniform_int(rng, static_cast<int>(pa.size())));
  return pa;
}

}  // namespace

DagModel random_sigmoid_net(Rng& rng, int nodes, int visible_count, int max_parents) {
  if (nodes < 1 || visible_count < 0 || visible_count > nodes)
    throw std::invalid_argument("random_sigmoid_net: bad sizes");
  Dag dag;
  for (int r = 0; r < nodes; ++r) dag.parents.push_back(draw_parents(rng, r, max_parents));
  return DagModel(StateSpace::binary(nodes, last_units(nodes, visible_count)), std::move(dag),
                  std::vector<KernelSpec>(nodes, KernelSpec::sigmoid()));
}

KernelSpec random_exp_family_spec(Rng& rng, std::int64_t parent_configs, int cardinality, int statistics) {
  std::vector<Eigen::MatrixXd> stats;
  for (int i = 0; i < statistics; ++i) {
    Eigen::MatrixXd t(parent_configs, cardinality);
    for (std::int64_t c = 0; c < parent_configs; ++c)
      for (int s = 0; s < cardinality; ++s) t(c, s) = uniform(rng, -1.0, 1.0);
    stats.push_back(std::move(t));
  }
  return KernelSpec::exp_family(std::move(stats));
}

DagModel random_mixed_net(Rng& rng, int nodes, int visible_count, int max_parents) {
  std::vector<int> cards(nodes);
  for (int& c : cards) c = uniform01(rng) < 0.5 ? 2 : 3;
  Dag dag;
  for (int r = 0; r < nodes; ++r) dag.parents.push_back(draw_parents(rng, r, max_parents));
  std::vector<KernelSpec> specs;
  for (int r = 0; r < nodes; ++r) {
    std::int64_t pc = 1;
    bool binary = cards[r] == 2;
    for (int p : dag.parents[r]) {
      pc *= cards[p];
      binary = binary && cards[p] == 2;
    }
    const double u = uniform01(rng);
    if (binary && u < 0.33)
      specs.push_back(KernelSpec::sigmoid());
    else if (u < 0.66)
      specs.push_back(random_exp_family_spec(rng, pc, cards[r], 1 + uniform_int(rng, 3)));
    else
      specs.push_back(KernelSpec::tabular_logit());
  }
  return DagModel(StateSpace(cards, last_units(nodes, visible_count)), std::move(dag), std::move(specs));
}

DagModel layered_sigmoid_net(int n, int l, bool deep) {
  if (n < 1 || l < 1) throw std::invalid_argument("layered_sigmoid_net: n and l must be positive");
  const int units = n + l * n;
  Dag dag;
  dag.parents.assign(units, {});
  std::vector<int> visible(n);
  for (int v = 0; v < n; ++v) visible[v] = v;
  if (!deep) {
    std::vector<int> hidden;
    for (int h = n; h < units; ++h) hidden.push_back(h);
    for (int v = 0; v < n; ++v) dag.parents[v] = hidden;
  } else {
    // Hidden layer k (0 = top) occupies units n + k*n .. n + (k+1)*n - 1.
    auto layer = [n](int k) {
      std::vector<int> u;
      for (int i = 0; i < n; ++i) u.push_back(n + k * n + i);
      return u;
    };
    for (int k = 1; k < l; ++k)
      for (int u : layer(k)) dag.parents[u] = layer(k - 1);
    for (int v = 0; v < n; ++v) dag.parents[v] = layer(l - 1);
  }
  return DagModel(StateSpace::binary(units, visible), std::move(dag),
                  std::vector<KernelSpec>(units, KernelSpec::sigmoid()));
}

DagModel acceptance_net() {
  Dag dag;
  dag.parents = {{2, 3}, {2, 3}, {}, {}};
  return DagModel(StateSpace::binary(4, {0, 1}), std::move(dag), std::vector<KernelSpec>(4, KernelSpec::sigmoid()));
}

JointTable acceptance_target() {
  JointTable t;
  t.units = {0, 1};
  t.cards = {2, 2};
  t.p = Eigen::VectorXd(4);
  t.p << 0.4, 0.1, 0.1, 0.4;
  return t;
}

JointTable random_target(const DagModel& model, Rng& rng) {
  const auto& vis = model.space().visible();
  JointTable t;
  t.units = vis;
  for (int v : vis) t.cards.push_back(model.space().cardinality(v));
  t.p = uniform_vector(rng, static_cast<int>(config_count(model.space(), vis)), 0.05, 1.0);
  t.p /= t.p.sum();
  return t;
}

}  // namespace natgrad
