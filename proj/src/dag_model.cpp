#include "natgrad/dag_model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <stdexcept>
#include <string>

#include "natgrad/errors.hpp"

namespace natgrad {

std::vector<std::vector<int>> Dag::children() const {
  std::vector<std::vector<int>> ch(parents.size());
  for (int s = 0; s < node_count(); ++s)
    for (int r : parents[s]) ch.at(r).push_back(s);
  return ch;
}

std::vector<int> validate_dag(const Dag& dag) {
  const int n = dag.node_count();
  std::vector<int> indeg(n, 0);
  for (int s = 0; s < n; ++s) {
    for (int r : dag.parents[s]) {
      if (r < 0 || r >= n)
        throw std::out_of_range("parent " + std::to_string(r) + " of node " + std::to_string(s) +
                                " out of range");
    }
    std::vector<int> sorted = dag.parents[s];
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw std::invalid_argument("duplicate parent of node " + std::to_string(s));
    indeg[s] = static_cast<int>(dag.parents[s].size());
  }
  const auto ch = dag.children();
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (int s = 0; s < n; ++s)
    if (indeg[s] == 0) ready.push(s);
  std::vector<int> order;
  order.reserve(n);
  while (!ready.empty()) {
    const int r = ready.top();
    ready.pop();
    order.push_back(r);
    for (int s : ch[r])
      if (--indeg[s] == 0) ready.push(s);
  }
  if (static_cast<int>(order.size()) != n) throw CycleError("graph contains a directed cycle");
  return order;
}

std::int64_t JointTable::index(const Config& sub) const {
  if (sub.size() != units.size()) throw std::invalid_argument("configuration does not match table units");
  std::int64_t idx = 0;
  for (std::size_t k = 0; k < units.size(); ++k) {
    if (sub[k] < 0 || sub[k] >= cards[k]) throw std::out_of_range("state out of range");
    idx = idx * cards[k] + sub[k];
  }
  return idx;
}

Config JointTable::config(std::int64_t index) const {
  if (index < 0 || index >= size()) throw std::out_of_range("table index out of range");
  Config c{std::vector<int>(units.size())};
  for (std::size_t k = units.size(); k-- > 0;) {
    c[k] = static_cast<int>(index % cards[k]);
    index /= cards[k];
  }
  return c;
}

DagModel::DagModel(StateSpace space, Dag dag, std::vector<KernelSpec> specs)
    : space_(std::move(space)), dag_(std::move(dag)) {
  if (dag_.node_count() != space_.unit_count())
    throw std::invalid_argument("graph has " + std::to_string(dag_.node_count()) +
                                " nodes but the state space has " +
                                std::to_string(space_.unit_count()) + " units");
  if (specs.size() != dag_.parents.size())
    throw std::invalid_argument("need one kernel spec per node");
  order_ = validate_dag(dag_);
  children_ = dag_.children();
  kernels_.reserve(specs.size());
  for (int r = 0; r < node_count(); ++r)
    kernels_.emplace_back(r, dag_.parents[r], std::move(specs[r]), space_);
  offsets_.assign(node_count(), 0);
  for (int r : order_) {
    offsets_[r] = dim_;
    dim_ += kernels_[r].dim();
  }
}

int DagModel::flat_index(int r, int i) const {
  if (i < 0 || i >= block_dim(r)) throw std::out_of_range("parameter index out of range");
  return offsets_.at(r) + i;
}

void DagModel::check_params(const ParamVector& params) const {
  if (params.size() != dim_)
    throw std::invalid_argument("parameter vector has length " + std::to_string(params.size()) +
                                ", expected " + std::to_string(dim_));
}

namespace {

std::int64_t parent_config_index(const DagModel& model, int r, const Config& parent_config) {
  const auto& pa = model.kernel(r).parents();
  return config_to_index(model.space(), pa, parent_config);
}

}  // namespace

double kernel_prob(const DagModel& model, int r, const Config& parent_config, int state,
                   const ParamVector& params) {
  model.check_params(params);
  const Kernel& k = model.kernel(r);
  if (state < 0 || state >= k.cardinality()) throw std::out_of_range("state out of range");
  return k.probs(parent_config_index(model, r, parent_config), model.block(params, r))[state];
}

Eigen::VectorXd kernel_log_grad(const DagModel& model, int r, const Config& parent_config,
                                int state, const ParamVector& params) {
  model.check_params(params);
  return model.kernel(r).log_grad(parent_config_index(model, r, parent_config), state,
                                  model.block(params, r));
}

Eigen::MatrixXd kernel_log_table(const DagModel& model, int r, const ParamVector& params) {
  const Kernel& k = model.kernel(r);
  Eigen::MatrixXd t(k.parent_configs(), k.cardinality());
  for (std::int64_t c = 0; c < k.parent_configs(); ++c)
    t.row(c) = k.log_probs(c, model.block(params, r)).transpose();
  return t;
}

double log_joint(const DagModel& model, const ParamVector& params, const Config& full) {
  model.check_params(params);
  double lp = 0.0;
  for (int r = 0; r < model.node_count(); ++r) {
    const Kernel& k = model.kernel(r);
    lp += k.log_probs(k.parent_index(full), model.block(params, r))[full[r]];
  }
  return lp;
}

JointTable joint_table(const DagModel& model, const ParamVector& params) {
  model.check_params(params);
  const StateSpace& space = model.space();
  const int n = model.node_count();
  std::vector<Eigen::MatrixXd> logk(n);
  for (int r = 0; r < n; ++r) logk[r] = kernel_log_table(model, r, params);

  JointTable t{space.all_units(), space.cardinalities(), Eigen::VectorXd(space.total_configs())};
  Config x{std::vector<int>(n, 0)};
  const auto units = space.all_units();
  std::int64_t i = 0;
  do {
    double lp = 0.0;
    for (int r = 0; r < n; ++r) lp += logk[r](model.kernel(r).parent_index(x), x[r]);
    t.p[i++] = std::exp(lp);
  } while (next_config(x, units, space));
  return t;
}

JointTable marginal(const JointTable& table, std::span<const int> subset) {
  std::vector<int> pos(subset.size());
  JointTable out;
  out.units.assign(subset.begin(), subset.end());
  std::int64_t n = 1;
  for (std::size_t k = 0; k < subset.size(); ++k) {
    const auto it = std::find(table.units.begin(), table.units.end(), subset[k]);
    if (it == table.units.end())
      throw std::out_of_range("unit " + std::to_string(subset[k]) + " not in table");
    pos[k] = static_cast<int>(it - table.units.begin());
    out.cards.push_back(table.cards[pos[k]]);
    n *= out.cards.back();
  }
  out.p = Eigen::VectorXd::Zero(n);
  std::vector<int> st(table.units.size(), 0);
  for (std::int64_t i = 0; i < table.size(); ++i) {
    std::int64_t j = 0;
    for (std::size_t k = 0; k < pos.size(); ++k) j = j * out.cards[k] + st[pos[k]];
    out.p[j] += table.p[i];
    for (std::size_t k = st.size(); k-- > 0;) {
      if (++st[k] < table.cards[k]) break;
      st[k] = 0;
    }
  }
  return out;
}

JointTable conditional(const JointTable& table, std::span<const int> target,
                       std::span<const int> given_units, const Config& given_states) {
  if (given_states.size() != given_units.size())
    throw std::invalid_argument("given states do not match given units");
  for (int g : given_units)
    if (std::find(target.begin(), target.end(), g) != target.end())
      throw std::invalid_argument("target and given units overlap");

  std::vector<int> both(target.begin(), target.end());
  both.insert(both.end(), given_units.begin(), given_units.end());
  const JointTable m = marginal(table, both);

  std::int64_t given_idx = 0;
  std::int64_t given_n = 1;
  for (std::size_t k = 0; k < given_units.size(); ++k) {
    const int card = m.cards[target.size() + k];
    if (given_states[k] < 0 || given_states[k] >= card) throw std::out_of_range("given state out of range");
    given_idx = given_idx * card + given_states[k];
    given_n *= card;
  }
  JointTable out;
  out.units.assign(target.begin(), target.end());
  out.cards.assign(m.cards.begin(), m.cards.begin() + static_cast<std::ptrdiff_t>(target.size()));
  const std::int64_t nt = m.size() / given_n;
  out.p.resize(nt);
  for (std::int64_t i = 0; i < nt; ++i) out.p[i] = m.p[i * given_n + given_idx];
  const double mass = out.p.sum();
  if (!(mass > 1e-300)) throw ZeroMassError("conditioning slice has zero mass");
  out.p /= mass;
  return out;
}

Config ancestral_sample(const DagModel& model, const ParamVector& params, Rng& rng) {
  model.check_params(params);
  Config x{std::vector<int>(model.node_count(), 0)};
  for (int r : model.order()) {
    const Kernel& k = model.kernel(r);
    x[r] = categorical(rng, k.probs(k.parent_index(x), model.block(params, r)));
  }
  return x;
}

JointTable visible_marginal(const DagModel& model, const ParamVector& params) {
  return marginal(joint_table(model, params), model.space().visible());
}

Eigen::VectorXd log_joint_grad(const DagModel& model, const ParamVector& params, const Config& full) {
  model.check_params(params);
  Eigen::VectorXd g(model.dim());
  for (int r = 0; r < model.node_count(); ++r) {
    const Kernel& k = model.kernel(r);
    g.segment(model.offset(r), k.dim()) = k.log_grad(k.parent_index(full), full[r], model.block(params, r));
  }
  return g;
}

Eigen::MatrixXd joint_scores(const DagModel& model, const ParamVector& params) {
  model.check_params(params);
  const StateSpace& space = model.space();
  const int n = model.node_count();
  // Per node: score rows indexed by c * card + s.
  std::vector<Eigen::MatrixXd> grads(n);
  for (int r = 0; r < n; ++r) {
    const Kernel& k = model.kernel(r);
    grads[r].resize(k.parent_configs() * k.cardinality(), k.dim());
    for (std::int64_t c = 0; c < k.parent_configs(); ++c)
      grads[r].middleRows(c * k.cardinality(), k.cardinality()) = k.log_grads(c, model.block(params, r));
  }
  Eigen::MatrixXd S(space.total_configs(), model.dim());
  Config x{std::vector<int>(n, 0)};
  const auto units = space.all_units();
  std::int64_t i = 0;
  do {
    for (int r = 0; r < n; ++r) {
      const Kernel& k = model.kernel(r);
      S.row(i).segment(model.offset(r), k.dim()) =
          grads[r].row(k.parent_index(x) * k.cardinality() + x[r]);
    }
    ++i;
  } while (next_config(x, units, space));
  return S;
}

ParamVector init_params(const DagModel& model, Rng& rng, double lo, double hi) {
  ParamVector p(model.dim());
  for (int r : model.order()) {
    const Kernel& k = model.kernel(r);
    auto b = model.block(p, r);
    for (int i = 0; i < k.dim(); ++i) b[i] = uniform(rng, lo, hi);
    if (k.family() == KernelFamily::Sigmoid) b[k.dim() - 1] = 0.0;
  }
  return p;
}

ParamVector random_params(const DagModel& model, Rng& rng, double lo, double hi) {
  return uniform_vector(rng, model.dim(), lo, hi);
}

}  // namespace natgrad
