#include "natgrad/config_io.hpp"

#include <cctype>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "natgrad/builders.hpp"
#include "natgrad/kernel.hpp"

namespace natgrad {

using json = nlohmann::json;

namespace {

class Scanner {
 public:
  Scanner(const std::string& text, std::map<std::string, int>& out) : t_(text), out_(out) {}

  void value(const std::string& ptr) {
    ws();
    out_[ptr] = line_;
    if (i_ >= t_.size()) return;
    const char c = t_[i_];
    if (c == '{') {
      ++i_;
      ws();
      if (peek() == '}') {
        ++i_;
        return;
      }
      while (i_ < t_.size()) {
        ws();
        const std::string key = string();
        ws();
        ++i_;  // ':'
        value(ptr + "/" + escape(key));
        ws();
        if (t_[i_++] == '}') return;
      }
    } else if (c == '[') {
      ++i_;
      ws();
      if (peek() == ']') {
        ++i_;
        return;
      }
      for (int k = 0; i_ < t_.size(); ++k) {
        value(ptr + "/" + std::to_string(k));
        ws();
        if (t_[i_++] == ']') return;
      }
    } else if (c == '"') {
      string();
    } else {
      while (i_ < t_.size() && !std::strchr(",]} \t\r\n", t_[i_])) ++i_;
    }
  }

 private:
  char peek() const { return i_ < t_.size() ? t_[i_] : '\0'; }

  void ws() {
    while (i_ < t_.size() && std::isspace(static_cast<unsigned char>(t_[i_]))) {
      if (t_[i_] == '\n') ++line_;
      ++i_;
    }
  }

  std::string string() {
    std::string s;
    ++i_;  // opening quote
    while (i_ < t_.size() && t_[i_] != '"') {
      if (t_[i_] == '\\' && i_ + 1 < t_.size()) ++i_;
      s += t_[i_++];
    }
    ++i_;
    return s;
  }

  static std::string escape(const std::string& key) {
    std::string out;
    for (char c : key) {
      if (c == '~')
        out += "~0";
      else if (c == '/')
        out += "~1";
      else
        out += c;
    }
    return out;
  }

  const std::string& t_;
  std::map<std::string, int>& out_;
  std::size_t i_ = 0;
  int line_ = 1;
};

int line_of_byte(const std::string& text, std::size_t byte) {
  int line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

/// Typed access to a JSON object with errors anchored to source lines.
class Reader {
 public:
  Reader(const json& root, const JsonLineIndex& lines, std::string source)
      : root_(root), lines_(lines), source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& ptr, const std::string& msg) const {
    throw ConfigError(source_, lines_.line(ptr), msg);
  }

  const json& at(const std::string& ptr) const { return root_.at(json::json_pointer(ptr)); }
  bool has(const std::string& ptr) const { return root_.contains(json::json_pointer(ptr)); }

  static std::string name(const std::string& ptr) { return ptr.empty() ? "<root>" : ptr.substr(1); }

  void object(const std::string& ptr, const std::set<std::string>& allowed) const {
    const json& j = at(ptr);
    if (!j.is_object()) fail(ptr, "'" + name(ptr) + "' must be an object");
    for (const auto& [k, v] : j.items())
      if (!allowed.count(k)) fail(ptr + "/" + k, "unknown key '" + k + "' in '" + name(ptr) + "'");
  }

  void require(const std::string& ptr) const {
    if (!has(ptr)) {
      const auto cut = ptr.rfind('/');
      fail(ptr.substr(0, cut), "missing required key '" + name(ptr) + "'");
    }
  }

  double number(const std::string& ptr) const {
    const json& j = at(ptr);
    if (!j.is_number()) fail(ptr, "'" + name(ptr) + "' must be a number");
    return j.get<double>();
  }

  double number(const std::string& ptr, double fallback) const { return has(ptr) ? number(ptr) : fallback; }

  std::int64_t integer(const std::string& ptr) const {
    const json& j = at(ptr);
    if (!j.is_number_integer()) fail(ptr, "'" + name(ptr) + "' must be an integer");
    return j.get<std::int64_t>();
  }

  std::int64_t integer(const std::string& ptr, std::int64_t lo, std::int64_t fallback) const {
    if (!has(ptr)) return fallback;
    const std::int64_t v = integer(ptr);
    if (v < lo) fail(ptr, "'" + name(ptr) + "' must be >= " + std::to_string(lo));
    return v;
  }

  bool boolean(const std::string& ptr, bool fallback) const {
    if (!has(ptr)) return fallback;
    const json& j = at(ptr);
    if (!j.is_boolean()) fail(ptr, "'" + name(ptr) + "' must be true or false");
    return j.get<bool>();
  }

  std::string text(const std::string& ptr, const std::set<std::string>& choices) const {
    const json& j = at(ptr);
    if (!j.is_string()) fail(ptr, "'" + name(ptr) + "' must be a string");
    const std::string v = j.get<std::string>();
    if (!choices.empty() && !choices.count(v)) {
      std::string list;
      for (const auto& c : choices) list += (list.empty() ? "" : ", ") + c;
      fail(ptr, "'" + name(ptr) + "' must be one of " + list + " (got '" + v + "')");
    }
    return v;
  }

  std::vector<int> int_list(const std::string& ptr) const {
    const json& j = at(ptr);
    if (!j.is_array()) fail(ptr, "'" + name(ptr) + "' must be an array of integers");
    std::vector<int> out;
    for (std::size_t k = 0; k < j.size(); ++k) out.push_back(static_cast<int>(integer(ptr + "/" + std::to_string(k))));
    return out;
  }

  std::vector<double> number_list(const std::string& ptr) const {
    const json& j = at(ptr);
    if (!j.is_array()) fail(ptr, "'" + name(ptr) + "' must be an array of numbers");
    std::vector<double> out;
    for (std::size_t k = 0; k < j.size(); ++k) out.push_back(number(ptr + "/" + std::to_string(k)));
    return out;
  }

 private:
  const json& root_;
  const JsonLineIndex& lines_;
  std::string source_;
};

KernelSpec read_kernel(const Reader& rd, const std::string& ptr, std::int64_t parent_configs, int card) {
  const json& j = rd.at(ptr);
  if (j.is_string()) {
    const std::string f = rd.text(ptr, {"sigmoid", "tabular_logit"});
    return f == "sigmoid" ? KernelSpec::sigmoid() : KernelSpec::tabular_logit();
  }
  rd.object(ptr, {"family", "statistics"});
  rd.require(ptr + "/family");
  const std::string f = rd.text(ptr + "/family", {"sigmoid", "tabular_logit", "exp_family"});
  if (f == "sigmoid") return KernelSpec::sigmoid();
  if (f == "tabular_logit") return KernelSpec::tabular_logit();
  rd.require(ptr + "/statistics");
  const json& st = rd.at(ptr + "/statistics");
  if (!st.is_array() || st.empty()) rd.fail(ptr + "/statistics", "'statistics' must be a nonempty array of tables");
  std::vector<Eigen::MatrixXd> stats;
  for (std::size_t i = 0; i < st.size(); ++i) {
    const std::string tp = ptr + "/statistics/" + std::to_string(i);
    const json& t = rd.at(tp);
    if (!t.is_array() || static_cast<std::int64_t>(t.size()) != parent_configs)
      rd.fail(tp, "statistic table needs one row per parent configuration (" + std::to_string(parent_configs) + ")");
    Eigen::MatrixXd m(parent_configs, card);
    for (std::int64_t c = 0; c < parent_configs; ++c) {
      const auto row = rd.number_list(tp + "/" + std::to_string(c));
      if (static_cast<int>(row.size()) != card)
        rd.fail(tp + "/" + std::to_string(c), "statistic row needs one entry per state (" + std::to_string(card) + ")");
      for (int s = 0; s < card; ++s) m(c, s) = row[s];
    }
    stats.push_back(std::move(m));
  }
  return KernelSpec::exp_family(std::move(stats));
}

void read_network(const Reader& rd, ExperimentConfig& cfg) {
  const std::string np = "/network";
  rd.require(np);
  rd.object(np, {"layered", "cardinalities", "visible", "parents", "kernels"});
  if (rd.has(np + "/layered")) {
    const std::string lp = np + "/layered";
    rd.object(lp, {"n", "l", "deep"});
    rd.require(lp + "/n");
    rd.require(lp + "/l");
    LayeredSpec spec;
    spec.n = static_cast<int>(rd.integer(lp + "/n", 1, 1));
    spec.l = static_cast<int>(rd.integer(lp + "/l", 1, 1));
    spec.deep = rd.boolean(lp + "/deep", false);
    if (spec.n + spec.n * spec.l > 26) rd.fail(lp, "layered network exceeds the enumeration cap");
    for (const char* k : {"/cardinalities", "/visible", "/parents", "/kernels"})
      if (rd.has(np + k)) rd.fail(np + k, "'layered' networks take no explicit structure");
    cfg.layered = spec;
    cfg.model.emplace(layered_sigmoid_net(spec.n, spec.l, spec.deep));
    return;
  }
  rd.require(np + "/cardinalities");
  rd.require(np + "/visible");
  rd.require(np + "/parents");
  const std::vector<int> cards = rd.int_list(np + "/cardinalities");
  const int units = static_cast<int>(cards.size());
  if (units == 0) rd.fail(np + "/cardinalities", "network needs at least one unit");
  for (int u = 0; u < units; ++u)
    if (cards[u] < 2) rd.fail(np + "/cardinalities/" + std::to_string(u), "cardinality must be >= 2");
  const std::vector<int> visible = rd.int_list(np + "/visible");
  std::set<int> seen;
  for (std::size_t k = 0; k < visible.size(); ++k) {
    const std::string vp = np + "/visible/" + std::to_string(k);
    if (visible[k] < 0 || visible[k] >= units) rd.fail(vp, "visible unit " + std::to_string(visible[k]) + " is not defined");
    if (!seen.insert(visible[k]).second) rd.fail(vp, "visible unit " + std::to_string(visible[k]) + " listed twice");
  }
  const json& pj = rd.at(np + "/parents");
  if (!pj.is_array() || static_cast<int>(pj.size()) != units)
    rd.fail(np + "/parents", "'parents' needs one list per unit (" + std::to_string(units) + ")");
  Dag dag;
  for (int u = 0; u < units; ++u) {
    const std::string pp = np + "/parents/" + std::to_string(u);
    auto pa = rd.int_list(pp);
    std::set<int> uniq;
    for (int p : pa) {
      if (p < 0 || p >= units) rd.fail(pp, "parent " + std::to_string(p) + " of unit " + std::to_string(u) + " is not defined");
      if (p == u) rd.fail(pp, "unit " + std::to_string(u) + " lists itself as a parent");
      if (!uniq.insert(p).second) rd.fail(pp, "parent " + std::to_string(p) + " listed twice");
    }
    dag.parents.push_back(std::move(pa));
  }
  try {
    validate_dag(dag);
  } catch (const CycleError& e) {
    rd.fail(np + "/parents", e.what());
  }

  std::vector<KernelSpec> specs;
  const std::string kp = np + "/kernels";
  const bool per_unit = rd.has(kp) && rd.at(kp).is_array();
  if (per_unit && static_cast<int>(rd.at(kp).size()) != units)
    rd.fail(kp, "'kernels' needs one entry per unit (" + std::to_string(units) + ")");
  for (int u = 0; u < units; ++u) {
    std::int64_t pc = 1;
    bool binary = cards[u] == 2;
    for (int p : dag.parents[u]) {
      pc *= cards[p];
      binary = binary && cards[p] == 2;
    }
    const std::string up = !rd.has(kp) ? std::string() : per_unit ? kp + "/" + std::to_string(u) : kp;
    KernelSpec spec = up.empty() ? KernelSpec::sigmoid() : read_kernel(rd, up, pc, cards[u]);
    if (spec.family == KernelFamily::Sigmoid && !binary)
      rd.fail(up.empty() ? np + "/cardinalities" : up,
              "sigmoid kernel on unit " + std::to_string(u) + " needs a binary unit with binary parents");
    specs.push_back(std::move(spec));
  }
  try {
    cfg.model.emplace(StateSpace(cards, visible), std::move(dag), std::move(specs));
  } catch (const std::exception& e) {
    rd.fail(np, e.what());
  }
}

void read_target(const Reader& rd, ExperimentConfig& cfg) {
  const std::string tp = "/target";
  if (!rd.has(tp)) return;
  rd.object(tp, {"table", "random_seed"});
  const DagModel& model = *cfg.model;
  const auto& vis = model.space().visible();
  JointTable t;
  t.units = vis;
  for (int v : vis) t.cards.push_back(model.space().cardinality(v));
  const std::int64_t n = config_count(model.space(), vis);
  if (rd.has(tp + "/table") == rd.has(tp + "/random_seed"))
    rd.fail(tp, "target needs exactly one of 'table' or 'random_seed'");
  if (rd.has(tp + "/random_seed")) {
    Rng rng(static_cast<std::uint64_t>(rd.integer(tp + "/random_seed", 0, 0)));
    cfg.target = random_target(model, rng);
    return;
  }
  const auto p = rd.number_list(tp + "/table");
  if (static_cast<std::int64_t>(p.size()) != n)
    rd.fail(tp + "/table", "target table needs " + std::to_string(n) + " entries (one per visible configuration)");
  t.p = Eigen::Map<const Eigen::VectorXd>(p.data(), n);
  for (std::int64_t i = 0; i < n; ++i)
    if (!(t.p[i] > 0.0)) rd.fail(tp + "/table/" + std::to_string(i), "target entries must be strictly positive");
  if (std::abs(t.p.sum() - 1.0) > 1e-12) rd.fail(tp + "/table", "target table must sum to 1 (within 1e-12)");
  cfg.target = std::move(t);
}

}  // namespace

JsonLineIndex::JsonLineIndex(const std::string& text) {
  Scanner(text, lines_).value("");
}

int JsonLineIndex::line(const std::string& pointer) const {
  std::string p = pointer;
  while (true) {
    const auto it = lines_.find(p);
    if (it != lines_.end()) return it->second;
    if (p.empty()) return 1;
    p = p.substr(0, p.rfind('/'));
  }
}

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::GradientDescent: return "gd";
    case Algorithm::NaturalGradient: return "natgrad";
    case Algorithm::WakeSleep: return "wake-sleep";
    case Algorithm::NaturalWakeSleep: return "natural-wake-sleep";
  }
  return "?";
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    std::string msg = e.what();
    if (const auto pos = msg.find("syntax error"); pos != std::string::npos) msg = msg.substr(pos);
    throw ConfigError(source, line_of_byte(text, e.byte > 0 ? e.byte - 1 : 0), msg);
  }
  const JsonLineIndex lines(text);
  const Reader rd(root, lines, source);
  rd.object("", {"network", "target", "algorithm", "schedule", "expectation", "gibbs", "init", "report", "seed",
                 "output"});

  ExperimentConfig cfg;
  cfg.source = source;
  read_network(rd, cfg);
  read_target(rd, cfg);

  if (rd.has("/algorithm")) {
    const std::string a = rd.text("/algorithm", {"gd", "natgrad", "wake-sleep", "natural-wake-sleep"});
    cfg.algorithm = a == "gd"           ? Algorithm::GradientDescent
                    : a == "natgrad"    ? Algorithm::NaturalGradient
                    : a == "wake-sleep" ? Algorithm::WakeSleep
                                        : Algorithm::NaturalWakeSleep;
  }
  if (rd.has("/seed")) cfg.seed = static_cast<std::uint64_t>(rd.integer("/seed", 0, 0));

  TrainConfig& tc = cfg.train;
  WakeSleepSchedule& ws = cfg.wake_sleep;
  if (rd.has("/schedule")) {
    const std::string sp = "/schedule";
    rd.object(sp, {"steps", "step_size", "step_size_recognition", "k_sleep", "stop_tol", "pinv_rel_tol",
                   "gap_threshold"});
    tc.max_iters = static_cast<int>(rd.integer(sp + "/steps", 0, tc.max_iters));
    ws.iters = rd.has(sp + "/steps") ? tc.max_iters : ws.iters;
    for (const char* k : {"/step_size", "/step_size_recognition", "/stop_tol", "/pinv_rel_tol", "/gap_threshold"})
      if (rd.has(sp + k) && !(rd.number(sp + k) >= 0.0)) rd.fail(sp + k, "'" + std::string(k + 1) + "' must be >= 0");
    tc.step = ws.step_xi = rd.number(sp + "/step_size", tc.step);
    ws.step_eta = rd.number(sp + "/step_size_recognition", ws.step_eta);
    ws.k_sleep = static_cast<int>(rd.integer(sp + "/k_sleep", 1, ws.k_sleep));
    tc.stop_tol = rd.number(sp + "/stop_tol", tc.stop_tol);
    tc.pinv_rel_tol = ws.pinv_rel_tol = rd.number(sp + "/pinv_rel_tol", tc.pinv_rel_tol);
    if (!(tc.pinv_rel_tol > 0.0)) rd.fail(sp + "/pinv_rel_tol", "'pinv_rel_tol' must be positive");
    if (rd.has(sp + "/gap_threshold")) {
      if (rd.at(sp + "/gap_threshold").is_null())
        ws.gap_threshold.reset();
      else
        ws.gap_threshold = rd.number(sp + "/gap_threshold");
    }
  }
  if (rd.has("/expectation")) {
    const std::string ep = "/expectation";
    rd.object(ep, {"mode", "n_samples", "sampler"});
    if (rd.has(ep + "/mode")) {
      const bool mc = rd.text(ep + "/mode", {"exact", "mc"}) == "mc";
      tc.expectation = ws.mode = mc ? ExpectationMode::MonteCarlo : ExpectationMode::Exact;
    }
    tc.n_samples = ws.n_samples = static_cast<int>(rd.integer(ep + "/n_samples", 1, tc.n_samples));
    if (rd.has(ep + "/sampler"))
      tc.sampler = rd.text(ep + "/sampler", {"exact", "gibbs"}) == "exact" ? PosteriorSamplerKind::Exact
                                                                          : PosteriorSamplerKind::Gibbs;
  }
  if (rd.has("/gibbs")) {
    const std::string gp = "/gibbs";
    rd.object(gp, {"burn_in", "thinning", "order"});
    tc.gibbs.burn_in = static_cast<int>(rd.integer(gp + "/burn_in", 0, tc.gibbs.burn_in));
    tc.gibbs.thinning = static_cast<int>(rd.integer(gp + "/thinning", 1, tc.gibbs.thinning));
    if (rd.has(gp + "/order"))
      tc.gibbs.order = rd.text(gp + "/order", {"random", "sequential"}) == "random" ? SweepOrder::Random
                                                                                  : SweepOrder::Sequential;
  }
  if (rd.has("/init")) {
    rd.object("/init", {"low", "high"});
    cfg.init_low = rd.number("/init/low", cfg.init_low);
    cfg.init_high = rd.number("/init/high", cfg.init_high);
    if (!(cfg.init_low <= cfg.init_high)) rd.fail("/init", "'init.low' must not exceed 'init.high'");
  }
  if (rd.has("/report")) {
    rd.object("/report", {"draws", "weights_only"});
    cfg.report_draws = static_cast<int>(rd.integer("/report/draws", 1, cfg.report_draws));
    cfg.report_weights_only = rd.boolean("/report/weights_only", cfg.report_weights_only);
  }
  if (rd.has("/output")) {
    rd.object("/output", {"dir"});
    if (rd.has("/output/dir")) cfg.out_dir = rd.text("/output/dir", {});
  }
  ws.natural = cfg.algorithm == Algorithm::NaturalWakeSleep;
  tc.grad_mode = cfg.algorithm == Algorithm::NaturalGradient ? GradMode::Natural : GradMode::Euclidean;
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path, 1, "cannot open configuration file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

}  // namespace natgrad
