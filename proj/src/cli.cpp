#include "natgrad/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "natgrad/builders.hpp"
#include "natgrad/config_io.hpp"
#include "natgrad/fisher.hpp"
#include "natgrad/verify.hpp"
#include "natgrad/wake_sleep.hpp"

namespace natgrad {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const fs::path& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << body;
}

fs::path prepare_out(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir + ": " + ec.message());
  return p;
}

int thread_cap(std::ostream& err) {
  int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("NATGRAD_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) {
      err << "error: NATGRAD_THREADS must be a positive integer (got '" << env << "')\n";
      return -1;
    }
    n = std::min<long>(n, v);
  }
  return n;
}

/// A bare name that does not exist locally is looked up among the bundled configs.
std::string resolve_config(const std::string& path) {
#ifdef NATGRAD_CONFIG_DIR
  std::error_code ec;
  if (!fs::exists(path, ec) && fs::path(path).parent_path().empty()) {
    const fs::path bundled = fs::path(NATGRAD_CONFIG_DIR) / path;
    if (fs::exists(bundled, ec)) return bundled.string();
  }
#endif
  return path;
}

struct TrainOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int cmd_train(const TrainOptions& opt, std::ostream& out) {
  ExperimentConfig cfg = load_config(resolve_config(opt.config));
  if (!cfg.target) throw ConfigError(opt.config, 1, "training needs a 'target'");
  const std::uint64_t seed = opt.seed.value_or(cfg.seed);
  const DagModel& model = *cfg.model;
  const fs::path dir = prepare_out(opt.out.empty() ? cfg.out_dir : opt.out);

  const auto t0 = std::chrono::steady_clock::now();
  Rng init(seed);
  const ParamVector xi0 = init_params(model, init, cfg.init_low, cfg.init_high);
  std::string csv;
  double e0 = 0.0, e_final = 0.0;
  int iterations = 0;
  json extra = json::object();

  if (cfg.algorithm == Algorithm::GradientDescent || cfg.algorithm == Algorithm::NaturalGradient) {
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    const Trajectory tr = train(model, xi0, *cfg.target, tc);
    csv = "iter,E,grad_norm\n";
    for (const TrainRow& r : tr.rows) csv += std::to_string(r.iter) + "," + g17(r.E) + "," + g17(r.grad_norm) + "\n";
    e0 = tr.rows.front().E;
    e_final = tr.rows.back().E;
    iterations = tr.rows.back().iter;
    extra["converged"] = tr.converged;
  } else {
    WakeSleepSchedule ws = cfg.wake_sleep;
    ws.seed = seed;
    const RecognitionModel recog = RecognitionModel::full_tabular(model.space());
    const Eigen::VectorXd eta0 = init_recognition_params(recog, init, cfg.init_low, cfg.init_high);
    const WakeSleepResult res = wake_sleep_train(model, xi0, recog, eta0, *cfg.target, ws);
    csv = "iter,E,grad_norm,gap\n";
    std::string detail = "iter,E,gap,grad_xi_norm,grad_eta_norm\n";
    for (const WakeSleepRow& r : res.rows) {
      csv += std::to_string(r.iter) + "," + g17(r.E) + "," + g17(r.grad_xi_norm) + "," + g17(r.gap) + "\n";
      detail += std::to_string(r.iter) + "," + g17(r.E) + "," + g17(r.gap) + "," + g17(r.grad_xi_norm) + "," +
                g17(r.grad_eta_norm) + "\n";
    }
    write_file(dir / "wake_sleep.csv", detail);
    e0 = res.rows.front().E;
    e_final = res.rows.back().E;
    iterations = res.rows.back().iter;
    extra["final_gap"] = res.rows.back().gap;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_file(dir / "trajectory.csv", csv);

  json summary = {{"algorithm", to_string(cfg.algorithm)},
                  {"config", opt.config},
                  {"seed", seed},
                  {"initial_E", e0},
                  {"final_E", e_final},
                  {"iterations", iterations},
                  {"wall_time_s", wall}};
  summary.update(extra);
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  out << to_string(cfg.algorithm) << ": E " << g17(e0) << " -> " << g17(e_final) << " after " << iterations
      << " iterations (" << (dir / "trajectory.csv").string() << ")\n";
  return kExitOk;
}

int cmd_fisher_report(const std::string& config, const std::string& out_dir, std::ostream& out) {
  const ExperimentConfig cfg = load_config(resolve_config(config));
  const DagModel& model = *cfg.model;
  Rng rng(cfg.seed);
  const StructuralZeroReport rep =
      structural_zero_report(model, rng, cfg.report_draws, 1e-10, cfg.report_weights_only);

  json blocks = json::array();
  std::size_t b = 0;
  for (int r : model.order()) {
    const Kernel& k = model.kernel(r);
    const int size = (cfg.report_weights_only && k.family() == KernelFamily::Sigmoid) ? k.dim() - 1 : k.dim();
    blocks.push_back({{"node", r}, {"size", size}, {"nonzeros", rep.report.per_block.at(b++)}});
  }
  json j = {{"config", config},
            {"units", model.node_count()},
            {"parameters", model.dim()},
            {"weights_only", cfg.report_weights_only},
            {"draws", cfg.report_draws},
            {"abs_tol", 1e-10},
            {"total", rep.report.total},
            {"zeros", rep.report.zeros},
            {"nonzeros", rep.report.nonzeros},
            {"blocks", blocks}};
  if (cfg.layered) {
    const LayeredSpec& ls = *cfg.layered;
    const LayeredPrediction pred = layered_prediction(ls.n, ls.l);
    Rng other_rng(cfg.seed + 1);
    const auto other = structural_zero_report(layered_sigmoid_net(ls.n, ls.l, !ls.deep), other_rng,
                                              cfg.report_draws, 1e-10, cfg.report_weights_only);
    const std::int64_t shallow = ls.deep ? other.report.zeros : rep.report.zeros;
    const std::int64_t deep = ls.deep ? rep.report.zeros : other.report.zeros;
    const std::int64_t predicted = ls.deep ? pred.deep_nonzeros : pred.shallow_nonzeros;
    j["layered"] = {{"n", ls.n},
                    {"l", ls.l},
                    {"deep", ls.deep},
                    {"predicted_nonzeros_shallow", pred.shallow_nonzeros},
                    {"predicted_nonzeros_deep", pred.deep_nonzeros},
                    {"predicted_nonzeros", predicted},
                    {"prediction_matches", cfg.report_weights_only && predicted == rep.report.nonzeros},
                    {"shallow_zeros", shallow},
                    {"deep_zeros", deep},
                    {"difference", deep - shallow}};
  }
  const std::string body = j.dump(2) + "\n";
  out << body;
  if (!out_dir.empty()) write_file(prepare_out(out_dir) / "fisher_report.json", body);
  return kExitOk;
}

int cmd_verify(const std::string& suite, std::uint64_t seed, const std::string& out_dir, std::ostream& out,
               std::ostream& err) {
  const auto& names = verify_suite_names();
  if (std::find(names.begin(), names.end(), suite) == names.end()) {
    err << "error: unknown suite '" << suite << "'\n";
    return kExitConfig;
  }
  const int threads = thread_cap(err);
  if (threads < 0) return kExitConfig;
  const auto checks = run_verify(suite, seed, threads);
  bool ok = true;
  json list = json::array();
  for (const CheckResult& c : checks) {
    ok = ok && c.pass;
    list.push_back({{"suite", c.suite},
                    {"name", c.name},
                    {"residual", c.residual},
                    {"tolerance", c.tolerance},
                    {"relation", c.relation},
                    {"pass", c.pass}});
    if (!c.pass) err << "FAIL " << c.suite << "/" << c.name << ": residual " << g17(c.residual) << " " << c.relation << " "
                     << g17(c.tolerance) << " does not hold\n";
  }
  const json j = {{"suite", suite}, {"seed", seed}, {"pass", ok}, {"checks", list}};
  const std::string body = j.dump(2) + "\n";
  out << body;
  if (!out_dir.empty()) write_file(prepare_out(out_dir) / "verify.json", body);
  return ok ? kExitOk : kExitCheckFailed;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Natural-gradient learning for discrete belief networks"};
  app.require_subcommand(1);

  TrainOptions topt;
  std::uint64_t train_seed = 0;
  auto* train_cmd = app.add_subcommand("train", "Train a network and write trajectory.csv and summary.json");
  train_cmd->add_option("--config", topt.config, "Experiment config (JSON)")->required();
  auto* seed_opt = train_cmd->add_option("--seed", train_seed, "Seed overriding the config");
  train_cmd->add_option("--out", topt.out, "Output directory (default: config output.dir)");

  std::string report_config, report_out;
  auto* report_cmd = app.add_subcommand("fisher-report", "Structural sparsity of the enumerated Fisher matrix");
  report_cmd->add_option("--config", report_config, "Network config (JSON)")->required();
  report_cmd->add_option("--out", report_out, "Also write fisher_report.json here");

  std::string suite = "all", verify_out;
  std::uint64_t verify_seed = 0;
  auto* verify_cmd = app.add_subcommand("verify", "Run a verification suite and print per-check residuals");
  verify_cmd->add_option("--suite", suite, "fisher, gradient, gibbs, geometry, wakesleep or all");
  verify_cmd->add_option("--seed", verify_seed, "Seed for the random instances");
  verify_cmd->add_option("--out", verify_out, "Also write verify.json here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (train_cmd->parsed()) {
      if (*seed_opt) topt.seed = train_seed;
      return cmd_train(topt, out);
    }
    if (report_cmd->parsed()) return cmd_fisher_report(report_config, report_out, out);
    return cmd_verify(suite, verify_seed, verify_out, out, err);
  } catch (const ConfigError& e) {
    err << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const CapacityError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  }
}

}  // namespace natgrad
