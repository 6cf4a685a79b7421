#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "natgrad/cli.hpp"
#include "natgrad/config_io.hpp"

using namespace natgrad;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "natgrad-cli");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(NATGRAD_TEST_OUT) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string acceptance_config(const std::string& algorithm, int steps) {
  return R"({
  "network": {
    "cardinalities": [2, 2, 2, 2],
    "visible": [0, 1],
    "parents": [[2, 3], [2, 3], [], []],
    "kernels": "sigmoid"
  },
  "target": {"table": [0.4, 0.1, 0.1, 0.4]},
  "algorithm": ")" + algorithm + R"(",
  "schedule": {"steps": )" + std::to_string(steps) + R"(, "step_size": 0.05, "k_sleep": 25},
  "seed": 3
})";
}

fs::path write_config(const fs::path& dir, const std::string& body) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << body;
  return p;
}

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors") {
    CHECK(run({}).code == kExitConfig);
    CHECK(run({"frobnicate"}).code == kExitConfig);
    CHECK(run({"train"}).code == kExitConfig);
    CHECK(run({"--help"}).code == kExitOk);
    const Run r = run({"verify", "--suite", "nope"});
    CHECK(r.code == kExitConfig);
    CHECK(r.err.find("unknown suite 'nope'") != std::string::npos);
    CHECK(run({"train", "--config", "/nonexistent/config.json"}).code == kExitConfig);
  }

  TEST_CASE("malformed configs report the offending line") {
    const std::vector<std::pair<std::string, int>> cases = {
        {"bad_syntax.json", 6},          {"bad_missing_network.json", 1}, {"bad_unknown_algorithm.json", 8},
        {"bad_negative_step.json", 10},  {"bad_cycle.json", 5},           {"bad_target_sum.json", 8},
        {"bad_undefined_parent.json", 7}, {"bad_visible_unit.json", 4},   {"bad_unknown_key.json", 8},
        {"bad_seed_type.json", 8},       {"bad_cardinality.json", 3},     {"bad_sigmoid_ternary.json", 6},
    };
    const fs::path out = scratch("fixtures");
    for (const auto& [name, line] : cases) {
      CAPTURE(name);
      const std::string path = (fs::path(NATGRAD_FIXTURE_DIR) / name).string();
      const Run r = run({"train", "--config", path, "--out", out.string()});
      CHECK(r.code == kExitConfig);
      CHECK(r.err.find(path + ":" + std::to_string(line) + ": error: ") == 0);
      CHECK(run({"fisher-report", "--config", path}).code == kExitConfig);
    }
    CHECK(fs::is_empty(out));
  }

  TEST_CASE("config line index") {
    const JsonLineIndex idx("{\n  \"a\": [1,\n    2],\n  \"b\": {\"c\": 3}\n}");
    CHECK(idx.line("") == 1);
    CHECK(idx.line("/a") == 2);
    CHECK(idx.line("/a/1") == 3);
    CHECK(idx.line("/b/c") == 4);
    CHECK(idx.line("/b/missing") == 4);
  }

  TEST_CASE("config parsing") {
    const ExperimentConfig c = parse_config(acceptance_config("natural-wake-sleep", 7), "inline");
    REQUIRE(c.model);
    CHECK(c.model->node_count() == 4);
    CHECK(c.algorithm == Algorithm::NaturalWakeSleep);
    CHECK(c.wake_sleep.iters == 7);
    CHECK(c.wake_sleep.natural);
    CHECK(c.seed == 3);
    REQUIRE(c.target);
    CHECK(c.target->p[0] == 0.4);
    CHECK_THROWS_AS(parse_config("{\"network\": {\"layered\": {\"n\": 0, \"l\": 1}}}", "x"), ConfigError);
  }

  TEST_CASE("train with zero steps writes the initial row only") {
    const fs::path dir = scratch("zero_steps");
    for (const std::string alg : {"gd", "wake-sleep"}) {
      const fs::path cfg = write_config(dir, acceptance_config(alg, 0));
      const Run r = run({"train", "--config", cfg.string(), "--out", (dir / alg).string()});
      REQUIRE(r.code == kExitOk);
      const std::string csv = slurp(dir / alg / "trajectory.csv");
      CHECK(count_lines(csv) == 2);
      CHECK(csv.rfind(alg == "gd" ? "iter,E,grad_norm\n0," : "iter,E,grad_norm,gap\n0,", 0) == 0);
      const auto summary = nlohmann::json::parse(slurp(dir / alg / "summary.json"));
      CHECK(summary["iterations"] == 0);
      CHECK(summary["initial_E"] == summary["final_E"]);
      CHECK(summary["seed"] == 3);
    }
    CHECK(count_lines(slurp(dir / "wake-sleep" / "wake_sleep.csv")) == 2);
  }

  TEST_CASE("train output is reproducible and the seed flag matters") {
    const fs::path dir = scratch("determinism");
    const fs::path cfg = write_config(dir, acceptance_config("natgrad", 40));
    REQUIRE(run({"train", "--config", cfg.string(), "--out", (dir / "a").string()}).code == kExitOk);
    REQUIRE(run({"train", "--config", cfg.string(), "--out", (dir / "b").string()}).code == kExitOk);
    REQUIRE(run({"train", "--config", cfg.string(), "--out", (dir / "c").string(), "--seed", "4"}).code == kExitOk);
    const std::string a = slurp(dir / "a" / "trajectory.csv");
    CHECK(count_lines(a) == 42);  // header plus iterations 0..40
    CHECK(a == slurp(dir / "b" / "trajectory.csv"));
    CHECK(a != slurp(dir / "c" / "trajectory.csv"));
    CHECK(nlohmann::json::parse(slurp(dir / "c" / "summary.json"))["seed"] == 4);
  }

  TEST_CASE("train reaches a tenth of the initial objective") {
    const fs::path dir = scratch("acceptance");
    for (const std::string alg : {"gd", "wake-sleep"}) {
      const fs::path cfg = write_config(dir, acceptance_config(alg, 2000));
      REQUIRE(run({"train", "--config", cfg.string(), "--out", (dir / alg).string()}).code == kExitOk);
      const auto s = nlohmann::json::parse(slurp(dir / alg / "summary.json"));
      CHECK(s["final_E"].get<double>() < 0.1 * s["initial_E"].get<double>());
      CHECK(s["algorithm"] == alg);
    }
  }

  TEST_CASE("numeric failures exit with 3") {
    const fs::path dir = scratch("numeric");
    std::string body = acceptance_config("gd", 50);
    body.replace(body.find("\"step_size\": 0.05"), 17, "\"step_size\": 1e308");
    const fs::path cfg = write_config(dir, body);
    const Run r = run({"train", "--config", cfg.string(), "--out", dir.string()});
    CHECK(r.code == kExitNumeric);
    CHECK(r.err.find("numeric failure") != std::string::npos);
  }

  TEST_CASE("fisher report on the layered nets") {
    Run r = run({"fisher-report", "--config", "shallow_3x9.json"});
    REQUIRE(r.code == kExitOk);
    auto j = nlohmann::json::parse(r.out);
    CHECK(j["zeros"] == 486);
    CHECK(j["total"] == 729);
    CHECK(j["layered"]["difference"] == 162);
    CHECK(j["layered"]["prediction_matches"] == true);
    CHECK(j["blocks"].size() == 12);

    const fs::path dir = scratch("report");
    r = run({"fisher-report", "--config", "deep_3x3x3.json", "--out", dir.string()});
    REQUIRE(r.code == kExitOk);
    j = nlohmann::json::parse(slurp(dir / "fisher_report.json"));
    CHECK(j["zeros"] == 648);
    CHECK(j["layered"]["shallow_zeros"] == 486);
    CHECK(j["layered"]["deep_zeros"] == 648);
    CHECK(j["layered"]["predicted_nonzeros"] == 81);
  }

  TEST_CASE("verify") {
    const fs::path dir = scratch("verify");
    const Run r = run({"verify", "--suite", "gibbs", "--seed", "2", "--out", dir.string()});
    CHECK(r.code == kExitOk);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["pass"] == true);
    CHECK(j["suite"] == "gibbs");
    CHECK(j["checks"].size() >= 4);
    for (const auto& c : j["checks"]) CHECK(c["suite"] == "gibbs");
    CHECK(slurp(dir / "verify.json") == r.out);
  }
}
