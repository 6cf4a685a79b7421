#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "natgrad/dag_model.hpp"
#include "natgrad/errors.hpp"
#include "natgrad/objective.hpp"
#include "natgrad/wake_sleep.hpp"

namespace natgrad {

/// A configuration problem tied to a line of the source file.
class ConfigError : public Error {
 public:
  ConfigError(std::string file, int line, const std::string& msg)
      : Error(file + ":" + std::to_string(line) + ": error: " + msg), file_(std::move(file)), line_(line) {}
  const std::string& file() const { return file_; }
  int line() const { return line_; }

 private:
  std::string file_;
  int line_;
};

/// Line on which each JSON value starts, keyed by JSON pointer.
class JsonLineIndex {
 public:
  /// Expects syntactically valid JSON.
  explicit JsonLineIndex(const std::string& text);
  /// Line of the value at `pointer`, or of its nearest recorded ancestor.
  int line(const std::string& pointer) const;

 private:
  std::map<std::string, int> lines_;
};

enum class Algorithm { GradientDescent, NaturalGradient, WakeSleep, NaturalWakeSleep };

const char* to_string(Algorithm a);

struct LayeredSpec {
  int n = 0;
  int l = 0;
  bool deep = false;
};

struct ExperimentConfig {
  std::string source;
  std::optional<DagModel> model;
  std::optional<LayeredSpec> layered;
  std::optional<JointTable> target;
  Algorithm algorithm = Algorithm::GradientDescent;
  TrainConfig train;
  WakeSleepSchedule wake_sleep;
  double init_low = -0.5;
  double init_high = 0.5;
  /// Fisher report: random draws per structural-zero test, weights only.
  int report_draws = 5;
  bool report_weights_only = true;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

/// Parses and validates a configuration. Every problem raises ConfigError
/// anchored at the offending line of `source`.
ExperimentConfig parse_config(const std::string& text, const std::string& source);
ExperimentConfig load_config(const std::string& path);

}  // namespace natgrad
