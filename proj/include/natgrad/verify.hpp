#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace natgrad {

struct CheckResult {
  std::string suite;
  std::string name;
  double residual = 0.0;
  double tolerance = 0.0;
  /// "<" (residual below tolerance), ">" (residual above tolerance) or
  /// "expected" (a property expected to fail, residual 1 when it does).
  std::string relation = "<";
  bool pass = false;
};

const std::vector<std::string>& verify_suite_names();

/// Runs one suite ("fisher", "gradient", "gibbs", "geometry", "wakesleep")
/// or "all". Throws std::invalid_argument on an unknown name.
std::vector<CheckResult> run_verify(const std::string& suite, std::uint64_t seed, int threads = 1);

}  // namespace natgrad
