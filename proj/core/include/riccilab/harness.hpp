#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "riccilab/config.hpp"

namespace riccilab {

enum class Experiment {
  toponogov_check,
  rac_estimate,
  conj_radius,
  critical_scan,
  betti_bound,
  pi1_basis,
  excess_scan,
  sphere_regularity,
  fibration_demo,
  angle_transfer,
};

std::string_view to_string(Experiment e);
/// Raises config_invalid for unknown names.
Experiment parse_experiment(std::string_view name);
const std::vector<Experiment>& all_experiments();

struct ExperimentConfig {
  Experiment experiment = Experiment::toponogov_check;
  Config params;
  std::uint64_t seed = 0;
  /// Output prefix; files are <out>.csv, <out>.jsonl and <out>.manifest.
  /// Empty keeps the outputs in memory only.
  std::string out;
  bool log2 = false;
  /// Worker threads for per-sample work; results never depend on it.
  int threads = 1;
};

enum ExitCode : int {
  exit_pass = 0,
  exit_assertion_failures = 1,
  exit_config_error = 2,
  exit_runtime_error = 3,
};

struct RunResult {
  int exit_code = exit_pass;
  int passed = 0;
  int total = 0;
  std::string csv;
  std::string jsonl;
  std::string manifest;
  /// Human-readable report (trace tables, error message).
  std::string log;
};

/// Validates the parameters, dispatches to the module operations and
/// renders every output. Errors are caught and mapped to exit codes; the
/// error name and message land in `log`.
RunResult run_experiment(const ExperimentConfig& cfg);

/// run_experiment plus writing the output files when cfg.out is set.
RunResult run_and_write(const ExperimentConfig& cfg);

/// Library name and version string recorded in every manifest.
std::string library_versions();

}  // namespace riccilab
