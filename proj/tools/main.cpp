// riccilab <experiment> --config <file> [--seed N] [--out <prefix>] [--log2] [--key=value ...]

#include <algorithm>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "riccilab/error.hpp"
#include "riccilab/harness.hpp"

namespace {

int config_error(const std::string& what) {
  std::cerr << "error: " << what << "\n";
  return riccilab::exit_config_error;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Seeded, reproducible comparison-geometry experiments."};
  app.allow_extras();

  std::string experiment;
  std::string config_path;
  std::string seed;
  std::string out;
  bool log2 = false;
  bool list = false;
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

  app.add_option("experiment", experiment, "Experiment name (see --list)");
  app.add_option("--config", config_path, "key = value config file");
  app.add_option("--seed", seed, "Master seed (overrides the config)");
  app.add_option("--out", out, "Output prefix: <out>.csv, <out>.jsonl, <out>.manifest");
  app.add_flag("--log2", log2, "Print bound values as log2");
  app.add_option("--threads", threads, "Worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
  app.add_flag("--list", list, "List experiments and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : riccilab::exit_config_error;
  }

  if (list) {
    for (auto e : riccilab::all_experiments()) std::cout << riccilab::to_string(e) << "\n";
    return 0;
  }

  riccilab::ExperimentConfig ec;
  try {
    if (experiment.empty()) return config_error("config-invalid: no experiment given");
    ec.experiment = riccilab::parse_experiment(experiment);
    if (!config_path.empty()) ec.params = riccilab::Config::load(config_path);
    for (const auto& extra : app.remaining()) {
      const auto eq = extra.find('=');
      if (extra.rfind("--", 0) != 0 || eq == std::string::npos || eq == 2) {
        return config_error("config-invalid: expected --key=value, got '" + extra + "'");
      }
      ec.params.set(extra.substr(2, eq - 2), extra.substr(eq + 1));
    }
    if (ec.params.has("experiment") && ec.params.get_string("experiment") != experiment) {
      return config_error("config-invalid: field 'experiment' does not match the command line");
    }
    if (!seed.empty()) ec.params.set("seed", seed);
    ec.seed = ec.params.get_u64("seed", 0);
  } catch (const riccilab::Error& e) {
    return config_error(e.what());
  }
  ec.out = out;
  ec.log2 = log2;
  ec.threads = threads;

  const auto result = riccilab::run_and_write(ec);
  if (result.exit_code == riccilab::exit_config_error || result.exit_code == riccilab::exit_runtime_error) {
    std::cerr << result.log;
    return result.exit_code;
  }
  std::cout << result.log;
  if (out.empty()) std::cout << result.csv;
  std::cerr << riccilab::to_string(ec.experiment) << ": " << result.passed << "/" << result.total << " passed\n";
  return result.exit_code;
}
