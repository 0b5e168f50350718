#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "frailsim/fitter.hpp"
#include "frailsim/simulator.hpp"

namespace frailsim::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kDataError = 3, kNumericError = 4 };

/// Settings for `simulate` and `mc`. Read from a flat `key = value` file
/// (see README for the keys); command-line flags override file values.
struct RunConfig {
  std::vector<std::string> scenario_ids;  // empty with all_scenarios = true means the full grid
  bool all_scenarios = false;
  std::vector<Scenario> custom_scenarios;
  std::vector<std::string> model_ids;
  int n_sim = 10;
  std::uint64_t master_seed = 20240101;
  int workers = 1;
  std::filesystem::path out = "frailsim-out";
  int gh_nodes = 15;
  double horizon = 5.0;
  double filter_threshold = 10.0;
  double filter_alarm = 0.05;
  int max_evaluations = 20000;

  std::vector<Scenario> resolve_scenarios() const;
  std::vector<ModelSpec> resolve_models() const;
};

RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);

/// Inline scenario, e.g.
/// "baseline=wei(0.5,0.8); frailty=gamma(0.75); clusters=20; size=150; beta=-0.5".
Scenario parse_scenario_definition(const std::string& id, const std::string& definition);

/// Entry point shared by the executable and the tests; returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace frailsim::cli
