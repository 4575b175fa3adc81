#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wpfeel/config.hpp"

namespace wpfeel::experiment {

enum class Mode { kAnalyze, kSimulate, kValidate };

Mode parse_mode(std::string_view text);

struct Sweep {
  std::string variable;  // lambda_energy, P0, compute_energy_rate or N0
  double lo = 0.0;
  double hi = 0.0;
  int count = 2;
  bool log_spaced = true;

  std::vector<double> points() const;
};

/// Parses `var:lo:hi:n:log|lin`.
Sweep parse_sweep(std::string_view text);
/// Parses `1,2,5` or ranges such as `1-5` (mixable: `1-3,9`).
std::vector<std::uint64_t> parse_seeds(std::string_view text);

struct ExperimentSpec {
  Mode mode = Mode::kAnalyze;
  std::filesystem::path config;  // required for analyze and simulate
  std::optional<Sweep> sweep;
  std::vector<std::uint64_t> seeds = {1};
  std::filesystem::path out_dir = "out";
  int workers = 0;               // 0: OpenMP default

  /// Throws ConfigError naming the first violated invariant.
  void validate() const;
};

/// Applies one sweep value to a scenario. lambda_energy rescales the beacon
/// density (P-bar T fixed); P0 sets the server power; compute_energy_rate is
/// the per-sample computation energy C W^3 / T^cmp^2 in J and fixes C for every
/// device; N0 is in dBm/Hz.
Scenario apply_sweep_value(Scenario scenario, std::string_view variable, double value);

struct RunResult {
  int exit_code = 0;
  std::vector<std::string> artifacts;  // file names inside out_dir
  std::string message;                 // first failure, empty on success
};

/// Runs the experiment and writes its artifacts plus index.json into out_dir.
RunResult run(const ExperimentSpec& spec);

}  // namespace wpfeel::experiment
