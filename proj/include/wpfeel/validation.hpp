#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "wpfeel/config.hpp"
#include "wpfeel/csv.hpp"
#include "wpfeel/kernels.hpp"

namespace wpfeel::validation {

using csv::CheckRow;

struct Options {
  kernels::Execution exec;
  std::uint64_t seed = 20210301;
  /// Scratch space for checks that write artifacts (determinism).
  std::filesystem::path scratch_dir = std::filesystem::temp_directory_path() / "wpfeel_validation";
};

struct Check {
  std::string name;
  std::function<CheckRow(const Options&)> run;
};

/// The acceptance suite, in order.
std::vector<Check> acceptance_checks();
/// Further cross-checks of closed forms against oracles.
std::vector<Check> oracle_checks();

/// Runs one check; an exception becomes a failing row carrying its message.
CheckRow run_check(const Check& check, const Options& opts);

// Scenarios shared by the training checks, the CLI and the benchmark ---------

/// Beacon field giving the requested spatial-energy density with P-bar = 1 W.
BeaconSource beacon_for_density(double lambda_energy, const SystemConfig& cfg);
/// Beacon field giving the requested xi.
BeaconSource beacon_for_xi(double xi, const SystemConfig& cfg);
/// Server power giving the requested tau.
ServerSource server_for_tau(double tau, const SystemConfig& cfg);

/// K = 30 devices, D = 100 samples each, N = 500 rounds, step size
/// 1 / (smoothness bound of the task), beacon WPT at the given density.
Scenario desk_scenario(double lambda_energy);

/// Spatial-energy density at which every device's optimal batch covers its
/// whole shard in essentially every round.
double saturation_density(const Scenario& scenario);

/// Smallest density used by the learning-trend check.
inline constexpr double kTrendBaseDensity = 0.1;

}  // namespace wpfeel::validation
