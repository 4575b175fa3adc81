#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wpfeel/sysmodel.hpp"

namespace wpfeel {

/// How per-device profiles are drawn.
struct DeviceSpec {
  /// Candidate C_k values in SI units; each device draws one uniformly.
  std::vector<double> compute_coeff_choices = {1e-20};
  double grad_variance = 1.0;
  double per_sample_flops = 1.09e6;
  int samples_per_device = 100;
  std::uint64_t seed = 1;
};

/// Synthetic learning task used by the simulator.
struct TaskSpec {
  int feature_dim = 20;
  int num_classes = 10;
  double noise_scale = 1.0;
  double class_separation = 1.0;
  int test_size = 1000;
  std::uint64_t seed = 7;
};

/// Everything a config file describes.
struct Scenario {
  SystemConfig system;
  DeviceSpec devices;
  WptSource source = BeaconSource{};
  TaskSpec task;
  double initial_gap = 1.0;        // F(w0) - F*, used by closed-form bounds
  bool learning_rate_auto = false; // eta = 1 / (smoothness upper bound of the task)

  void validate() const;
};

/// Draws K device profiles from the spec. Deterministic in spec.seed.
std::vector<DeviceProfile> make_devices(const DeviceSpec& spec, int num_devices);

/// Parses the `key = value` config grammar. Unknown or repeated keys, missing
/// required keys and malformed values raise ConfigError with the line number.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::filesystem::path& path);
/// Writes a config that parses back to the same scenario.
std::string to_config_text(const Scenario& scenario);

}  // namespace wpfeel
