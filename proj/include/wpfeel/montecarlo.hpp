#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "wpfeel/kernels.hpp"
#include "wpfeel/policy.hpp"
#include "wpfeel/sysmodel.hpp"
#include "wpfeel/task.hpp"

namespace wpfeel::mc {

struct DeviceRound {
  ChannelDraw draw;
  double allocated_power_w = 0.0;  // server WPT only
  double harvested_j = 0.0;
  policy::EnergySplit split;
  policy::ComputePlan plan;        // continuous optimum
  int batch_used = 0;              // floor(b*) capped at D
  bool active = false;             // contributed a gradient this round
};

struct RoundRecord {
  int round_index = 0;
  std::vector<DeviceRound> devices;
  int active_count = 0;            // M
  double loss = 0.0;               // F(w) before the update
  double grad_norm_sq = 0.0;       // ||grad F(w)||^2 before the update
  double aggregate_norm_sq = 0.0;  // ||g||^2
  double deviation_sample = 0.0;   // ||g - grad F(w)||^2
  bool update_applied = false;
  int dropped_by_fallback = 0;     // server allocation infeasibility events
};

struct TrainingState {
  Vector model;
};

/// One FEEL round: channels, harvested energy, energy split, local computation,
/// aggregation and the SGD step (skipped when no device is active).
RoundRecord simulate_round(TrainingState& state, const SystemConfig& cfg, std::span<const DeviceProfile> devices,
                           const WptSource& src, const SyntheticTask& task, std::uint64_t seed, int round,
                           kernels::Execution exec = {});

/// Uniform sample of `count` distinct positions in [0, size), sorted ascending.
std::vector<int> sample_batch(RandomStream& rng, int size, int count);

struct EstimatedConstants {
  double mu_hat = 0.0;
  double phi_hat = 0.0;
  std::vector<double> sigma2_hat;  // per device
};

inline constexpr double kPhiSafetyFactor = 1.5;

/// Largest observed gradient-difference ratio over all probe pairs.
double estimate_smoothness(std::span<const Vector> probes, const std::function<Vector(const Vector&)>& gradient);

/// Needs at least 10 probe points.
EstimatedConstants estimate_constants(const SyntheticTask& task, std::span<const Vector> probes,
                                      kernels::Execution exec = {});

struct RunOptions {
  kernels::Execution exec;
  bool keep_rounds = false;
  bool estimate_constants = true;
};

struct TrainingReport {
  double avg_grad_norm = 0.0;      // mean over rounds of ||grad F(w)||^2, training set
  double test_accuracy = 0.0;
  double initial_loss = 0.0;       // F(w0)
  double final_loss = 0.0;
  double learning_rate = 0.0;
  double mean_deviation = 0.0;     // mean over rounds of ||g - grad F(w)||^2
  int idle_rounds = 0;
  std::vector<double> loss;
  std::vector<double> grad_norm_sq;
  std::vector<int> active_count;
  std::vector<double> deviation;
  std::vector<double> mean_batch;  // over active devices, 0 when idle
  EstimatedConstants constants;
  std::vector<RoundRecord> rounds; // filled when RunOptions::keep_rounds
  Vector final_model;
};

/// N rounds of FEEL from the zero model. Deterministic in `seed` whatever the
/// execution settings.
TrainingReport run_training(const SystemConfig& cfg, std::span<const DeviceProfile> devices, const WptSource& src,
                            const SyntheticTask& task, std::uint64_t seed, const RunOptions& options = {});

/// Plain full-batch gradient descent from the zero model, for N rounds.
std::vector<Vector> gradient_descent_trajectory(const SyntheticTask& task, double learning_rate, int rounds);

struct OutageEstimate {
  double estimate = 0.0;
  double standard_error = 0.0;
};

/// Binomial Monte Carlo estimate of the per-device outage probability; n >= 1e4.
OutageEstimate mc_outage(const WptSource& src, const SystemConfig& cfg, std::uint64_t n, std::uint64_t seed,
                         kernels::Execution exec = {});

}  // namespace wpfeel::mc
