#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "wpfeel/rng.hpp"

namespace wpfeel {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Physical and protocol constants of one cell. SI units throughout.
struct SystemConfig {
  double cell_radius_m = 100.0;
  int num_devices = 30;
  int num_antennas = 64;
  double bandwidth_hz = 1e6;            // per-device sub-band
  double noise_psd_w_per_hz = 1e-11;    // -80 dBm/Hz
  double uplink_pathloss_exp = 3.8;     // alpha
  double wpt_pathloss_exp = 4.0;        // beta
  double wpt_min_dist_m = 1.0;          // nu
  double conversion_gain = 0.5;         // rho
  double round_s = 1.0;                 // T
  double compute_s = 0.5;               // T^cmp
  double comm_s = 0.5;                  // T^cmm
  long model_dim = 21840;               // q, drives the upload payload
  int quant_bits = 16;                  // Q
  int num_rounds = 500;                 // N
  double learning_rate = 0.1;           // eta
  double grad_norm_bound = 1.0;         // Phi
  double smoothness = 1.0;              // mu

  double payload_bits() const { return static_cast<double>(model_dim) * quant_bits; }
  /// Throws ConfigError naming the first violated invariant.
  void validate() const;
};

double dbm_per_hz_to_w_per_hz(double dbm_per_hz);
double w_per_hz_to_dbm_per_hz(double w_per_hz);

/// Conversion between the customary W*(MFLOPs/s)^-3 unit and SI W*(FLOPs/s)^-3.
inline constexpr double kPerMflopsCubed = 1e-18;

struct DeviceProfile {
  double compute_coeff = 1e-20;       // C_k, W*(FLOPs/s)^-3
  double grad_variance = 1.0;         // sigma_k^2
  double per_sample_flops = 1.09e6;   // W
  int local_dataset_size = 100;       // D
  std::optional<double> chip_psi;     // W*(cycle/s)^-3
  std::optional<int> flops_per_cycle;

  /// C = Psi / N_FLOP^3 when the chip description is given.
  static DeviceProfile from_chip(double chip_psi, int flops_per_cycle, double grad_variance,
                                 double per_sample_flops, int local_dataset_size);
  void validate() const;
};

struct BeaconSource {
  double beacon_power_w = 1.0;          // P-bar
  double beacon_density_per_m2 = 1.0;   // lambda_pb
};

enum class PowerControl { kEqual, kOptimized };

struct ServerSource {
  double per_device_power_w = 1.0;      // P0
  PowerControl control = PowerControl::kEqual;
};

using WptSource = std::variant<BeaconSource, ServerSource>;

void validate(const WptSource& src);

/// One device-round realisation of geometry and fading.
struct ChannelDraw {
  double distance_m = 0.0;
  double uplink_gain = 0.0;             // ||h||^2
  std::optional<double> wpt_gain;       // ||h~||^2, server WPT only
};

/// Transmission energy for the payload in t seconds,
/// phi(t) = B N0 t (2^(qQ/(Bt)) - 1). Returns +infinity (infinite cost) when the
/// exponent qQ/(Bt) exceeds 1000.
double phi(double t, const SystemConfig& cfg);

bool is_infinite_cost(double joules);

/// P-bar * lambda_pb * T.
double spatial_energy_density(const BeaconSource& src, const SystemConfig& cfg);
/// Deterministic per-round energy harvested from a dense beacon field.
double beacon_harvested_energy(const BeaconSource& src, const SystemConfig& cfg);
/// rho pi beta / ((beta - 2) nu^(beta-2)): harvested energy per unit spatial energy density.
double beacon_harvest_factor(const SystemConfig& cfg);
/// Per-round energy harvested from a server beam of the given power.
double server_harvested_energy(const ServerSource& src, const ChannelDraw& draw,
                               double allocated_power_w, const SystemConfig& cfg);
/// r^alpha / ||h||^2 * phi(T^cmm); +infinity for a zero uplink gain.
double required_comm_energy(const ChannelDraw& draw, const SystemConfig& cfg);

/// Uniform location in the disc and Gamma(L, 1) gains.
ChannelDraw sample_channel(RandomStream& rng, const SystemConfig& cfg, bool needs_wpt_gain);

}  // namespace wpfeel
