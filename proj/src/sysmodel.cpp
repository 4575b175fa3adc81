#include "wpfeel/sysmodel.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "wpfeel/mathkit.hpp"

namespace wpfeel {

namespace {

constexpr double kInfiniteCost = std::numeric_limits<double>::infinity();
constexpr double kMaxExponent = 1000.0;

[[noreturn]] void fail(const std::string& what) { throw ConfigError(what); }

void require(bool ok, const char* invariant) {
  if (!ok) fail(std::string("invariant violated: ") + invariant);
}

}  // namespace

void SystemConfig::validate() const {
  require(cell_radius_m > 0.0, "cell_radius_m > 0");
  require(num_devices >= 1, "num_devices >= 1");
  require(num_antennas >= 1, "num_antennas >= 1");
  require(bandwidth_hz > 0.0, "bandwidth_hz > 0");
  require(noise_psd_w_per_hz > 0.0, "noise_psd > 0");
  require(uplink_pathloss_exp > 2.0, "uplink_pathloss_exp (alpha) > 2");
  require(wpt_pathloss_exp > 2.0, "wpt_pathloss_exp (beta) > 2");
  require(wpt_min_dist_m >= 1.0, "wpt_min_dist_m (nu) >= 1");
  require(conversion_gain > 0.0 && conversion_gain <= 1.0, "conversion_gain (rho) in (0, 1]");
  require(round_s > 0.0 && compute_s > 0.0 && comm_s > 0.0, "round, compute and comm durations > 0");
  require(compute_s + comm_s <= round_s * (1.0 + 1e-12), "compute_s + comm_s <= round_s");
  require(model_dim >= 1, "model_dim >= 1");
  require(quant_bits >= 1, "quant_bits >= 1");
  require(num_rounds >= 1, "num_rounds >= 1");
  require(learning_rate >= 0.0, "learning_rate >= 0");
  require(grad_norm_bound > 0.0, "grad_norm_bound (Phi) > 0");
  require(smoothness > 0.0, "smoothness (mu) > 0");
}

double dbm_per_hz_to_w_per_hz(double dbm_per_hz) { return std::pow(10.0, (dbm_per_hz - 30.0) / 10.0); }

double w_per_hz_to_dbm_per_hz(double w_per_hz) { return 10.0 * std::log10(w_per_hz) + 30.0; }

DeviceProfile DeviceProfile::from_chip(double chip_psi, int flops_per_cycle, double grad_variance,
                                       double per_sample_flops, int local_dataset_size) {
  DeviceProfile p;
  const double n = static_cast<double>(flops_per_cycle);
  p.compute_coeff = chip_psi / (n * n * n);
  p.grad_variance = grad_variance;
  p.per_sample_flops = per_sample_flops;
  p.local_dataset_size = local_dataset_size;
  p.chip_psi = chip_psi;
  p.flops_per_cycle = flops_per_cycle;
  p.validate();
  return p;
}

void DeviceProfile::validate() const {
  require(compute_coeff > 0.0, "compute_coeff (C) > 0");
  require(grad_variance >= 0.0, "grad_variance (sigma^2) >= 0");
  require(per_sample_flops > 0.0, "per_sample_flops (W) > 0");
  require(local_dataset_size >= 1, "local_dataset_size (D) >= 1");
  require(chip_psi.has_value() == flops_per_cycle.has_value(),
          "chip_psi and flops_per_cycle are given together");
  if (chip_psi) {
    require(*chip_psi > 0.0 && *flops_per_cycle >= 1, "chip_psi > 0 and flops_per_cycle >= 1");
    const double n = static_cast<double>(*flops_per_cycle);
    const double implied = *chip_psi / (n * n * n);
    require(std::fabs(implied - compute_coeff) <= 1e-12 * implied, "C = Psi / N_FLOP^3");
  }
}

void validate(const WptSource& src) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, BeaconSource>) {
          require(s.beacon_power_w > 0.0, "beacon_power_w > 0");
          require(s.beacon_density_per_m2 > 0.0, "beacon_density_per_m2 > 0");
        } else {
          require(s.per_device_power_w > 0.0, "server_power_w > 0");
        }
      },
      src);
}

double phi(double t, const SystemConfig& cfg) {
  if (!(t > 0.0)) throw math::DomainError("phi requires t > 0");
  const double payload = cfg.payload_bits();
  if (payload == 0.0) return 0.0;
  const double exponent = payload / (cfg.bandwidth_hz * t);
  if (exponent > kMaxExponent) return kInfiniteCost;
  return cfg.bandwidth_hz * cfg.noise_psd_w_per_hz * t * std::expm1(exponent * std::log(2.0));
}

bool is_infinite_cost(double joules) { return std::isinf(joules) && joules > 0.0; }

double spatial_energy_density(const BeaconSource& src, const SystemConfig& cfg) {
  return src.beacon_power_w * src.beacon_density_per_m2 * cfg.round_s;
}

double beacon_harvest_factor(const SystemConfig& cfg) {
  const double beta = cfg.wpt_pathloss_exp;
  if (!(beta > 2.0)) throw math::DomainError("beacon harvesting needs beta > 2 (integral diverges)");
  return cfg.conversion_gain * math::kPi * beta /
         ((beta - 2.0) * std::pow(cfg.wpt_min_dist_m, beta - 2.0));
}

double beacon_harvested_energy(const BeaconSource& src, const SystemConfig& cfg) {
  return beacon_harvest_factor(cfg) * spatial_energy_density(src, cfg);
}

double server_harvested_energy(const ServerSource&, const ChannelDraw& draw, double allocated_power_w,
                               const SystemConfig& cfg) {
  if (!draw.wpt_gain) throw std::invalid_argument("server WPT needs a channel draw with a WPT gain");
  if (allocated_power_w < 0.0) throw math::DomainError("allocated power must be >= 0");
  if (*draw.wpt_gain == 0.0 || allocated_power_w == 0.0) return 0.0;
  return cfg.conversion_gain * std::pow(draw.distance_m, -cfg.uplink_pathloss_exp) * *draw.wpt_gain *
         allocated_power_w * cfg.compute_s;
}

double required_comm_energy(const ChannelDraw& draw, const SystemConfig& cfg) {
  if (draw.uplink_gain <= 0.0) return kInfiniteCost;
  if (draw.distance_m == 0.0) return 0.0;
  return std::pow(draw.distance_m, cfg.uplink_pathloss_exp) / draw.uplink_gain * phi(cfg.comm_s, cfg);
}

ChannelDraw sample_channel(RandomStream& rng, const SystemConfig& cfg, bool needs_wpt_gain) {
  ChannelDraw d;
  d.distance_m = cfg.cell_radius_m * std::sqrt(rng.uniform());
  const double shape = static_cast<double>(cfg.num_antennas);
  d.uplink_gain = rng.gamma(shape);
  if (needs_wpt_gain) d.wpt_gain = rng.gamma(shape);
  return d;
}

}  // namespace wpfeel
