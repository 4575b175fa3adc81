#include "wpfeel/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "wpfeel/mathkit.hpp"

namespace wpfeel::policy {

ComputePlan optimal_local_computation(double compute_energy_j, const DeviceProfile& dev,
                                      const SystemConfig& cfg) {
  if (compute_energy_j < 0.0) throw math::DomainError("compute energy must be >= 0");
  if (compute_energy_j == 0.0) return {};
  const double t = cfg.compute_s;
  ComputePlan p;
  p.batch_size = std::cbrt(compute_energy_j * t * t / dev.compute_coeff) / dev.per_sample_flops;
  p.speed_flops = std::cbrt(compute_energy_j / (dev.compute_coeff * t));
  p.energy_j = p.batch_size * dev.compute_coeff * dev.per_sample_flops * p.speed_flops * p.speed_flops;
  p.time_s = p.batch_size * dev.per_sample_flops / p.speed_flops;
  return p;
}

EnergySplit compute_energy_split(double harvested_j, const ChannelDraw& draw, const SystemConfig& cfg) {
  if (harvested_j < 0.0) throw math::DomainError("harvested energy must be >= 0");
  EnergySplit s;
  s.comm_energy_j = required_comm_energy(draw, cfg);
  if (harvested_j > s.comm_energy_j) {
    s.compute_energy_j = harvested_j - s.comm_energy_j;
    s.active = s.compute_energy_j > 0.0;
  }
  return s;
}

double communication_floor(const ChannelDraw& draw, const SystemConfig& cfg) {
  if (!draw.wpt_gain) throw std::invalid_argument("server WPT needs a channel draw with a WPT gain");
  const double cascade = *draw.wpt_gain * draw.uplink_gain;
  if (cascade <= 0.0) return std::numeric_limits<double>::infinity();
  return std::pow(draw.distance_m, 2.0 * cfg.uplink_pathloss_exp) * phi(cfg.comm_s, cfg) /
         (cfg.conversion_gain * cascade * cfg.compute_s);
}

std::vector<int> schedule_server_wpt(std::span<const ChannelDraw> draws, const ServerSource& src,
                                     const SystemConfig& cfg) {
  std::vector<int> active;
  for (std::size_t k = 0; k < draws.size(); ++k) {
    // Outage iff ||h~||^2 ||h||^2 / r^(2a) <= phi / (rho P0 T^cmp), i.e. floor >= P0.
    if (communication_floor(draws[k], cfg) < src.per_device_power_w) active.push_back(static_cast<int>(k));
  }
  return active;
}

namespace {

// Stationarity weight r^(a/4) sigma^(3/2) C^(1/4) / ||h~||^(1/2). A common
// per-sample workload W is assumed; it cancels from the allocation.
double compute_weight(const ChannelDraw& draw, const DeviceProfile& dev, const SystemConfig& cfg) {
  return std::pow(draw.distance_m, cfg.uplink_pathloss_exp / 4.0) * std::pow(dev.grad_variance, 0.75) *
         std::pow(dev.compute_coeff, 0.25) / std::pow(*draw.wpt_gain, 0.25);
}

}  // namespace

AllocationPlan allocate_server_power(std::span<const ChannelDraw> draws, std::span<const DeviceProfile> devices,
                                     std::span<const int> active, double p0_w, const SystemConfig& cfg) {
  if (active.empty()) throw std::invalid_argument("allocation needs a nonempty active set");
  if (draws.size() != devices.size()) throw std::invalid_argument("one draw per device profile required");
  AllocationPlan plan;
  plan.active_set.assign(active.begin(), active.end());
  const std::size_t m = active.size();
  if (m == 1) {
    plan.powers = {p0_w};
    plan.varsigma = communication_floor(draws[active[0]], cfg);
    plan.theta = compute_weight(draws[active[0]], devices[active[0]], cfg);
    if (!(p0_w > plan.varsigma)) throw InfeasibleBudget("average power does not cover the uplink floor");
    return plan;
  }
  std::vector<double> floors(m);
  std::vector<double> weights(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto k = static_cast<std::size_t>(active[i]);
    floors[i] = communication_floor(draws[k], cfg);
    weights[i] = compute_weight(draws[k], devices[k], cfg);
  }
  const double md = static_cast<double>(m);
  plan.varsigma = std::accumulate(floors.begin(), floors.end(), 0.0) / md;
  plan.theta = std::accumulate(weights.begin(), weights.end(), 0.0) / md;
  if (!(p0_w > plan.varsigma)) throw InfeasibleBudget("average power does not cover the uplink floors");
  const double surplus = p0_w - plan.varsigma;
  plan.powers.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double share = plan.theta > 0.0 ? weights[i] / plan.theta : 1.0;
    plan.powers[i] = floors[i] + share * surplus;
  }
  return plan;
}

AllocationPlan allocate_server_power_with_fallback(std::span<const ChannelDraw> draws,
                                                   std::span<const DeviceProfile> devices,
                                                   std::span<const int> active, double p0_w,
                                                   const SystemConfig& cfg) {
  std::vector<int> remaining(active.begin(), active.end());
  std::vector<int> dropped;
  while (!remaining.empty()) {
    try {
      AllocationPlan plan = allocate_server_power(draws, devices, remaining, p0_w, cfg);
      plan.dropped = dropped;
      return plan;
    } catch (const InfeasibleBudget&) {
      auto worst = std::max_element(remaining.begin(), remaining.end(), [&](int a, int b) {
        return communication_floor(draws[a], cfg) < communication_floor(draws[b], cfg);
      });
      dropped.push_back(*worst);
      remaining.erase(worst);
    }
  }
  AllocationPlan empty;
  empty.dropped = dropped;
  return empty;
}

double allocation_objective(std::span<const ChannelDraw> draws, std::span<const DeviceProfile> devices,
                            std::span<const int> active, std::span<const double> powers,
                            const SystemConfig& cfg) {
  if (active.size() != powers.size()) throw std::invalid_argument("one power per active device required");
  double sum = 0.0;
  const ServerSource unused{};
  for (std::size_t i = 0; i < active.size(); ++i) {
    const auto k = static_cast<std::size_t>(active[i]);
    const double harvested = server_harvested_energy(unused, draws[k], powers[i], cfg);
    const double compute = harvested - required_comm_energy(draws[k], cfg);
    if (!(compute > 0.0)) return std::numeric_limits<double>::infinity();
    sum += devices[k].per_sample_flops * devices[k].grad_variance * std::cbrt(devices[k].compute_coeff) /
           std::cbrt(compute);
  }
  return sum / std::pow(cfg.compute_s, 2.0 / 3.0);
}

}  // namespace wpfeel::policy
