#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "wpfeel/sysmodel.hpp"

namespace wpfeel::policy {

/// Mini-batch size and processor speed for one device-round.
struct ComputePlan {
  double batch_size = 0.0;      // relaxed to a real number
  double speed_flops = 0.0;     // f, FLOPs/s
  double energy_j = 0.0;        // b C W f^2
  double time_s = 0.0;          // b W / f

  bool empty() const { return batch_size == 0.0; }
};

/// Largest batch that fits both the energy and the time budget of the
/// computation phase. Both constraints bind at the returned plan; zero energy
/// gives the empty plan.
ComputePlan optimal_local_computation(double compute_energy_j, const DeviceProfile& dev,
                                      const SystemConfig& cfg);

struct EnergySplit {
  double comm_energy_j = 0.0;
  double compute_energy_j = 0.0;
  bool active = false;
};

/// Reserves the uplink energy first; a device whose harvest does not strictly
/// exceed it is in computation outage and gets nothing for computing.
EnergySplit compute_energy_split(double harvested_j, const ChannelDraw& draw, const SystemConfig& cfg);

/// Devices whose cascaded gain clears the outage threshold under equal power P0.
/// Ties at the threshold count as outage.
std::vector<int> schedule_server_wpt(std::span<const ChannelDraw> draws, const ServerSource& src,
                                     const SystemConfig& cfg);

class InfeasibleBudget : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AllocationPlan {
  std::vector<int> active_set;   // device ids
  std::vector<double> powers;    // aligned with active_set
  double theta = 0.0;
  double varsigma = 0.0;
  std::vector<int> dropped;      // devices removed by the infeasibility fallback
};

/// Power floor needed just to cover the uplink: r^(2a) phi(T^cmm) / (rho ||h~||^2 ||h||^2 T^cmp).
double communication_floor(const ChannelDraw& draw, const SystemConfig& cfg);

/// Closed-form minimiser of the sum local-gradient deviation over the active
/// set under sum power |active| * P0. Throws InfeasibleBudget when P0 <= varsigma.
AllocationPlan allocate_server_power(std::span<const ChannelDraw> draws, std::span<const DeviceProfile> devices,
                                     std::span<const int> active, double p0_w, const SystemConfig& cfg);

/// As above, but on an infeasible budget the device with the largest floor is
/// dropped and the problem re-solved until feasible (or empty).
AllocationPlan allocate_server_power_with_fallback(std::span<const ChannelDraw> draws,
                                                   std::span<const DeviceProfile> devices,
                                                   std::span<const int> active, double p0_w,
                                                   const SystemConfig& cfg);

/// Sum local-gradient deviation (W / T^cmp^(2/3)) sum sigma^2 C^(1/3) / E_cmp^(1/3)
/// for a given power vector; +infinity if any device is left without compute energy.
double allocation_objective(std::span<const ChannelDraw> draws, std::span<const DeviceProfile> devices,
                            std::span<const int> active, std::span<const double> powers,
                            const SystemConfig& cfg);

}  // namespace wpfeel::policy
