#pragma once

// Independent reference computations used to cross-check the closed forms.
// Each one solves the underlying problem directly (grid search, enumeration,
// iterative optimisation, quadrature) instead of evaluating a derived formula.

#include <span>
#include <vector>

#include "wpfeel/sysmodel.hpp"

namespace wpfeel::oracles {

/// Largest batch over a log grid of processor speeds (step 1e-3 relative) in
/// [1, 1e18] FLOPs/s; at each speed the batch is limited by both the energy
/// and the time budget.
double max_feasible_batch_grid(double compute_energy_j, const DeviceProfile& dev, const SystemConfig& cfg);

/// E[1/M | M > 0] by summing the binomial pmf.
double reciprocal_by_enumeration(double p_out, int num_devices);

/// Outage probability as the integral over the normalised distance u = r/R of
/// the probability that the fading gain falls below u^alpha xi.
double beacon_outage_by_location_integral(double xi, int num_antennas, double alpha);

struct AllocationResult {
  std::vector<double> powers;
  double objective = 0.0;
  int iterations = 0;
};

/// Minimises the summed local deviation over the sum-power hyperplane by a
/// diagonally scaled projected-gradient method with backtracking, starting from
/// the equal allocation P0 for every device.
AllocationResult projected_gradient_allocation(std::span<const ChannelDraw> draws,
                                               std::span<const DeviceProfile> devices, std::span<const int> active,
                                               double p0_w, const SystemConfig& cfg);

}  // namespace wpfeel::oracles
