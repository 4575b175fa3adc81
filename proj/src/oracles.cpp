#include "wpfeel/oracles.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "wpfeel/mathkit.hpp"

namespace wpfeel::oracles {

double max_feasible_batch_grid(double compute_energy_j, const DeviceProfile& dev, const SystemConfig& cfg) {
  const double c = dev.compute_coeff;
  const double w = dev.per_sample_flops;
  double best = 0.0;
  for (double f = 1.0; f <= 1e18; f *= 1.001) {
    const double energy_limited = compute_energy_j / (c * w * f * f);
    const double time_limited = cfg.compute_s * f / w;
    best = std::max(best, std::min(energy_limited, time_limited));
  }
  return best;
}

double reciprocal_by_enumeration(double p_out, int num_devices) {
  const int K = num_devices;
  double num = 0.0;
  double mass = 0.0;
  for (int m = 1; m <= K; ++m) {
    const double log_choose = std::lgamma(K + 1.0) - std::lgamma(m + 1.0) - std::lgamma(K - m + 1.0);
    const double pmf = std::exp(log_choose) * std::pow(1.0 - p_out, m) * std::pow(p_out, K - m);
    num += pmf / m;
    mass += pmf;
  }
  return num / mass;
}

double beacon_outage_by_location_integral(double xi, int num_antennas, double alpha) {
  math::QuadratureSpec spec;
  spec.abs_tol = 1e-300;
  spec.rel_tol = 1e-11;
  spec.max_subdivisions = 20000;
  const double L = num_antennas;
  return math::integrate(
      [&](double u) { return 2.0 * u * math::regularized_lower_gamma(L, std::pow(u, alpha) * xi); }, 0.0, 1.0,
      spec);
}

AllocationResult projected_gradient_allocation(std::span<const ChannelDraw> draws,
                                               std::span<const DeviceProfile> devices, std::span<const int> active,
                                               double p0_w, const SystemConfig& cfg) {
  const std::size_t m = active.size();
  if (m == 0) throw std::invalid_argument("empty active set");
  std::vector<double> a(m), slope(m), comm(m);
  const ServerSource unused{};
  for (std::size_t i = 0; i < m; ++i) {
    const auto k = static_cast<std::size_t>(active[i]);
    const auto& d = devices[k];
    a[i] = d.per_sample_flops * d.grad_variance * std::cbrt(d.compute_coeff) / std::pow(cfg.compute_s, 2.0 / 3.0);
    slope[i] = server_harvested_energy(unused, draws[k], 1.0, cfg);
    comm[i] = required_comm_energy(draws[k], cfg);
  }
  auto objective = [&](const std::vector<double>& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double e = slope[i] * p[i] - comm[i];
      if (!(e > 0.0)) return std::numeric_limits<double>::infinity();
      s += a[i] / std::cbrt(e);
    }
    return s;
  };

  AllocationResult res;
  res.powers.assign(m, p0_w);
  res.objective = objective(res.powers);
  if (!std::isfinite(res.objective)) throw std::invalid_argument("equal allocation is infeasible");
  std::vector<double> grad(m), hess(m), dir(m), trial(m);
  for (res.iterations = 0; res.iterations < 100000; ++res.iterations) {
    double wsum = 0.0;
    double gsum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double e = slope[i] * res.powers[i] - comm[i];
      grad[i] = -a[i] * slope[i] / (3.0 * std::pow(e, 4.0 / 3.0));
      hess[i] = 4.0 * a[i] * slope[i] * slope[i] / (9.0 * std::pow(e, 7.0 / 3.0));
      wsum += 1.0 / hess[i];
      gsum += grad[i] / hess[i];
    }
    // Scaled gradient projected onto sum(dir) = 0.
    const double nu = gsum / wsum;
    double decrease = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      dir[i] = -(grad[i] - nu) / hess[i];
      decrease += grad[i] * dir[i];
    }
    if (-decrease <= 1e-15 * res.objective) break;
    double step = 1.0;
    double value = std::numeric_limits<double>::infinity();
    for (int bt = 0; bt < 60; ++bt, step *= 0.5) {
      for (std::size_t i = 0; i < m; ++i) trial[i] = res.powers[i] + step * dir[i];
      value = objective(trial);
      if (value <= res.objective + 1e-4 * step * decrease) break;
    }
    if (!(value < res.objective)) break;
    res.powers = trial;
    res.objective = value;
  }
  return res;
}

}  // namespace wpfeel::oracles
