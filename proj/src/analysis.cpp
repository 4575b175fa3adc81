#include "wpfeel/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace wpfeel::analysis {

namespace {

constexpr double kOneThird = 1.0 / 3.0;
constexpr double kTwoThirds = 2.0 / 3.0;
// Below this tau the integrand bound 2 K0(2 sqrt(x)) <= -ln(x) holds pointwise.
constexpr double kServerBoundValidTau = 0.5;

void require_bound_preconditions(const SystemConfig& cfg, std::span<const DeviceProfile> devices,
                                 const LossMeta& loss) {
  cfg.validate();
  if (devices.size() != static_cast<std::size_t>(cfg.num_devices)) {
    std::ostringstream os;
    os << "expected " << cfg.num_devices << " device profiles, got " << devices.size();
    throw PreconditionError(os.str());
  }
  if (cfg.num_devices < 2) throw PreconditionError("convergence bounds need K >= 2");
  if (!(cfg.learning_rate > 0.0)) throw PreconditionError("convergence bounds need eta > 0");
  if (cfg.learning_rate * loss.smoothness > 1.0 + 1e-12) {
    std::ostringstream os;
    os << "learning rate " << cfg.learning_rate << " exceeds 1/mu = " << 1.0 / loss.smoothness;
    throw PreconditionError(os.str());
  }
  if (loss.initial_gap < 0.0 || !(loss.grad_norm_bound > 0.0))
    throw PreconditionError("LossMeta needs initial_gap >= 0 and Phi > 0");
}

double descent_term(const SystemConfig& cfg, const LossMeta& loss) {
  return 2.0 * loss.initial_gap / (cfg.learning_rate * cfg.num_rounds);
}

}  // namespace

double xi_parameter(const BeaconSource& src, const SystemConfig& cfg) {
  const double energy = beacon_harvested_energy(src, cfg);
  if (!(energy > 0.0)) throw math::DomainError("xi needs positive harvested energy");
  return std::pow(cfg.cell_radius_m, cfg.uplink_pathloss_exp) * phi(cfg.comm_s, cfg) / energy;
}

double beacon_outage_probability(double xi, int num_antennas, double alpha) {
  if (xi < 0.0 || std::isnan(xi)) throw math::DomainError("xi must be >= 0");
  if (xi == 0.0) return 0.0;
  if (std::isinf(xi)) return 1.0;
  const double L = num_antennas;
  const double shift = 2.0 / alpha;
  if (xi < L + 1.0) {
    // gamma(L, xi) - xi^(-2/alpha) gamma(L + 2/alpha, xi)
    //   = xi^L e^-xi sum_n xi^n [1/(L)_(n+1) - 1/(L + 2/alpha)_(n+1)]
    const double log_prefactor = L * std::log(xi) - xi - math::ln_gamma(L);
    if (log_prefactor < -745.0) return 0.0;
    double a = 1.0 / L;
    double b = 1.0 / (L + shift);
    double sum = a - b;
    for (int n = 1; n < 100000; ++n) {
      a *= xi / (L + n);
      b *= xi / (L + shift + n);
      const double term = a - b;
      sum += term;
      if (term <= sum * 1e-17) break;
    }
    return std::clamp(std::exp(log_prefactor) * sum, 0.0, 1.0);
  }
  // 1 - P_out = Gamma(L, xi)/Gamma(L) + xi^(-2/alpha) gamma(L + 2/alpha, xi)/Gamma(L)
  const double ratio = std::exp(math::ln_gamma(L + shift) - math::ln_gamma(L) - shift * std::log(xi));
  const double active = math::regularized_upper_gamma(L, xi) + ratio * math::regularized_lower_gamma(L + shift, xi);
  return std::clamp(1.0 - active, 0.0, 1.0);
}

double small_xi_constant(int num_antennas, double alpha) {
  const double L = num_antennas;
  return 2.0 / ((alpha * L + 2.0) * math::gamma_fn(L + 1.0));
}

double large_xi_constant(int num_antennas, double alpha) {
  const double L = num_antennas;
  return std::exp(math::ln_gamma(L + 2.0 / alpha) - math::ln_gamma(L));
}

double beacon_outage_asymptote(double xi, int num_antennas, double alpha, XiRegime regime) {
  if (!(xi > 0.0)) throw math::DomainError("asymptote needs xi > 0");
  if (regime == XiRegime::kSmall) return small_xi_constant(num_antennas, alpha) * std::pow(xi, num_antennas);
  return 1.0 - large_xi_constant(num_antennas, alpha) * std::pow(xi, -2.0 / alpha);
}

double expected_reciprocal_active(double p_out, int num_devices) {
  if (num_devices < 1) throw math::DomainError("K must be >= 1");
  if (!(p_out >= 0.0 && p_out < 1.0))
    throw math::DomainError("E[1/M | M > 0] needs 0 <= P_out < 1");
  const int K = num_devices;
  const double pk = std::pow(p_out, K);
  double sum = 0.0;
  double pm = 1.0;  // P^(m-1)
  for (int m = 1; m <= K; ++m) {
    sum += (pm - pk) / static_cast<double>(K - m + 1);
    pm *= p_out;
  }
  return sum / (1.0 - pk);
}

double local_deviation_bound(const DeviceProfile& dev, double harvested_energy, const SystemConfig& cfg) {
  if (!(harvested_energy > 0.0)) throw math::DomainError("local deviation bound needs E-bar > 0");
  const double alpha = cfg.uplink_pathloss_exp;
  return 2.0 * dev.per_sample_flops * dev.grad_variance * std::cbrt(dev.compute_coeff) *
         math::beta(kTwoThirds, 2.0 / alpha) /
         (alpha * std::pow(cfg.compute_s, kTwoThirds) * std::cbrt(harvested_energy));
}

double global_deviation_bound(std::span<const double> per_device_terms, double p_out, int num_devices,
                              double grad_norm_bound) {
  if (per_device_terms.size() != static_cast<std::size_t>(num_devices))
    throw std::invalid_argument("global_deviation_bound: one term per device required");
  const double K = num_devices;
  double sum = 0.0;
  for (double t : per_device_terms) sum += t;
  const double pk = std::pow(p_out, num_devices);
  const double participation =
      p_out < 1.0 ? (1.0 - pk) * (expected_reciprocal_active(p_out, num_devices) - 1.0 / K) : 0.0;
  return 2.0 / (K * K) * sum + 2.0 * (participation + p_out * p_out) * grad_norm_bound;
}

double residue_term(double p_out, int num_devices, double grad_norm_bound) {
  const int K = num_devices;
  const double pk = std::pow(p_out, K);
  double sum = 0.0;
  double pm = p_out;  // P^(m-1) starting at m = 2
  for (int m = 2; m <= K; ++m) {
    sum += (pm - pk) / static_cast<double>(K - m + 1);
    pm *= p_out;
  }
  return 2.0 * (sum + p_out * p_out) * grad_norm_bound;
}

double weighted_compute_variance(std::span<const DeviceProfile> devices) {
  if (devices.empty()) throw std::invalid_argument("no devices");
  double sum = 0.0;
  for (const auto& d : devices) sum += d.per_sample_flops * d.grad_variance * std::cbrt(d.compute_coeff);
  return sum / static_cast<double>(devices.size());
}

double beacon_delta(const SystemConfig& cfg) {
  const double alpha = cfg.uplink_pathloss_exp;
  const double beta = cfg.wpt_pathloss_exp;
  const double geometry = (beta - 2.0) * std::pow(cfg.wpt_min_dist_m, beta - 2.0) / (math::kPi * beta);
  return 4.0 / alpha * math::beta(kTwoThirds, 2.0 / alpha) * std::cbrt(geometry);
}

BoundReport convergence_bound_beacon(const SystemConfig& cfg, std::span<const DeviceProfile> devices,
                                     const BeaconSource& src, const LossMeta& loss) {
  require_bound_preconditions(cfg, devices, loss);
  BoundReport r;
  r.regime = Regime::kBeacon;
  r.energy_knob = spatial_energy_density(src, cfg);
  r.xi_or_tau = xi_parameter(src, cfg);
  r.outage_prob = beacon_outage_probability(r.xi_or_tau, cfg.num_antennas, cfg.uplink_pathloss_exp);
  r.descent_term = descent_term(cfg, loss);
  const double K = cfg.num_devices;
  r.deviation_term = beacon_delta(cfg) * weighted_compute_variance(devices) * (1.0 - r.outage_prob) /
                     (std::cbrt(cfg.conversion_gain) * K * std::pow(cfg.compute_s, kTwoThirds) *
                      std::cbrt(r.energy_knob));
  r.residue = residue_term(r.outage_prob, cfg.num_devices, loss.grad_norm_bound);
  r.total = r.descent_term + r.deviation_term + r.residue;
  return r;
}

namespace {

double fit_slope(std::span<const std::pair<double, double>> points) {
  if (points.size() < 5) throw PreconditionError("scaling fit needs at least 5 points");
  double lo = points.front().first;
  double hi = lo;
  for (const auto& [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0)) throw PreconditionError("scaling fit needs positive values");
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  if (hi / lo < 100.0 * (1.0 - 1e-12)) throw PreconditionError("scaling fit needs a span of >= 2 decades");
  double mx = 0.0;
  double my = 0.0;
  for (const auto& [x, y] : points) {
    mx += std::log(x);
    my += std::log(y);
  }
  const double n = static_cast<double>(points.size());
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (const auto& [x, y] : points) {
    const double dx = std::log(x) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(y) - my);
  }
  return sxy / sxx;
}

}  // namespace

double scaling_exponent(std::span<const BoundReport> sweep) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : sweep) {
    if (!(r.outage_prob < 1e-6))
      throw PreconditionError("scaling fit rejects points with P_out >= 1e-6");
    pts.emplace_back(r.energy_knob, r.deviation_term + r.residue);
  }
  return fit_slope(pts);
}

double scaling_exponent(std::span<const std::pair<double, double>> points) { return fit_slope(points); }

namespace {

double log_bessel_k0(double z) {
  if (z < 500.0) return std::log(math::bessel_k0(z));
  const double w = 1.0 / (8.0 * z);
  return 0.5 * std::log(std::numbers::pi / (2.0 * z)) - z + std::log1p(-w + 4.5 * w * w);
}

}  // namespace

double tau_parameter(const ServerSource& src, const SystemConfig& cfg) {
  return std::pow(cfg.cell_radius_m, 2.0 * cfg.uplink_pathloss_exp) * phi(cfg.comm_s, cfg) /
         (cfg.conversion_gain * src.per_device_power_w * cfg.compute_s);
}

double server_outage_probability(double tau, int num_antennas, double alpha, const math::QuadratureSpec& quad) {
  if (tau < 0.0 || std::isnan(tau)) throw math::DomainError("tau must be >= 0");
  if (tau == 0.0) return 0.0;
  if (std::isinf(tau)) return 1.0;
  const double L = num_antennas;
  const double log_gamma_sq = 2.0 * math::ln_gamma(L);
  const double inv_alpha = 1.0 / alpha;
  if (tau <= 1.0) {
    // x = tau y pulls tau^L out of the integral so the tolerance stays relative.
    auto g = [&](double y) {
      return 2.0 * std::pow(y, L - 1.0) * math::bessel_k0(2.0 * std::sqrt(tau * y)) *
             (1.0 - std::pow(y, inv_alpha));
    };
    const double integral = math::integrate(g, 0.0, 1.0, quad, true);
    return std::clamp(std::exp(L * std::log(tau) - log_gamma_sq) * integral, 0.0, 1.0);
  }
  // Log space keeps x^(L-1) K0(2 sqrt x) finite for large L. Beyond (2L + 60)^2
  // the product-gain density carries less than 1e-20 of its mass.
  auto f = [&](double x) {
    return 2.0 * std::exp((L - 1.0) * std::log(x) - log_gamma_sq + log_bessel_k0(2.0 * std::sqrt(x))) *
           (1.0 - std::pow(x / tau, inv_alpha));
  };
  const double hi = std::min(tau, (2.0 * L + 60.0) * (2.0 * L + 60.0));
  const double mid = std::min(hi, L * L);
  double p = math::integrate(f, 0.0, mid, quad, true);
  if (hi > mid) p += math::integrate(f, mid, hi, quad);
  return std::clamp(p, 0.0, 1.0);
}

double server_outage_upper_bound(double tau, int num_antennas, double alpha) {
  if (!(tau > 0.0 && tau < 1.0)) throw math::DomainError("outage upper bound needs 0 < tau < 1");
  const double L = num_antennas;
  return std::exp(L * std::log(tau) - 2.0 * math::ln_gamma(L)) * std::log(1.0 / tau) / (L * (1.0 + alpha * L));
}

double server_outage_bound_with_remainder(double tau, int num_antennas, double alpha) {
  const double L = num_antennas;
  const double remainder = std::exp(L * std::log(tau) - 2.0 * math::ln_gamma(L)) * (1.0 + 2.0 * alpha * L) /
                           (L * L * (1.0 + alpha * L) * (1.0 + alpha * L));
  return server_outage_upper_bound(tau, num_antennas, alpha) + remainder;
}

double server_delta(const SystemConfig& cfg) {
  const double alpha = cfg.uplink_pathloss_exp;
  const double L = cfg.num_antennas;
  return 2.0 * math::beta(kTwoThirds, 1.0 / 6.0 + 1.0 / alpha) *
         std::exp(math::ln_gamma(L + kOneThird) - math::ln_gamma(L)) *
         std::pow(cfg.cell_radius_m, alpha / 3.0) / alpha;
}

BoundReport convergence_bound_server(const SystemConfig& cfg, std::span<const DeviceProfile> devices,
                                     const ServerSource& src, const LossMeta& loss,
                                     const math::QuadratureSpec& quad) {
  require_bound_preconditions(cfg, devices, loss);
  BoundReport r;
  r.regime = Regime::kServer;
  r.energy_knob = src.per_device_power_w;
  r.xi_or_tau = tau_parameter(src, cfg);
  const int L = cfg.num_antennas;
  const double alpha = cfg.uplink_pathloss_exp;
  r.outage_quadrature = server_outage_probability(r.xi_or_tau, L, alpha, quad);
  // Outside the small-tau regime the bound is frozen at its last valid value
  // and topped up by the exact probability, which keeps it monotone in P0.
  if (r.xi_or_tau < kServerBoundValidTau) {
    r.outage_upper_bound = server_outage_bound_with_remainder(r.xi_or_tau, L, alpha);
  } else {
    r.outage_upper_bound = std::max(*r.outage_quadrature,
                                    server_outage_bound_with_remainder(kServerBoundValidTau, L, alpha));
  }
  r.outage_prob = std::min(1.0, *r.outage_upper_bound);
  r.descent_term = descent_term(cfg, loss);
  r.deviation_term = server_delta(cfg) * weighted_compute_variance(devices) /
                     (std::cbrt(cfg.conversion_gain) * cfg.num_devices * cfg.compute_s *
                      std::cbrt(src.per_device_power_w));
  r.residue = residue_term(r.outage_prob, cfg.num_devices, loss.grad_norm_bound);
  r.total = r.descent_term + r.deviation_term + r.residue;
  return r;
}

}  // namespace wpfeel::analysis
