#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "wpfeel/mathkit.hpp"
#include "wpfeel/sysmodel.hpp"

namespace wpfeel::analysis {

/// A bound was requested outside the regime it is proven for (eta > 1/mu, K < 2, ...).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Regime { kBeacon, kServer };

/// Where the E[sum sigma^2 / b] piece of the deviation term came from.
enum class DeviationSource { kClosedForm, kEmpirical };

struct LossMeta {
  double initial_gap = 1.0;      // F(w0) - F*
  double smoothness = 1.0;       // mu
  double grad_norm_bound = 1.0;  // Phi
};

/// Additive decomposition of a convergence bound on the average squared gradient norm.
struct BoundReport {
  double energy_knob = 0.0;      // lambda_energy (beacon) or P0 (server)
  double xi_or_tau = 0.0;
  double outage_prob = 0.0;      // value fed into the residue
  double descent_term = 0.0;
  double deviation_term = 0.0;
  double residue = 0.0;
  double total = 0.0;
  Regime regime = Regime::kBeacon;
  DeviationSource source = DeviationSource::kClosedForm;
  // Server only: exact outage by quadrature and its closed-form upper bound.
  std::optional<double> outage_quadrature;
  std::optional<double> outage_upper_bound;
};

// Beacon-WPT outage ----------------------------------------------------------

/// xi = R^alpha phi(T^cmm) / E-bar.
double xi_parameter(const BeaconSource& src, const SystemConfig& cfg);

/// Probability that the required uplink energy exhausts the harvested energy:
/// [gamma(L, xi) - xi^(-2/alpha) gamma(L + 2/alpha, xi)] / Gamma(L).
/// Evaluated term by term below xi = L + 1 so tiny probabilities keep full
/// relative precision.
double beacon_outage_probability(double xi, int num_antennas, double alpha);

enum class XiRegime { kSmall, kLarge };

/// lim P_out / xi^L as xi -> 0.
double small_xi_constant(int num_antennas, double alpha);
/// lim (1 - P_out) / xi^(-2/alpha) as xi -> infinity.
double large_xi_constant(int num_antennas, double alpha);
/// Asymptotic approximation of P_out at xi in the requested regime.
double beacon_outage_asymptote(double xi, int num_antennas, double alpha, XiRegime regime);

// Participation ---------------------------------------------------------------

/// E[1/M | M > 0] for M ~ Binomial(K, 1 - P_out).
double expected_reciprocal_active(double p_out, int num_devices);

// Deviation bounds ------------------------------------------------------------

/// Upper bound on E[sigma^2 / b* | active] under the optimal local computation.
double local_deviation_bound(const DeviceProfile& dev, double harvested_energy, const SystemConfig& cfg);

/// Bound on the global gradient deviation. `per_device_terms[k]` is
/// Pr(k active) * E[sigma_k^2 / b_k | active].
double global_deviation_bound(std::span<const double> per_device_terms, double p_out, int num_devices,
                              double grad_norm_bound);

/// Residue 2 (sum_{m=2}^K (P^(m-1) - P^K) / (K - m + 1) + P^2) Phi.
double residue_term(double p_out, int num_devices, double grad_norm_bound);

/// (1/K) sum_k W_k sigma_k^2 C_k^(1/3).
double weighted_compute_variance(std::span<const DeviceProfile> devices);

/// (4/alpha) B(2/3, 2/alpha) ((beta - 2) nu^(beta-2) / (pi beta))^(1/3).
double beacon_delta(const SystemConfig& cfg);

BoundReport convergence_bound_beacon(const SystemConfig& cfg, std::span<const DeviceProfile> devices,
                                     const BeaconSource& src, const LossMeta& loss);

/// Least-squares slope of log(deviation + residue) against log(energy knob).
/// Requires >= 5 points spanning >= 2 decades, each with P_out < 1e-6.
double scaling_exponent(std::span<const BoundReport> sweep);
/// Same fit on raw (x, y) pairs; only the span requirement is checked.
double scaling_exponent(std::span<const std::pair<double, double>> points);

// Server-WPT ------------------------------------------------------------------

/// tau = R^(2 alpha) phi(T^cmm) / (rho P0 T^cmp).
double tau_parameter(const ServerSource& src, const SystemConfig& cfg);

/// Outage probability under equal-power server WPT, by quadrature of the
/// product-channel density against the location law.
double server_outage_probability(double tau, int num_antennas, double alpha,
                                 const math::QuadratureSpec& quad = {});

/// Leading term tau^L ln(1/tau) / (Gamma(L)^2 L (1 + alpha L)); requires 0 < tau < 1.
double server_outage_upper_bound(double tau, int num_antennas, double alpha);

/// Leading term plus the explicit O(tau^L) remainder
/// tau^L (1 + 2 alpha L) / (Gamma(L)^2 L^2 (1 + alpha L)^2). This is the form
/// that dominates the exact probability for small tau.
double server_outage_bound_with_remainder(double tau, int num_antennas, double alpha);

/// 2 B(2/3, 1/6 + 1/alpha) Gamma(L + 1/3) R^(alpha/3) / (alpha Gamma(L)).
double server_delta(const SystemConfig& cfg);

BoundReport convergence_bound_server(const SystemConfig& cfg, std::span<const DeviceProfile> devices,
                                     const ServerSource& src, const LossMeta& loss,
                                     const math::QuadratureSpec& quad = {});

}  // namespace wpfeel::analysis
