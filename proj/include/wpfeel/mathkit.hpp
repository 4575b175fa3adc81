#pragma once

#include <functional>
#include <stdexcept>
#include <string>

namespace wpfeel::math {

/// Raised when a special function or quadrature is called outside its domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised by integrate() when the subdivision budget runs out before the
/// requested tolerance is reached. Carries the best estimate so callers can
/// decide whether it is usable anyway.
class ToleranceNotMet : public std::runtime_error {
 public:
  ToleranceNotMet(double estimate, double error_bound);
  double estimate() const noexcept { return estimate_; }
  double error_bound() const noexcept { return error_bound_; }

 private:
  double estimate_;
  double error_bound_;
};

inline constexpr double kEulerGamma = 0.57721566490153286060651209008240243;
inline constexpr double kPi = 3.14159265358979323846264338327950288;

double ln_gamma(double x);
double gamma_fn(double x);

/// Lower incomplete gamma gamma(s, x) = int_0^x t^(s-1) e^(-t) dt.
double lower_incomplete_gamma(double s, double x);
/// gamma(s, x) / Gamma(s), in [0, 1].
double regularized_lower_gamma(double s, double x);
/// Upper complement Gamma(s, x) = Gamma(s) - gamma(s, x).
double upper_incomplete_gamma(double s, double x);
/// Gamma(s, x) / Gamma(s).
double regularized_upper_gamma(double s, double x);

double beta(double a, double b);

/// Modified Bessel function of the second kind, order zero.
double bessel_k0(double x);

struct QuadratureSpec {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  int max_subdivisions = 2000;

  void validate() const;
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  int subdivisions = 0;
};

using Integrand = std::function<double(double)>;

/// Adaptive Gauss-Kronrod (7/15) quadrature on [lo, hi]. `hi` may be +inf.
/// With `endpoint_singularity`, the substitution x = lo + (hi - lo) u^2 is
/// applied so integrable log or power singularities at `lo` are smoothed out.
QuadratureResult integrate_with_error(const Integrand& f, double lo, double hi,
                                      const QuadratureSpec& spec = {},
                                      bool endpoint_singularity = false);

double integrate(const Integrand& f, double lo, double hi, const QuadratureSpec& spec = {},
                 bool endpoint_singularity = false);

}  // namespace wpfeel::math
