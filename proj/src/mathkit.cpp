#include "wpfeel/mathkit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>
#include <vector>

namespace wpfeel::math {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kTiny = 1e-300;
constexpr int kMaxIter = 100000;

// Lanczos approximation, g = 7, n = 9.
constexpr std::array<double, 9> kLanczos = {
    0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
    771.32342877765313,      -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};

double lanczos_ln_gamma(double x) {
  // Valid for x >= 0.5.
  const double z = x - 1.0;
  double sum = kLanczos[0];
  for (std::size_t i = 1; i < kLanczos.size(); ++i) sum += kLanczos[i] / (z + static_cast<double>(i));
  const double t = z + 7.5;
  return 0.5 * std::log(2.0 * kPi) + (z + 0.5) * std::log(t) - t + std::log(sum);
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    std::ostringstream os;
    os << what << " must be positive and finite, got " << v;
    throw DomainError(os.str());
  }
}

// Series part of the incomplete gamma: returns sum such that
// gamma(s, x) = x^s e^-x * sum. Converges for all x, fast when x < s + 1.
double lower_gamma_series_sum(double s, double x) {
  double ap = s;
  double del = 1.0 / s;
  double sum = del;
  for (int n = 0; n < kMaxIter; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * kEps) return sum;
  }
  throw DomainError("incomplete gamma series failed to converge");
}

// Continued fraction (modified Lentz) such that Gamma(s, x) = x^s e^-x * h.
double upper_gamma_cf(double s, double x) {
  double b = x + 1.0 - s;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - s);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw DomainError("incomplete gamma continued fraction failed to converge");
}

void check_incomplete_args(double s, double x) {
  require_positive(s, "incomplete gamma shape s");
  if (!(x >= 0.0)) {
    std::ostringstream os;
    os << "incomplete gamma argument x must be >= 0, got " << x;
    throw DomainError(os.str());
  }
}

// K0 for 0 < x <= 2 via the ascending series.
double bessel_k0_series(double x) {
  const double y = 0.25 * x * x;
  double term = 1.0;  // (x^2/4)^k / (k!)^2
  double i0 = 1.0;
  double harmonic = 0.0;
  double tail = 0.0;
  for (int k = 1; k < 200; ++k) {
    term *= y / (static_cast<double>(k) * k);
    harmonic += 1.0 / k;
    i0 += term;
    tail += harmonic * term;
    if (term < kEps * i0 && harmonic * term < kEps * std::fabs(tail)) break;
  }
  return -(std::log(0.5 * x) + kEulerGamma) * i0 + tail;
}

// K0 for x > 2 via Temme's continued fraction (Steed's algorithm, nu = 0).
double bessel_k0_cf(double x) {
  double b = 2.0 * (1.0 + x);
  double d = 1.0 / b;
  double h = d;
  double delh = d;
  double q1 = 0.0;
  double q2 = 1.0;
  const double a1 = 0.25;
  double q = a1;
  double c = a1;
  double a = -a1;
  double s = 1.0 + q * delh;
  for (int i = 1; i < kMaxIter; ++i) {
    a -= 2.0 * i;
    c = -a * c / (i + 1.0);
    const double qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    const double dels = q * delh;
    s += dels;
    if (std::fabs(dels / s) < kEps) break;
  }
  return std::sqrt(kPi / (2.0 * x)) * std::exp(-x) / s;
}

// 15-point Kronrod / 7-point Gauss rule.
constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a;
  double b;
  double value;
  double error;
  bool operator<(const Segment& other) const { return error < other.error; }
};

Segment gauss_kronrod(const Integrand& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double kronrod = fc * kWgk[7];
  double gauss = fc * kWg[3];
  for (std::size_t j = 0; j < 7; ++j) {
    const double dx = half * kXgk[j];
    const double f1 = f(center - dx);
    const double f2 = f(center + dx);
    kronrod += kWgk[j] * (f1 + f2);
    if (j % 2 == 1) gauss += kWg[j / 2] * (f1 + f2);
  }
  kronrod *= half;
  gauss *= half;
  return {a, b, kronrod, std::fabs(kronrod - gauss)};
}

QuadratureResult adaptive(const Integrand& f, double a, double b, const QuadratureSpec& spec) {
  std::priority_queue<Segment> heap;
  Segment first = gauss_kronrod(f, a, b);
  double total = first.value;
  double total_err = first.error;
  heap.push(first);
  int segments = 1;
  auto tolerance = [&] { return std::max(spec.abs_tol, spec.rel_tol * std::fabs(total)); };
  while (total_err > tolerance()) {
    if (segments >= spec.max_subdivisions) throw ToleranceNotMet(total, total_err);
    const Segment worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    const Segment left = gauss_kronrod(f, worst.a, mid);
    const Segment right = gauss_kronrod(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++segments;
    if (!std::isfinite(total)) throw DomainError("integrand produced a non-finite value");
  }
  // Re-sum from the segments to shed the drift of incremental updates.
  double sum = 0.0;
  double err = 0.0;
  while (!heap.empty()) {
    sum += heap.top().value;
    err += heap.top().error;
    heap.pop();
  }
  return {sum, err, segments};
}

}  // namespace

ToleranceNotMet::ToleranceNotMet(double estimate, double error_bound)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << "quadrature tolerance not met: estimate " << estimate << ", error bound "
           << error_bound;
        return os.str();
      }()),
      estimate_(estimate),
      error_bound_(error_bound) {}

double ln_gamma(double x) {
  require_positive(x, "ln_gamma argument");
  if (x < 0.5) return std::log(kPi / std::sin(kPi * x)) - lanczos_ln_gamma(1.0 - x);
  return lanczos_ln_gamma(x);
}

double gamma_fn(double x) { return std::exp(ln_gamma(x)); }

double lower_incomplete_gamma(double s, double x) {
  check_incomplete_args(s, x);
  if (x == 0.0) return 0.0;
  if (x < s + 1.0) return std::exp(s * std::log(x) - x) * lower_gamma_series_sum(s, x);
  return gamma_fn(s) - std::exp(s * std::log(x) - x) * upper_gamma_cf(s, x);
}

double regularized_lower_gamma(double s, double x) {
  check_incomplete_args(s, x);
  if (x == 0.0) return 0.0;
  const double log_prefactor = s * std::log(x) - x - ln_gamma(s);
  if (x < s + 1.0) return std::min(1.0, std::exp(log_prefactor) * lower_gamma_series_sum(s, x));
  return std::max(0.0, 1.0 - std::exp(log_prefactor) * upper_gamma_cf(s, x));
}

double upper_incomplete_gamma(double s, double x) {
  check_incomplete_args(s, x);
  if (x == 0.0) return gamma_fn(s);
  if (x < s + 1.0) return gamma_fn(s) - std::exp(s * std::log(x) - x) * lower_gamma_series_sum(s, x);
  return std::exp(s * std::log(x) - x) * upper_gamma_cf(s, x);
}

double regularized_upper_gamma(double s, double x) {
  check_incomplete_args(s, x);
  if (x == 0.0) return 1.0;
  const double log_prefactor = s * std::log(x) - x - ln_gamma(s);
  if (x < s + 1.0) return std::max(0.0, 1.0 - std::exp(log_prefactor) * lower_gamma_series_sum(s, x));
  return std::min(1.0, std::exp(log_prefactor) * upper_gamma_cf(s, x));
}

double beta(double a, double b) {
  require_positive(a, "beta argument a");
  require_positive(b, "beta argument b");
  const double lo = std::min(a, b);
  const double hi = std::max(a, b);
  return std::exp(ln_gamma(lo) + ln_gamma(hi) - ln_gamma(lo + hi));
}

double bessel_k0(double x) {
  require_positive(x, "bessel_k0 argument");
  return x <= 2.0 ? bessel_k0_series(x) : bessel_k0_cf(x);
}

void QuadratureSpec::validate() const {
  if (!(abs_tol > 0.0) || !(rel_tol > 0.0) || max_subdivisions < 1)
    throw DomainError("QuadratureSpec requires abs_tol > 0, rel_tol > 0, max_subdivisions >= 1");
}

QuadratureResult integrate_with_error(const Integrand& f, double lo, double hi,
                                      const QuadratureSpec& spec, bool endpoint_singularity) {
  spec.validate();
  if (!(lo < hi) || !std::isfinite(lo)) throw DomainError("integrate requires finite lo < hi");

  if (std::isinf(hi)) {
    // Map [a, inf) to [0, 1) by x = a + t / (1 - t).
    auto tail = [&](double a) {
      return [&f, a](double t) {
        const double one_minus = 1.0 - t;
        return f(a + t / one_minus) / (one_minus * one_minus);
      };
    };
    if (!endpoint_singularity) return adaptive(tail(lo), 0.0, 1.0, spec);
    QuadratureSpec half = spec;
    half.abs_tol *= 0.5;
    const QuadratureResult head = integrate_with_error(f, lo, lo + 1.0, half, true);
    const QuadratureResult rest = adaptive(tail(lo + 1.0), 0.0, 1.0, half);
    return {head.value + rest.value, head.error + rest.error, head.subdivisions + rest.subdivisions};
  }

  if (endpoint_singularity) {
    const double width = hi - lo;
    auto smoothed = [&f, lo, width](double u) { return f(lo + width * u * u) * 2.0 * width * u; };
    return adaptive(smoothed, 0.0, 1.0, spec);
  }
  return adaptive(f, lo, hi, spec);
}

double integrate(const Integrand& f, double lo, double hi, const QuadratureSpec& spec,
                 bool endpoint_singularity) {
  return integrate_with_error(f, lo, hi, spec, endpoint_singularity).value;
}

}  // namespace wpfeel::math
