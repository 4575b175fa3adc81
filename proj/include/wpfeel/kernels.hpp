#pragma once

#include <omp.h>

#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <vector>

#include "wpfeel/sysmodel.hpp"

namespace wpfeel::kernels {

/// How a kernel distributes independent work units.
/// Results never depend on the choice: every unit owns its random stream and
/// partial results are combined in unit order.
struct Execution {
  bool parallel = true;
  int workers = 0;  // 0: OpenMP default

  static Execution serial() { return {false, 1}; }
  static Execution with_workers(int n) { return {true, n}; }
};

/// Runs f(i) for i in [0, n). Exceptions thrown by f are rethrown (the one
/// from the lowest index wins) after all units finish.
template <class F>
void for_each_index(std::size_t n, Execution exec, F&& f) {
  if (!exec.parallel || n < 2) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::exception_ptr first;
  std::size_t first_index = n;
  std::mutex mu;
  const int threads = exec.workers > 0 ? exec.workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      f(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu);
      if (i < first_index) {
        first_index = i;
        first = std::current_exception();
      }
    }
  }
  if (first) std::rethrow_exception(first);
}

/// Monte Carlo draws per block; each block uses its own stream.
inline constexpr std::uint64_t kBlockSize = 1u << 16;

struct BinomialCount {
  std::uint64_t hits = 0;
  std::uint64_t trials = 0;

  double estimate() const { return trials ? static_cast<double>(hits) / static_cast<double>(trials) : 0.0; }
  double standard_error() const {
    if (!trials) return 0.0;
    const double p = estimate();
    return std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
  }
};

/// Counts computation outages over n independent device draws, following the
/// physical path: channel sample, harvested energy, outage test.
BinomialCount count_outages(const SystemConfig& cfg, const WptSource& src, std::uint64_t n, std::uint64_t seed,
                            Execution exec = {});

/// Outage counts in normalised coordinates (u = r/R uniform in the unit
/// disc): beacon outage iff h <= u^alpha xi, server outage iff
/// h h~ <= tau u^(2 alpha). Valid for any alpha > 0, including alpha = 2.
BinomialCount count_beacon_outages(int num_antennas, double alpha, double xi, std::uint64_t n, std::uint64_t seed,
                                   Execution exec = {});
BinomialCount count_server_outages(int num_antennas, double alpha, double tau, std::uint64_t n,
                                   std::uint64_t seed, Execution exec = {});

/// Sample moments of sigma^2 / b* over draws where the device is active, under
/// deterministic harvested energy (continuous b*).
struct ActiveMoments {
  std::uint64_t active = 0;
  std::uint64_t trials = 0;
  double sum = 0.0;
  double sum_sq = 0.0;

  double mean() const { return active ? sum / static_cast<double>(active) : 0.0; }
  double standard_error() const;
};

ActiveMoments deviation_moments(const SystemConfig& cfg, const DeviceProfile& dev, double harvested_j,
                                std::uint64_t n, std::uint64_t seed, Execution exec = {});

/// Moments of 1/M over simulated rounds with M > 0, where M counts devices
/// whose beacon harvest covers their uplink.
ActiveMoments reciprocal_active_moments(const SystemConfig& cfg, const BeaconSource& src, std::uint64_t rounds,
                                        std::uint64_t seed, Execution exec = {});

}  // namespace wpfeel::kernels
