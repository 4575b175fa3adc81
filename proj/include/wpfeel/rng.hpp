#pragma once

#include <cstdint>
#include <initializer_list>
#include <optional>

namespace wpfeel {

/// Addressable random stream. A stream is fully determined by a seed and a
/// short list of integer coordinates (e.g. round, device, purpose), so work
/// can be scheduled in any order or on any number of threads and still draw
/// the same numbers. Not thread-safe: each unit of work owns its stream.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::initializer_list<std::uint64_t> coordinates);
  explicit RandomStream(std::uint64_t seed) : RandomStream(seed, {}) {}

  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  /// Uniform on (0, 1].
  double uniform_open_low();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();
  double exponential();
  /// Gamma(shape, 1) by Marsaglia-Tsang.
  double gamma(double shape);

 private:
  std::uint64_t s_[4];
  std::optional<double> spare_normal_;
};

/// Well-known stream purposes; keeps coordinate lists self-describing.
enum class StreamPurpose : std::uint64_t {
  kChannel = 1,
  kBatch = 2,
  kMonteCarloBlock = 3,
  kTaskData = 4,
  kDeviceProfile = 5,
  kProbe = 6,
  kInitialModel = 7,
};

constexpr std::uint64_t purpose(StreamPurpose p) { return static_cast<std::uint64_t>(p); }

}  // namespace wpfeel
