#include "wpfeel/kernels.hpp"

#include <algorithm>
#include <stdexcept>

#include "wpfeel/policy.hpp"
#include "wpfeel/rng.hpp"

namespace wpfeel::kernels {

namespace {

struct Block {
  std::uint64_t begin;
  std::uint64_t size;
};

std::vector<Block> make_blocks(std::uint64_t n) {
  std::vector<Block> blocks;
  for (std::uint64_t b = 0; b < n; b += kBlockSize) blocks.push_back({b, std::min(kBlockSize, n - b)});
  return blocks;
}

RandomStream block_stream(std::uint64_t seed, std::size_t block) {
  return RandomStream(seed, {purpose(StreamPurpose::kMonteCarloBlock), static_cast<std::uint64_t>(block)});
}

ActiveMoments combine(const std::vector<ActiveMoments>& parts) {
  ActiveMoments total;
  for (const auto& p : parts) {
    total.active += p.active;
    total.trials += p.trials;
    total.sum += p.sum;
    total.sum_sq += p.sum_sq;
  }
  return total;
}

}  // namespace

double ActiveMoments::standard_error() const {
  if (active < 2) return 0.0;
  const double n = static_cast<double>(active);
  const double m = sum / n;
  const double var = std::max(0.0, (sum_sq / n - m * m) * n / (n - 1.0));
  return std::sqrt(var / n);
}

BinomialCount count_outages(const SystemConfig& cfg, const WptSource& src, std::uint64_t n, std::uint64_t seed,
                            Execution exec) {
  cfg.validate();
  validate(src);
  const auto blocks = make_blocks(n);
  std::vector<std::uint64_t> hits(blocks.size(), 0);
  const bool server = std::holds_alternative<ServerSource>(src);
  const double beacon_energy = server ? 0.0 : beacon_harvested_energy(std::get<BeaconSource>(src), cfg);
  const double p0 = server ? std::get<ServerSource>(src).per_device_power_w : 0.0;

  for_each_index(blocks.size(), exec, [&](std::size_t b) {
    RandomStream rng = block_stream(seed, b);
    std::uint64_t count = 0;
    for (std::uint64_t i = 0; i < blocks[b].size; ++i) {
      const ChannelDraw draw = sample_channel(rng, cfg, server);
      const bool outage = server ? !(policy::communication_floor(draw, cfg) < p0)
                                 : !policy::compute_energy_split(beacon_energy, draw, cfg).active;
      count += outage ? 1 : 0;
    }
    hits[b] = count;
  });
  BinomialCount c;
  c.trials = n;
  for (auto h : hits) c.hits += h;
  return c;
}

namespace {

template <class Outage>
BinomialCount count_normalised(std::uint64_t n, std::uint64_t seed, Execution exec, Outage&& outage) {
  const auto blocks = make_blocks(n);
  std::vector<std::uint64_t> hits(blocks.size(), 0);
  for_each_index(blocks.size(), exec, [&](std::size_t b) {
    RandomStream rng = block_stream(seed, b);
    std::uint64_t count = 0;
    for (std::uint64_t i = 0; i < blocks[b].size; ++i) count += outage(rng) ? 1 : 0;
    hits[b] = count;
  });
  BinomialCount c;
  c.trials = n;
  for (auto h : hits) c.hits += h;
  return c;
}

}  // namespace

BinomialCount count_beacon_outages(int num_antennas, double alpha, double xi, std::uint64_t n, std::uint64_t seed,
                                   Execution exec) {
  if (num_antennas < 1 || !(alpha > 0.0) || xi < 0.0) throw std::invalid_argument("bad outage parameters");
  const double L = num_antennas;
  return count_normalised(n, seed, exec, [&](RandomStream& rng) {
    const double u2 = rng.uniform();  // (r/R)^2
    return rng.gamma(L) <= std::pow(u2, 0.5 * alpha) * xi;
  });
}

BinomialCount count_server_outages(int num_antennas, double alpha, double tau, std::uint64_t n,
                                   std::uint64_t seed, Execution exec) {
  if (num_antennas < 1 || !(alpha > 0.0) || tau < 0.0) throw std::invalid_argument("bad outage parameters");
  const double L = num_antennas;
  return count_normalised(n, seed, exec, [&](RandomStream& rng) {
    const double u2 = rng.uniform();
    const double cascade = rng.gamma(L) * rng.gamma(L);
    return cascade <= tau * std::pow(u2, alpha);
  });
}

ActiveMoments deviation_moments(const SystemConfig& cfg, const DeviceProfile& dev, double harvested_j,
                                std::uint64_t n, std::uint64_t seed, Execution exec) {
  cfg.validate();
  dev.validate();
  const auto blocks = make_blocks(n);
  std::vector<ActiveMoments> parts(blocks.size());
  for_each_index(blocks.size(), exec, [&](std::size_t b) {
    RandomStream rng = block_stream(seed, b);
    ActiveMoments m;
    m.trials = blocks[b].size;
    for (std::uint64_t i = 0; i < blocks[b].size; ++i) {
      const ChannelDraw draw = sample_channel(rng, cfg, false);
      const auto split = policy::compute_energy_split(harvested_j, draw, cfg);
      if (!split.active) continue;
      const auto plan = policy::optimal_local_computation(split.compute_energy_j, dev, cfg);
      const double v = dev.grad_variance / plan.batch_size;
      ++m.active;
      m.sum += v;
      m.sum_sq += v * v;
    }
    parts[b] = m;
  });
  return combine(parts);
}

ActiveMoments reciprocal_active_moments(const SystemConfig& cfg, const BeaconSource& src, std::uint64_t rounds,
                                        std::uint64_t seed, Execution exec) {
  cfg.validate();
  const double energy = beacon_harvested_energy(src, cfg);
  // Fewer rounds per block than draws per block: each round costs K draws.
  const std::uint64_t per_block = std::max<std::uint64_t>(1, kBlockSize / static_cast<std::uint64_t>(cfg.num_devices));
  std::vector<Block> blocks;
  for (std::uint64_t r = 0; r < rounds; r += per_block) blocks.push_back({r, std::min(per_block, rounds - r)});
  std::vector<ActiveMoments> parts(blocks.size());
  for_each_index(blocks.size(), exec, [&](std::size_t b) {
    RandomStream rng = block_stream(seed, b);
    ActiveMoments m;
    m.trials = blocks[b].size;
    for (std::uint64_t r = 0; r < blocks[b].size; ++r) {
      int active = 0;
      for (int k = 0; k < cfg.num_devices; ++k) {
        const ChannelDraw draw = sample_channel(rng, cfg, false);
        active += policy::compute_energy_split(energy, draw, cfg).active ? 1 : 0;
      }
      if (active == 0) continue;
      const double v = 1.0 / active;
      ++m.active;
      m.sum += v;
      m.sum_sq += v * v;
    }
    parts[b] = m;
  });
  return combine(parts);
}

}  // namespace wpfeel::kernels
