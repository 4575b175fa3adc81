#include "wpfeel/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace wpfeel::mc {

namespace {

using kernels::Execution;

// Harvested energy and allocated power per device for this round.
void harvest(std::vector<DeviceRound>& out, std::span<const DeviceProfile> devices, const WptSource& src,
             const SystemConfig& cfg, int& dropped) {
  if (const auto* beacon = std::get_if<BeaconSource>(&src)) {
    const double e = beacon_harvested_energy(*beacon, cfg);
    for (auto& d : out) d.harvested_j = e;
    return;
  }
  const auto& server = std::get<ServerSource>(src);
  std::vector<ChannelDraw> draws;
  draws.reserve(out.size());
  for (const auto& d : out) draws.push_back(d.draw);
  if (server.control == PowerControl::kEqual) {
    for (auto& d : out) d.allocated_power_w = server.per_device_power_w;
  } else {
    const auto scheduled = policy::schedule_server_wpt(draws, server, cfg);
    if (!scheduled.empty()) {
      const auto plan =
          policy::allocate_server_power_with_fallback(draws, devices, scheduled, server.per_device_power_w, cfg);
      dropped = static_cast<int>(plan.dropped.size());
      for (std::size_t i = 0; i < plan.active_set.size(); ++i)
        out[static_cast<std::size_t>(plan.active_set[i])].allocated_power_w = plan.powers[i];
    }
  }
  for (auto& d : out) d.harvested_j = server_harvested_energy(server, d.draw, d.allocated_power_w, cfg);
}

}  // namespace

std::vector<int> sample_batch(RandomStream& rng, int size, int count) {
  if (count < 0 || count > size) throw std::invalid_argument("batch larger than the shard");
  std::vector<int> idx(static_cast<std::size_t>(size));
  std::iota(idx.begin(), idx.end(), 0);
  if (count == size) return idx;
  for (int i = 0; i < count; ++i) {
    const auto j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(size - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(count));
  std::sort(idx.begin(), idx.end());
  return idx;
}

RoundRecord simulate_round(TrainingState& state, const SystemConfig& cfg, std::span<const DeviceProfile> devices,
                           const WptSource& src, const SyntheticTask& task, std::uint64_t seed, int round,
                           Execution exec) {
  const int K = cfg.num_devices;
  if (devices.size() != static_cast<std::size_t>(K) || task.num_devices != K)
    throw std::invalid_argument("device count mismatch between config, profiles and task");
  if (state.model.size() != static_cast<std::size_t>(task.model_dim()))
    throw std::invalid_argument("model dimension does not match the task");

  RoundRecord rec;
  rec.round_index = round;
  rec.devices.resize(static_cast<std::size_t>(K));
  const bool server = std::holds_alternative<ServerSource>(src);
  const auto r = static_cast<std::uint64_t>(round);
  for (int k = 0; k < K; ++k) {
    RandomStream rng(seed, {purpose(StreamPurpose::kChannel), r, static_cast<std::uint64_t>(k)});
    rec.devices[static_cast<std::size_t>(k)].draw = sample_channel(rng, cfg, server);
  }
  harvest(rec.devices, devices, src, cfg, rec.dropped_by_fallback);

  std::vector<int> active;
  for (int k = 0; k < K; ++k) {
    auto& d = rec.devices[static_cast<std::size_t>(k)];
    d.split = policy::compute_energy_split(d.harvested_j, d.draw, cfg);
    if (!d.split.active) continue;
    d.plan = policy::optimal_local_computation(d.split.compute_energy_j, devices[static_cast<std::size_t>(k)], cfg);
    const double cap = static_cast<double>(task.samples_per_device);
    d.batch_used = static_cast<int>(std::min(std::floor(d.plan.batch_size), cap));
    d.active = d.batch_used > 0;
    if (d.active) active.push_back(k);
  }
  rec.active_count = static_cast<int>(active.size());

  // Full-shard gradients give the reference grad F(w); mini-batch gradients the update.
  std::vector<Vector> full(static_cast<std::size_t>(K));
  std::vector<double> losses(static_cast<std::size_t>(K));
  std::vector<Vector> local(active.size());
  const std::size_t units = static_cast<std::size_t>(K) + active.size();
  kernels::for_each_index(units, exec, [&](std::size_t u) {
    if (u < static_cast<std::size_t>(K)) {
      const int k = static_cast<int>(u);
      full[u] = local_full_gradient(state.model, task, k);
      losses[u] = local_loss(state.model, task, k);
      return;
    }
    const std::size_t i = u - static_cast<std::size_t>(K);
    const int k = active[i];
    const auto& d = rec.devices[static_cast<std::size_t>(k)];
    RandomStream rng(seed, {purpose(StreamPurpose::kBatch), r, static_cast<std::uint64_t>(k)});
    const auto batch = sample_batch(rng, task.samples_per_device, d.batch_used);
    local[i] = local_gradient(state.model, task, k, batch);
  });
  const Vector grad = average(full);
  rec.loss = std::accumulate(losses.begin(), losses.end(), 0.0) / K;
  rec.grad_norm_sq = squared_norm(grad);

  if (active.empty()) {
    rec.deviation_sample = rec.grad_norm_sq;  // g = 0
    return rec;
  }
  const Vector g = average(local);
  rec.aggregate_norm_sq = squared_norm(g);
  rec.deviation_sample = squared_distance(g, grad);
  for (std::size_t i = 0; i < g.size(); ++i) state.model[i] -= cfg.learning_rate * g[i];
  rec.update_applied = true;
  return rec;
}

double estimate_smoothness(std::span<const Vector> probes, const std::function<Vector(const Vector&)>& gradient) {
  std::vector<Vector> grads;
  grads.reserve(probes.size());
  for (const auto& p : probes) grads.push_back(gradient(p));
  double best = 0.0;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    for (std::size_t j = i + 1; j < probes.size(); ++j) {
      const double dw = squared_distance(probes[i], probes[j]);
      if (dw == 0.0) continue;
      best = std::max(best, std::sqrt(squared_distance(grads[i], grads[j]) / dw));
    }
  }
  return best;
}

EstimatedConstants estimate_constants(const SyntheticTask& task, std::span<const Vector> probes, Execution exec) {
  if (probes.size() < 10) throw std::invalid_argument("constant estimation needs at least 10 probe points");
  EstimatedConstants c;
  c.mu_hat = estimate_smoothness(probes, [&](const Vector& w) { return full_gradient(w, task); });
  const auto K = static_cast<std::size_t>(task.num_devices);
  std::vector<double> phi(K, 0.0);
  c.sigma2_hat.assign(K, 0.0);
  kernels::for_each_index(K, exec, [&](std::size_t k) {
    for (const auto& w : probes) {
      const int dev = static_cast<int>(k);
      phi[k] = std::max(phi[k], max_sample_gradient_norm_sq(w, task, dev));
      c.sigma2_hat[k] = std::max(c.sigma2_hat[k], local_gradient_variance(w, task, dev));
    }
  });
  c.phi_hat = kPhiSafetyFactor * *std::max_element(phi.begin(), phi.end());
  return c;
}

TrainingReport run_training(const SystemConfig& cfg, std::span<const DeviceProfile> devices, const WptSource& src,
                            const SyntheticTask& task, std::uint64_t seed, const RunOptions& options) {
  cfg.validate();
  validate(src);
  const int N = cfg.num_rounds;
  TrainingReport rep;
  rep.learning_rate = cfg.learning_rate;
  TrainingState state{Vector(static_cast<std::size_t>(task.model_dim()), 0.0)};
  std::vector<Vector> probes;
  const int stride = std::max(1, N / 10);

  rep.loss.reserve(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) {
    if (i % stride == 0) probes.push_back(state.model);
    RoundRecord rec = simulate_round(state, cfg, devices, src, task, seed, i, options.exec);
    rep.loss.push_back(rec.loss);
    rep.grad_norm_sq.push_back(rec.grad_norm_sq);
    rep.active_count.push_back(rec.active_count);
    rep.deviation.push_back(rec.deviation_sample);
    double batch = 0.0;
    for (const auto& d : rec.devices)
      if (d.active) batch += d.batch_used;
    rep.mean_batch.push_back(rec.active_count ? batch / rec.active_count : 0.0);
    if (!rec.update_applied) ++rep.idle_rounds;
    if (options.keep_rounds) rep.rounds.push_back(std::move(rec));
  }
  rep.initial_loss = rep.loss.empty() ? global_loss(state.model, task) : rep.loss.front();
  rep.final_loss = global_loss(state.model, task);
  rep.test_accuracy = test_accuracy(state.model, task);
  const double n = std::max(1, N);
  rep.avg_grad_norm = std::accumulate(rep.grad_norm_sq.begin(), rep.grad_norm_sq.end(), 0.0) / n;
  rep.mean_deviation = std::accumulate(rep.deviation.begin(), rep.deviation.end(), 0.0) / n;
  rep.final_model = state.model;

  if (options.estimate_constants) {
    probes.push_back(state.model);
    // Random probes around the trajectory guarantee coverage off the path too.
    std::uint64_t extra = 0;
    const double scale = 0.5 / std::sqrt(static_cast<double>(task.model_dim()));
    const std::size_t anchors = probes.size();
    while (probes.size() < std::max<std::size_t>(12, anchors + 4)) {
      RandomStream rng(seed, {purpose(StreamPurpose::kProbe), extra});
      Vector w = probes[extra % anchors];
      for (auto& v : w) v += scale * rng.normal();
      probes.push_back(std::move(w));
      ++extra;
    }
    rep.constants = estimate_constants(task, probes, options.exec);
  }
  return rep;
}

std::vector<Vector> gradient_descent_trajectory(const SyntheticTask& task, double learning_rate, int rounds) {
  std::vector<Vector> traj;
  Vector w(static_cast<std::size_t>(task.model_dim()), 0.0);
  traj.push_back(w);
  for (int i = 0; i < rounds; ++i) {
    const Vector g = full_gradient(w, task);
    for (std::size_t j = 0; j < w.size(); ++j) w[j] -= learning_rate * g[j];
    traj.push_back(w);
  }
  return traj;
}

OutageEstimate mc_outage(const WptSource& src, const SystemConfig& cfg, std::uint64_t n, std::uint64_t seed,
                         Execution exec) {
  if (n < 10000) throw std::invalid_argument("mc_outage needs at least 1e4 draws");
  const auto c = kernels::count_outages(cfg, src, n, seed, exec);
  return {c.estimate(), c.standard_error()};
}

}  // namespace wpfeel::mc
