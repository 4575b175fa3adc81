#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "wpfeel/analysis.hpp"
#include "wpfeel/montecarlo.hpp"

using namespace wpfeel;
using namespace wpfeel::mc;

namespace {

struct Desk {
  SystemConfig cfg;
  std::vector<DeviceProfile> devices;
  SyntheticTask task;
};

Desk make_desk(int rounds) {
  Desk d;
  d.cfg.num_devices = 4;
  d.cfg.num_rounds = rounds;
  TaskShape shape;
  shape.num_devices = 4;
  shape.samples_per_device = 50;
  shape.feature_dim = 6;
  shape.num_classes = 4;
  shape.test_size = 100;
  d.task = build_task(21, shape);
  d.cfg.learning_rate = 1.0 / smoothness_upper_bound(d.task);
  d.cfg.smoothness = smoothness_upper_bound(d.task);
  d.devices.assign(4, DeviceProfile{});
  for (auto& p : d.devices) p.local_dataset_size = 50;
  return d;
}

BeaconSource rich() { return {1.0, 1e4}; }    // b* well above D, no outage
BeaconSource poor() { return {1.0, 1e-9}; }   // every device in outage

}  // namespace

TEST_CASE("sample_batch") {
  RandomStream rng(1, {2});
  for (int count : {0, 1, 7, 49}) {
    const auto b = sample_batch(rng, 50, count);
    CHECK(b.size() == static_cast<std::size_t>(count));
    CHECK(std::is_sorted(b.begin(), b.end()));
    CHECK(std::adjacent_find(b.begin(), b.end()) == b.end());
    for (int i : b) CHECK_UNARY(i >= 0 && i < 50);
  }
  const auto all = sample_batch(rng, 50, 50);
  for (int i = 0; i < 50; ++i) CHECK(all[i] == i);
  CHECK_THROWS(sample_batch(rng, 5, 6));
}

TEST_CASE("idle round leaves the model untouched") {
  auto d = make_desk(1);
  TrainingState s{Vector(static_cast<std::size_t>(d.task.model_dim()), 0.0)};
  const auto before = s.model;
  const auto rec = simulate_round(s, d.cfg, d.devices, poor(), d.task, 1, 0);
  CHECK(rec.active_count == 0);
  CHECK_FALSE(rec.update_applied);
  CHECK(s.model == before);
  CHECK(rec.deviation_sample == rec.grad_norm_sq);
}

TEST_CASE("full participation with full shards is a gradient step") {
  auto d = make_desk(1);
  TrainingState s{Vector(static_cast<std::size_t>(d.task.model_dim()), 0.1)};
  const Vector grad = full_gradient(s.model, d.task);
  Vector expected = s.model;
  for (std::size_t i = 0; i < expected.size(); ++i) expected[i] -= d.cfg.learning_rate * grad[i];
  const auto rec = simulate_round(s, d.cfg, d.devices, rich(), d.task, 1, 0);
  CHECK(rec.active_count == 4);
  for (const auto& dev : rec.devices) CHECK(dev.batch_used == 50);
  CHECK(rec.deviation_sample == 0.0);
  CHECK(s.model == expected);
}

TEST_CASE("round records respect the energy and time budgets") {
  for (const WptSource& src : {WptSource{BeaconSource{1.0, 0.05}},
                               WptSource{ServerSource{0.02, PowerControl::kEqual}},
                               WptSource{ServerSource{0.02, PowerControl::kOptimized}}}) {
    auto d = make_desk(30);
    d.cfg.cell_radius_m = 10.0;
    RunOptions opt;
    opt.keep_rounds = true;
    opt.estimate_constants = false;
    const auto rep = run_training(d.cfg, d.devices, src, d.task, 3, opt);
    REQUIRE(rep.rounds.size() == 30);
    int active_seen = 0;
    for (const auto& rec : rep.rounds) {
      int m = 0;
      for (const auto& dev : rec.devices) {
        if (!dev.active) continue;
        ++m;
        CHECK(dev.split.comm_energy_j + dev.split.compute_energy_j <= dev.harvested_j * (1.0 + 1e-12));
        // The floored batch runs at the planned speed: energy and time shrink with it.
        const auto& p = d.devices[0];
        const double f = dev.plan.speed_flops;
        CHECK(dev.batch_used * p.compute_coeff * p.per_sample_flops * f * f <=
              dev.split.compute_energy_j * (1.0 + 1e-9));
        CHECK(dev.batch_used * p.per_sample_flops / f <= d.cfg.compute_s * (1.0 + 1e-9));
        CHECK(dev.batch_used <= d.task.samples_per_device);
        CHECK(dev.batch_used == static_cast<int>(std::min(std::floor(dev.plan.batch_size), 50.0)));
      }
      CHECK(m == rec.active_count);
      CHECK(rec.update_applied == (m > 0));
      active_seen += m;
    }
    CHECK(active_seen > 0);
    CHECK(rep.loss.size() == 30);
    CHECK(rep.idle_rounds == std::count(rep.active_count.begin(), rep.active_count.end(), 0));
  }
}

TEST_CASE("optimized server rounds spend exactly the sum power on scheduled devices") {
  auto d = make_desk(1);
  d.cfg.cell_radius_m = 10.0;
  const ServerSource src{0.05, PowerControl::kOptimized};
  for (int round = 0; round < 20; ++round) {
    TrainingState s{Vector(static_cast<std::size_t>(d.task.model_dim()), 0.0)};
    const auto rec = simulate_round(s, d.cfg, d.devices, src, d.task, 8, round);
    double total = 0.0;
    int powered = 0;
    for (const auto& dev : rec.devices) {
      total += dev.allocated_power_w;
      powered += dev.allocated_power_w > 0.0 ? 1 : 0;
    }
    if (powered > 0) CHECK(total == doctest::Approx(powered * src.per_device_power_w).epsilon(1e-9));
  }
}

TEST_CASE("zero learning rate keeps the initial model") {
  auto d = make_desk(20);
  d.cfg.learning_rate = 0.0;
  RunOptions opt;
  opt.estimate_constants = false;
  const auto rep = run_training(d.cfg, d.devices, BeaconSource{1.0, 0.1}, d.task, 1, opt);
  const Vector zero(static_cast<std::size_t>(d.task.model_dim()), 0.0);
  CHECK(rep.final_model == zero);
  CHECK(rep.avg_grad_norm == doctest::Approx(squared_norm(full_gradient(zero, d.task))).epsilon(1e-14));
}

TEST_CASE("abundant energy reproduces full-batch gradient descent bit for bit") {
  auto d = make_desk(40);
  RunOptions opt;
  opt.estimate_constants = false;
  const auto rep = run_training(d.cfg, d.devices, rich(), d.task, 5, opt);
  const auto traj = gradient_descent_trajectory(d.task, d.cfg.learning_rate, 40);
  CHECK(rep.final_model == traj.back());
  CHECK(rep.idle_rounds == 0);
  for (double v : rep.deviation) CHECK(v == 0.0);
}

TEST_CASE("training is deterministic across worker counts") {
  auto d = make_desk(25);
  const BeaconSource src{1.0, 0.05};
  RunOptions serial;
  serial.exec = kernels::Execution::serial();
  RunOptions wide;
  wide.exec = kernels::Execution::with_workers(8);
  const auto a = run_training(d.cfg, d.devices, src, d.task, 77, serial);
  const auto b = run_training(d.cfg, d.devices, src, d.task, 77, wide);
  CHECK(a.final_model == b.final_model);
  CHECK(a.loss == b.loss);
  CHECK(a.deviation == b.deviation);
  CHECK(a.constants.mu_hat == b.constants.mu_hat);
  CHECK(a.constants.sigma2_hat == b.constants.sigma2_hat);
  const auto c = run_training(d.cfg, d.devices, src, d.task, 78, serial);
  CHECK(c.final_model != a.final_model);
}

TEST_CASE("average gradient norm obeys the descent inequality") {
  auto d = make_desk(60);
  for (std::uint64_t seed : {1, 2, 3}) {
    for (const BeaconSource src : {BeaconSource{1.0, 0.02}, BeaconSource{1.0, 0.2}}) {
      const auto rep = run_training(d.cfg, d.devices, src, d.task, seed);
      REQUIRE(d.cfg.learning_rate * rep.constants.mu_hat <= 1.0);
      const double rhs = 2.0 * rep.initial_loss / (d.cfg.learning_rate * d.cfg.num_rounds) + rep.mean_deviation;
      CHECK(rep.avg_grad_norm <= rhs);
    }
  }
}

TEST_CASE("smoothness estimate") {
  std::vector<Vector> probes;
  RandomStream rng(4, {1});
  for (int i = 0; i < 12; ++i) probes.push_back({rng.normal(), rng.normal(), rng.normal()});
  // Loss 0.5 ||w||^2 has gradient w and smoothness exactly 1.
  CHECK(estimate_smoothness(probes, [](const Vector& w) { return w; }) == doctest::Approx(1.0).epsilon(1e-9));

  auto d = make_desk(1);
  auto probe_set = [&](std::uint64_t stream) {
    std::vector<Vector> out;
    RandomStream r(9, {stream});
    for (int i = 0; i < 12; ++i) {
      Vector w(static_cast<std::size_t>(d.task.model_dim()));
      for (auto& v : w) v = 0.3 * r.normal();
      out.push_back(w);
    }
    return out;
  };
  const auto a = estimate_constants(d.task, probe_set(1));
  const auto b = estimate_constants(d.task, probe_set(2));
  CHECK(a.mu_hat == doctest::Approx(b.mu_hat).epsilon(0.1));
  CHECK(a.mu_hat <= smoothness_upper_bound(d.task) * (1.0 + 1e-12));
  CHECK(a.sigma2_hat.size() == 4);
  CHECK(a.phi_hat > 0.0);
  CHECK_THROWS(estimate_constants(d.task, std::vector<Vector>(9, Vector(d.task.model_dim(), 0.0))));
}

TEST_CASE("constants of a noise-free single-class shard") {
  TaskShape shape;
  shape.num_devices = 2;
  shape.samples_per_device = 20;
  shape.feature_dim = 3;
  shape.num_classes = 2;
  shape.noise_scale = 0.0;
  shape.test_size = 10;
  const auto t = build_task(1, shape);
  std::vector<Vector> probes;
  RandomStream r(3, {1});
  for (int i = 0; i < 10; ++i) {
    Vector w(static_cast<std::size_t>(t.model_dim()));
    for (auto& v : w) v = r.normal();
    probes.push_back(w);
  }
  const auto c = estimate_constants(t, probes);
  for (double s : c.sigma2_hat) CHECK(s < 1e-20);
}

TEST_CASE("outage Monte Carlo") {
  SystemConfig c;
  CHECK(mc_outage(BeaconSource{1.0, 1e6}, c, 1000000, 1).estimate == 0.0);
  CHECK_THROWS(mc_outage(BeaconSource{1.0, 1.0}, c, 100, 1));

  SystemConfig server = c;
  server.num_antennas = 1;
  const ServerSource unit{1.0, PowerControl::kEqual};
  const ServerSource src{analysis::tau_parameter(unit, server) / 1e-2, PowerControl::kEqual};
  const double quad = analysis::server_outage_probability(1e-2, 1, server.uplink_pathloss_exp);
  const auto est = mc_outage(src, server, 1000000, 2);
  CHECK(std::abs(est.estimate - quad) < 3.0 * est.standard_error);

  const auto serial = mc_outage(src, server, 200000, 3, kernels::Execution::serial());
  const auto parallel = mc_outage(src, server, 200000, 3, kernels::Execution::with_workers(7));
  CHECK(serial.estimate == parallel.estimate);
}
