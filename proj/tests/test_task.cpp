#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "wpfeel/analysis.hpp"
#include "wpfeel/montecarlo.hpp"
#include "wpfeel/task.hpp"

using namespace wpfeel;
using namespace wpfeel::mc;

namespace {

TaskShape small_shape() {
  TaskShape s;
  s.num_devices = 4;
  s.samples_per_device = 50;
  s.feature_dim = 5;
  s.num_classes = 4;
  s.test_size = 200;
  return s;
}

Vector random_model(const SyntheticTask& t, std::uint64_t seed, double scale) {
  RandomStream rng(seed, {purpose(StreamPurpose::kProbe)});
  Vector w(static_cast<std::size_t>(t.model_dim()));
  for (auto& v : w) v = scale * rng.normal();
  return w;
}

}  // namespace

TEST_CASE("task layout") {
  const auto t = build_task(3, small_shape());
  CHECK(t.model_dim() == 5 * 4 + 4);
  CHECK(t.train_size() == 200);
  CHECK(t.test_labels.size() == 200);
  std::set<int> seen;
  for (const auto& shard : t.shards) {
    CHECK(shard.size() == 50);
    seen.insert(shard.begin(), shard.end());
  }
  CHECK(seen.size() == t.train_size());
  CHECK(*seen.begin() == 0);
  CHECK(*seen.rbegin() == static_cast<int>(t.train_size()) - 1);
}

TEST_CASE("label-sorted shards") {
  TaskShape s = small_shape();
  s.num_devices = 2;
  s.num_classes = 2;
  const auto t = build_task(1, s);
  for (int idx : t.shards[0]) CHECK(t.train_labels[idx] == 0);
  for (int idx : t.shards[1]) CHECK(t.train_labels[idx] == 1);

  TaskShape wide;  // 30 devices, 10 classes: every shard sees at most two classes
  const auto u = build_task(2, wide);
  for (const auto& shard : u.shards) {
    std::set<int> labels;
    for (int idx : shard) labels.insert(u.train_labels[idx]);
    CHECK(labels.size() <= 2);
  }
}

TEST_CASE("build_task is deterministic in the seed") {
  const auto a = build_task(9, small_shape());
  const auto b = build_task(9, small_shape());
  const auto c = build_task(10, small_shape());
  CHECK(a.train_features == b.train_features);
  CHECK(a.test_features == b.test_features);
  CHECK(a.train_features != c.train_features);
  TaskShape one_class = small_shape();
  one_class.num_classes = 1;
  CHECK_THROWS(build_task(1, one_class));
}

TEST_CASE("gradient matches central differences") {
  const auto t = build_task(4, small_shape());
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    const Vector w = random_model(t, 100 + trial, 0.3);
    const Vector dir = random_model(t, 200 + trial, 1.0);
    const int device = static_cast<int>(trial % 4);
    const Vector g = local_full_gradient(w, t, device);
    double analytic = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) analytic += g[i] * dir[i];
    const double h = 1e-5;
    Vector plus = w, minus = w;
    for (std::size_t i = 0; i < w.size(); ++i) {
      plus[i] += h * dir[i];
      minus[i] -= h * dir[i];
    }
    const double numeric = (local_loss(plus, t, device) - local_loss(minus, t, device)) / (2 * h);
    CHECK(numeric == doctest::Approx(analytic).epsilon(1e-5));
  }
}

TEST_CASE("mini-batch gradients") {
  const auto t = build_task(5, small_shape());
  const Vector w = random_model(t, 1, 0.2);
  std::vector<int> all(50);
  for (int i = 0; i < 50; ++i) all[i] = i;
  CHECK(local_gradient(w, t, 1, all) == local_full_gradient(w, t, 1));

  const std::vector<int> twice = {7, 7};
  const std::vector<int> once = {7};
  const Vector a = local_gradient(w, t, 2, twice);
  const Vector b = local_gradient(w, t, 2, once);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-15));

  CHECK_THROWS(local_gradient(w, t, 0, std::vector<int>{}));
  CHECK_THROWS(local_gradient(w, t, 0, std::vector<int>{50}));
  CHECK_THROWS(local_gradient(Vector(3, 0.0), t, 0, once));
}

TEST_CASE("full gradient is the mean of local gradients and the global loss their mean") {
  const auto t = build_task(6, small_shape());
  const Vector w = random_model(t, 2, 0.1);
  const Vector g = full_gradient(w, t);
  Vector manual(g.size(), 0.0);
  double loss = 0.0;
  for (int k = 0; k < 4; ++k) {
    const Vector gk = local_full_gradient(w, t, k);
    for (std::size_t i = 0; i < g.size(); ++i) manual[i] += gk[i] / 4.0;
    loss += local_loss(w, t, k) / 4.0;
  }
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == doctest::Approx(manual[i]).epsilon(1e-13));
  CHECK(global_loss(w, t) == doctest::Approx(loss).epsilon(1e-14));
  // Softmax cross-entropy at the zero model is ln(c).
  CHECK(global_loss(Vector(g.size(), 0.0), t) == doctest::Approx(std::log(4.0)).epsilon(1e-14));
}

TEST_CASE("mini-batch gradients are unbiased") {
  const auto t = build_task(7, small_shape());
  const Vector w(static_cast<std::size_t>(t.model_dim()), 0.0);
  const int device = 1;
  const int b = 5;
  const int draws = 10000;
  const Vector full = local_full_gradient(w, t, device);
  Vector mean(full.size(), 0.0);
  RandomStream rng(1, {purpose(StreamPurpose::kBatch)});
  for (int i = 0; i < draws; ++i) {
    const Vector g = local_gradient(w, t, device, sample_batch(rng, 50, b));
    for (std::size_t j = 0; j < g.size(); ++j) mean[j] += g[j] / draws;
  }
  // E||mean - full||^2 = tr(Omega) (D - b) / ((D - 1) b draws) without replacement.
  const double expected = local_gradient_variance(w, t, device) * (50.0 - b) / (49.0 * b * draws);
  CHECK(squared_distance(mean, full) < 4.0 * expected);
}

TEST_CASE("gradient variance falls as one over the batch size") {
  TaskShape s = small_shape();
  s.samples_per_device = 400;
  const auto t = build_task(8, s);
  const Vector w = random_model(t, 3, 0.1);
  const Vector full = local_full_gradient(w, t, 0);
  RandomStream rng(2, {purpose(StreamPurpose::kBatch)});
  std::vector<std::pair<double, double>> pts;
  for (int b : {1, 2, 4, 8, 16, 100}) {
    double acc = 0.0;
    const int reps = 4000;
    for (int r = 0; r < reps; ++r) acc += squared_distance(local_gradient(w, t, 0, sample_batch(rng, 400, b)), full);
    // Undo the finite-population factor (D - b) / (D - 1) of sampling without replacement.
    pts.emplace_back(b, acc / reps * 399.0 / (400.0 - b));
  }
  CHECK(analysis::scaling_exponent(pts) == doctest::Approx(-1.0).epsilon(0.05));
}

TEST_CASE("gradient variance matches direct summation") {
  TaskShape s = small_shape();
  s.noise_scale = 0.0;
  s.num_devices = 2;
  s.num_classes = 2;
  const auto t = build_task(9, s);
  const Vector w = random_model(t, 4, 0.5);
  // Noise-free shards of a single class hold identical samples.
  CHECK(local_gradient_variance(w, t, 0) < 1e-20);

  const auto u = build_task(10, small_shape());
  const Vector v = random_model(u, 5, 0.5);
  const Vector mean = local_full_gradient(v, u, 3);
  double direct = 0.0;
  for (int pos = 0; pos < 50; ++pos) direct += squared_distance(local_gradient(v, u, 3, std::vector<int>{pos}), mean);
  CHECK(local_gradient_variance(v, u, 3) == doctest::Approx(direct / 50.0).epsilon(1e-12));
}

TEST_CASE("smoothness bound dominates observed curvature") {
  const auto t = build_task(11, small_shape());
  const double mu = smoothness_upper_bound(t);
  CHECK(mu > 0.0);
  for (std::uint64_t i = 0; i < 20; ++i) {
    const Vector u = random_model(t, 300 + i, 0.5);
    const Vector v = random_model(t, 400 + i, 0.5);
    const double ratio =
        std::sqrt(squared_distance(full_gradient(u, t), full_gradient(v, t)) / squared_distance(u, v));
    CHECK(ratio <= mu * (1.0 + 1e-12));
  }
}

TEST_CASE("test accuracy") {
  TaskShape s = small_shape();
  s.class_separation = 5.0;
  const auto t = build_task(12, s);
  const Vector zero(static_cast<std::size_t>(t.model_dim()), 0.0);
  // All logits tie at zero: argmax picks class 0, a quarter of the balanced test set.
  CHECK(test_accuracy(zero, t) == doctest::Approx(0.25));
  const auto path = gradient_descent_trajectory(t, 1.0 / smoothness_upper_bound(t), 300);
  CHECK(test_accuracy(path.back(), t) > 0.9);
}
