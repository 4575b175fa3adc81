#include "wpfeel/task.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "wpfeel/rng.hpp"

namespace wpfeel::mc {

namespace {

void draw_sample(RandomStream& rng, const std::vector<Vector>& means, int label, double noise, double* out) {
  const auto& mu = means[static_cast<std::size_t>(label)];
  for (std::size_t j = 0; j < mu.size(); ++j) out[j] = mu[j] + noise * rng.normal();
}

const double* features_of(const SyntheticTask& task, int sample) {
  return task.train_features.data() + static_cast<std::size_t>(sample) * task.feature_dim;
}

// Softmax probabilities of one input; returns log-sum-exp of the logits.
double softmax(const Vector& model, const SyntheticTask& task, const double* x, double* p) {
  const int d = task.feature_dim;
  const int c = task.num_classes;
  const double* bias = model.data() + static_cast<std::size_t>(c) * d;
  double zmax = -INFINITY;
  for (int i = 0; i < c; ++i) {
    const double* row = model.data() + static_cast<std::size_t>(i) * d;
    double z = bias[i];
    for (int j = 0; j < d; ++j) z += row[j] * x[j];
    p[i] = z;
    zmax = std::max(zmax, z);
  }
  double sum = 0.0;
  for (int i = 0; i < c; ++i) {
    p[i] = std::exp(p[i] - zmax);
    sum += p[i];
  }
  for (int i = 0; i < c; ++i) p[i] /= sum;
  return zmax + std::log(sum);
}

void check_model(const Vector& model, const SyntheticTask& task) {
  if (model.size() != static_cast<std::size_t>(task.model_dim()))
    throw std::invalid_argument("model dimension does not match the task");
}

}  // namespace

SyntheticTask build_task(std::uint64_t seed, const TaskShape& shape) {
  if (shape.num_classes < 2) throw std::invalid_argument("need at least two classes");
  if (shape.num_devices < 1 || shape.samples_per_device < 1 || shape.feature_dim < 1 || shape.test_size < 0)
    throw std::invalid_argument("task shape must be positive");
  SyntheticTask t;
  t.feature_dim = shape.feature_dim;
  t.num_classes = shape.num_classes;
  t.num_devices = shape.num_devices;
  t.samples_per_device = shape.samples_per_device;
  t.noise_scale = shape.noise_scale;

  RandomStream mean_rng(seed, {purpose(StreamPurpose::kTaskData), 0});
  t.class_means.assign(shape.num_classes, Vector(shape.feature_dim));
  for (auto& mu : t.class_means)
    for (auto& v : mu) v = shape.class_separation * mean_rng.normal();

  // Labels are assigned in sorted order, so contiguous shards see few classes.
  const long n = static_cast<long>(shape.num_devices) * shape.samples_per_device;
  t.train_features.resize(static_cast<std::size_t>(n) * shape.feature_dim);
  t.train_labels.resize(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    const int label = static_cast<int>(i * shape.num_classes / n);
    t.train_labels[static_cast<std::size_t>(i)] = label;
    RandomStream rng(seed, {purpose(StreamPurpose::kTaskData), 1, static_cast<std::uint64_t>(i)});
    draw_sample(rng, t.class_means, label, shape.noise_scale,
                t.train_features.data() + static_cast<std::size_t>(i) * shape.feature_dim);
  }
  t.shards.resize(static_cast<std::size_t>(shape.num_devices));
  for (int k = 0; k < shape.num_devices; ++k) {
    auto& shard = t.shards[static_cast<std::size_t>(k)];
    shard.resize(static_cast<std::size_t>(shape.samples_per_device));
    std::iota(shard.begin(), shard.end(), k * shape.samples_per_device);
  }

  t.test_features.resize(static_cast<std::size_t>(shape.test_size) * shape.feature_dim);
  t.test_labels.resize(static_cast<std::size_t>(shape.test_size));
  for (int i = 0; i < shape.test_size; ++i) {
    const int label = i % shape.num_classes;
    t.test_labels[static_cast<std::size_t>(i)] = label;
    RandomStream rng(seed, {purpose(StreamPurpose::kTaskData), 2, static_cast<std::uint64_t>(i)});
    draw_sample(rng, t.class_means, label, shape.noise_scale,
                t.test_features.data() + static_cast<std::size_t>(i) * shape.feature_dim);
  }
  return t;
}

double sample_loss(const Vector& model, const SyntheticTask& task, int sample) {
  std::vector<double> p(static_cast<std::size_t>(task.num_classes));
  const double* x = features_of(task, sample);
  const double lse = softmax(model, task, x, p.data());
  const int y = task.train_labels[static_cast<std::size_t>(sample)];
  const double* row = model.data() + static_cast<std::size_t>(y) * task.feature_dim;
  double z = model[static_cast<std::size_t>(task.num_classes) * task.feature_dim + y];
  for (int j = 0; j < task.feature_dim; ++j) z += row[j] * x[j];
  return lse - z;
}

void accumulate_sample_gradient(const Vector& model, const SyntheticTask& task, int sample, double scale,
                                Vector& out) {
  const int d = task.feature_dim;
  const int c = task.num_classes;
  double p[64];
  std::vector<double> heap;
  double* pp = p;
  if (c > 64) {
    heap.resize(static_cast<std::size_t>(c));
    pp = heap.data();
  }
  const double* x = features_of(task, sample);
  softmax(model, task, x, pp);
  pp[task.train_labels[static_cast<std::size_t>(sample)]] -= 1.0;
  for (int i = 0; i < c; ++i) {
    const double r = scale * pp[i];
    double* row = out.data() + static_cast<std::size_t>(i) * d;
    for (int j = 0; j < d; ++j) row[j] += r * x[j];
    out[static_cast<std::size_t>(c) * d + i] += r;
  }
}

Vector local_gradient(const Vector& model, const SyntheticTask& task, int device,
                      std::span<const int> batch_positions) {
  check_model(model, task);
  if (batch_positions.empty()) throw std::invalid_argument("mini-batch must be nonempty");
  const auto& shard = task.shards.at(static_cast<std::size_t>(device));
  Vector g(model.size(), 0.0);
  for (int pos : batch_positions) {
    if (pos < 0 || static_cast<std::size_t>(pos) >= shard.size())
      throw std::out_of_range("batch position outside the device shard");
    accumulate_sample_gradient(model, task, shard[static_cast<std::size_t>(pos)], 1.0, g);
  }
  const double b = static_cast<double>(batch_positions.size());
  for (auto& v : g) v /= b;
  return g;
}

Vector local_full_gradient(const Vector& model, const SyntheticTask& task, int device) {
  std::vector<int> all(task.shards.at(static_cast<std::size_t>(device)).size());
  std::iota(all.begin(), all.end(), 0);
  return local_gradient(model, task, device, all);
}

Vector average(std::span<const Vector> vectors) {
  if (vectors.empty()) throw std::invalid_argument("cannot average an empty set");
  Vector out(vectors.front().size(), 0.0);
  for (const auto& v : vectors)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
  const double n = static_cast<double>(vectors.size());
  for (auto& v : out) v /= n;
  return out;
}

Vector full_gradient(const Vector& model, const SyntheticTask& task) {
  std::vector<Vector> parts;
  parts.reserve(static_cast<std::size_t>(task.num_devices));
  for (int k = 0; k < task.num_devices; ++k) parts.push_back(local_full_gradient(model, task, k));
  return average(parts);
}

double local_loss(const Vector& model, const SyntheticTask& task, int device) {
  check_model(model, task);
  const auto& shard = task.shards.at(static_cast<std::size_t>(device));
  double s = 0.0;
  for (int idx : shard) s += sample_loss(model, task, idx);
  return s / static_cast<double>(shard.size());
}

double global_loss(const Vector& model, const SyntheticTask& task) {
  double s = 0.0;
  for (int k = 0; k < task.num_devices; ++k) s += local_loss(model, task, k);
  return s / task.num_devices;
}

double test_accuracy(const Vector& model, const SyntheticTask& task) {
  check_model(model, task);
  if (task.test_labels.empty()) return 0.0;
  std::vector<double> p(static_cast<std::size_t>(task.num_classes));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < task.test_labels.size(); ++i) {
    softmax(model, task, task.test_features.data() + i * task.feature_dim, p.data());
    const auto best = std::max_element(p.begin(), p.end()) - p.begin();
    if (best == task.test_labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(task.test_labels.size());
}

double local_gradient_variance(const Vector& model, const SyntheticTask& task, int device) {
  const Vector mean = local_full_gradient(model, task, device);
  const auto& shard = task.shards.at(static_cast<std::size_t>(device));
  Vector g(model.size());
  double s = 0.0;
  for (int idx : shard) {
    std::fill(g.begin(), g.end(), 0.0);
    accumulate_sample_gradient(model, task, idx, 1.0, g);
    s += squared_distance(g, mean);
  }
  return s / static_cast<double>(shard.size());
}

double max_sample_gradient_norm_sq(const Vector& model, const SyntheticTask& task, int device) {
  check_model(model, task);
  const auto& shard = task.shards.at(static_cast<std::size_t>(device));
  Vector g(model.size());
  double best = 0.0;
  for (int idx : shard) {
    std::fill(g.begin(), g.end(), 0.0);
    accumulate_sample_gradient(model, task, idx, 1.0, g);
    best = std::max(best, squared_norm(g));
  }
  return best;
}

double smoothness_upper_bound(const SyntheticTask& task) {
  const int d = task.feature_dim;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d + 1, d + 1);
  Eigen::VectorXd x(d + 1);
  const std::size_t n = task.train_size();
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x[j] = task.train_features[i * d + j];
    x[d] = 1.0;
    a.selfadjointView<Eigen::Lower>().rankUpdate(x);
  }
  a /= static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a, Eigen::EigenvaluesOnly);
  return 0.5 * eig.eigenvalues().maxCoeff();
}

double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace wpfeel::mc
