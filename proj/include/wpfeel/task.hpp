#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace wpfeel::mc {

using Vector = std::vector<double>;

/// Gaussian-mixture classification data split across devices by sorted label
/// blocks, trained with multinomial logistic regression (softmax cross-entropy).
/// The model is laid out as a row-major (classes x features) weight matrix
/// followed by one bias per class.
struct SyntheticTask {
  int feature_dim = 0;
  int num_classes = 0;
  int num_devices = 0;
  int samples_per_device = 0;
  double noise_scale = 0.0;
  std::vector<Vector> class_means;
  Vector train_features;             // (K*D) x feature_dim
  std::vector<int> train_labels;
  std::vector<std::vector<int>> shards;  // per device: indices into the training set
  Vector test_features;
  std::vector<int> test_labels;

  int model_dim() const { return feature_dim * num_classes + num_classes; }
  std::size_t train_size() const { return train_labels.size(); }
};

struct TaskShape {
  int num_devices = 30;
  int samples_per_device = 100;
  int feature_dim = 20;
  int num_classes = 10;
  double noise_scale = 1.0;
  double class_separation = 1.0;
  int test_size = 1000;
};

SyntheticTask build_task(std::uint64_t seed, const TaskShape& shape);

/// Loss of one training sample.
double sample_loss(const Vector& model, const SyntheticTask& task, int sample);
/// Adds scale * grad l_j(model) into `out`.
void accumulate_sample_gradient(const Vector& model, const SyntheticTask& task, int sample, double scale,
                                Vector& out);

/// Mean of per-sample gradients over the given shard positions (0..D-1), in order.
Vector local_gradient(const Vector& model, const SyntheticTask& task, int device,
                      std::span<const int> batch_positions);
/// Gradient of the device's full local loss.
Vector local_full_gradient(const Vector& model, const SyntheticTask& task, int device);
/// Element-wise mean of the given vectors, summed in the given order.
Vector average(std::span<const Vector> vectors);
/// Gradient of the global loss, (1/K) sum_k grad F_k.
Vector full_gradient(const Vector& model, const SyntheticTask& task);

double local_loss(const Vector& model, const SyntheticTask& task, int device);
double global_loss(const Vector& model, const SyntheticTask& task);
double test_accuracy(const Vector& model, const SyntheticTask& task);

/// tr(Omega_k): single-sample gradient variance of the device at `model`.
double local_gradient_variance(const Vector& model, const SyntheticTask& task, int device);
/// Largest per-sample squared gradient norm on the device.
double max_sample_gradient_norm_sq(const Vector& model, const SyntheticTask& task, int device);

/// Global smoothness bound (1/2) lambda_max(mean of [x;1][x;1]^T), valid for
/// softmax cross-entropy at every model.
double smoothness_upper_bound(const SyntheticTask& task);

double squared_norm(std::span<const double> v);
double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace wpfeel::mc
