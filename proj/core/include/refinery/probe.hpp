#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "refinery/types.hpp"

namespace refinery {

/// One-hidden-layer ReLU network trained with softmax cross-entropy. The
/// hidden layer is the representation extractor.
struct ProbeModel {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t class_count = 0;
  std::vector<double> w1;  // input_dim x hidden_dim, row-major
  std::vector<double> b1;  // hidden_dim
  std::vector<double> w2;  // hidden_dim x class_count, row-major
  std::vector<double> b2;  // class_count
};

struct TrainConfig {
  int epochs = 60;
  int batch_size = 32;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& cfg);

/// SGD with classical momentum and L2 weight decay on the weights (biases
/// undecayed). Init is uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out));
/// each epoch shuffles with a stream derived from (seed, epoch), so results
/// are bitwise reproducible. Throws Error(divergence) naming the epoch if
/// the loss goes non-finite.
ProbeModel train_probe(const LabeledDataset& d, std::size_t hidden_dim,
                       const TrainConfig& cfg,
                       std::vector<double>* epoch_losses = nullptr);

/// Post-activation hidden values (n_samples x hidden_dim, all >= 0).
FeatureMatrix extract_features(const ProbeModel& m, const FeatureMatrix& f);

/// Softmax class probabilities (rows sum to 1).
FeatureMatrix predict_proba(const ProbeModel& m, const FeatureMatrix& f);

/// Mean cross-entropy over the batch plus 0.5 * weight_decay * |W|^2.
double probe_loss(const ProbeModel& m, const FeatureMatrix& x,
                  std::span<const int> y, double weight_decay);

struct ProbeGradient {
  std::vector<double> w1, b1, w2, b2;
};

ProbeGradient probe_gradient(const ProbeModel& m, const FeatureMatrix& x,
                             std::span<const int> y, double weight_decay,
                             double* loss_out = nullptr);

/// Max relative error between the analytic gradient and central finite
/// differences (eps = 1e-5) over a seeded sample of parameters:
/// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
double gradient_check(const ProbeModel& m, const FeatureMatrix& batch_x,
                      std::span<const int> batch_y, std::uint64_t seed,
                      int sampled_params = 200,
                      double weight_decay = 1e-4);

void save_probe(const ProbeModel& m, const std::filesystem::path& path);
ProbeModel load_probe(const std::filesystem::path& path);

}  // namespace refinery
