#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "refinery/types.hpp"

namespace refinery {

enum class LossKind { logistic, hinge };

/// Binary linear classifier. Logistic models score with sigmoid(w.x + b)
/// (probabilities in (0,1)); hinge models score with the raw margin.
struct BinaryLinearModel {
  std::vector<double> w;
  double b = 0.0;
  LossKind loss_kind = LossKind::logistic;
  double l2 = 0.0;
};

struct LinearTrainOptions {
  LossKind loss = LossKind::logistic;
  double l2 = 1e-3;
  int iters = 500;
  double lr = 0.1;
};

/// Regularized objective over a +1/-1 labeled batch:
/// mean loss + 0.5 * l2 * |w|^2 (bias unregularized).
double linear_objective(std::span<const double> w, double b,
                        const FeatureMatrix& x, std::span<const int> y,
                        LossKind loss, double l2);

/// Analytic gradient of linear_objective; hinge uses the standard
/// subgradient (zero at the kink).
void linear_gradient(std::span<const double> w, double b,
                     const FeatureMatrix& x, std::span<const int> y,
                     LossKind loss, double l2, std::span<double> grad_w,
                     double& grad_b);

/// Deterministic full-batch gradient descent from w = 0. The step halves
/// whenever it would increase the objective, so the final objective never
/// exceeds the initial one.
BinaryLinearModel train_binary(const FeatureMatrix& positives,
                               const FeatureMatrix& negatives,
                               const LinearTrainOptions& opt = {});

std::vector<double> score(const BinaryLinearModel& m, const FeatureMatrix& f);

struct OvaModel {
  std::vector<BinaryLinearModel> models;
  int class_count = 0;
};

/// One-vs-all: class c positives against all other samples.
OvaModel train_ova(const LabeledDataset& d, const LinearTrainOptions& opt = {});

std::vector<int> predict_ova(const OvaModel& m, const FeatureMatrix& f);

/// Index of the pool row closest to `query` (Euclidean); ties break toward
/// the lowest index.
std::size_t nearest_neighbor(std::span<const double> query,
                             const FeatureMatrix& pool);

void save_linear_model(const BinaryLinearModel& m,
                       const std::filesystem::path& path);
BinaryLinearModel load_linear_model(const std::filesystem::path& path);

}  // namespace refinery
