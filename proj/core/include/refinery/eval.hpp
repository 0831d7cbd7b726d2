#pragma once

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "refinery/linear.hpp"
#include "refinery/types.hpp"

namespace refinery {

enum class Metric { accuracy, mean_ap };

Metric metric_from_name(const std::string& name);
std::string metric_name(Metric m);

struct TargetTask {
  std::string name;
  LabeledDataset train;
  LabeledDataset test;
  Metric metric = Metric::accuracy;
  bool multilabel = false;
  // Per-sample label sets, only used when multilabel is true.
  std::vector<std::vector<int>> train_label_sets;
  std::vector<std::vector<int>> test_label_sets;
};

struct EvalReport {
  std::string representation;
  std::vector<std::pair<std::string, double>> task_scores;
  double average = 0.0;
  std::string config_echo;
};

/// Fraction of exact matches.
double accuracy(std::span<const int> pred, std::span<const int> truth);

/// Non-interpolated average precision: items sorted by descending score
/// (ties by lower index first); AP is the mean over relevant ranks r of
/// (relevant in top-r) / r. Throws Error(infeasible) with zero relevant.
double average_precision(std::span<const double> scores,
                         std::span<const char> relevant);

/// Unweighted mean AP over classes that have at least one relevant item.
double mean_ap(const std::vector<std::vector<double>>& per_class_scores,
               const std::vector<std::vector<char>>& per_class_relevance);

/// A frozen feature map applied to raw task features.
using Extractor = std::function<FeatureMatrix(const FeatureMatrix&)>;

/// Linear probes on frozen features: per task, extract train/test features,
/// fit one-vs-all probes on train, compute the task metric on test. The
/// extractor is never modified.
EvalReport evaluate_representation(const Extractor& extractor,
                                   const std::string& name,
                                   const std::vector<TargetTask>& tasks,
                                   const LinearTrainOptions& probe = {
                                       LossKind::hinge, 1e-3, 3000, 0.5});

struct SweepRow {
  int k = 0;
  double finet_avg = 0.0;
  double spefinet_avg = 0.0;
};

void write_sweep_csv(std::span<const SweepRow> rows,
                     const std::filesystem::path& path);

}  // namespace refinery
