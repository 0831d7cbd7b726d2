#include "refinery/eval.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "refinery/parallel.hpp"

namespace refinery {

Metric metric_from_name(const std::string& name) {
  if (name == "accuracy" || name == "acc") return Metric::accuracy;
  if (name == "map" || name == "mAP") return Metric::mean_ap;
  throw Error(ErrorKind::config, "unknown metric '" + name + "'");
}

std::string metric_name(Metric m) {
  return m == Metric::accuracy ? "accuracy" : "map";
}

double accuracy(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size() || pred.empty()) {
    throw Error(ErrorKind::dimension, "accuracy: length mismatch or empty");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == truth[i]) ++hits;
  }
  return double(hits) / double(pred.size());
}

double average_precision(std::span<const double> scores,
                         std::span<const char> relevant) {
  if (scores.size() != relevant.size() || scores.empty()) {
    throw Error(ErrorKind::dimension, "AP: length mismatch or empty");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t(0));
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  double ap = 0.0;
  double found = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (relevant[order[rank]]) {
      found += 1.0;
      ap += found / double(rank + 1);
    }
  }
  if (found == 0.0) {
    throw Error(ErrorKind::infeasible, "AP: no relevant items");
  }
  return ap / found;
}

double mean_ap(const std::vector<std::vector<double>>& per_class_scores,
               const std::vector<std::vector<char>>& per_class_relevance) {
  if (per_class_scores.size() != per_class_relevance.size()) {
    throw Error(ErrorKind::dimension, "mAP: class count mismatch");
  }
  double sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < per_class_scores.size(); ++c) {
    const auto& rel = per_class_relevance[c];
    const bool any =
        std::any_of(rel.begin(), rel.end(), [](char r) { return r != 0; });
    if (!any) continue;
    sum += average_precision(per_class_scores[c], rel);
    ++counted;
  }
  if (counted == 0) {
    throw Error(ErrorKind::infeasible, "mAP: no class has relevant items");
  }
  return sum / double(counted);
}

namespace {

double score_task(const Extractor& extractor, const TargetTask& task,
                  const LinearTrainOptions& probe) {
  const FeatureMatrix train_x = extractor(task.train.features);
  const FeatureMatrix test_x = extractor(task.test.features);

  if (task.metric == Metric::accuracy) {
    LabeledDataset train = task.train;
    train.features = train_x;
    const OvaModel ova = train_ova(train, probe);
    return accuracy(predict_ova(ova, test_x), task.test.labels);
  }

  // mAP: one binary probe per class over binary relevance.
  const int classes = task.train.class_count;
  auto relevant = [&](const LabeledDataset& d,
                      const std::vector<std::vector<int>>& sets,
                      std::size_t sample, int c) -> bool {
    if (task.multilabel) {
      const auto& set = sets[sample];
      return std::find(set.begin(), set.end(), c) != set.end();
    }
    return d.labels[sample] == c;
  };

  std::vector<std::vector<double>> per_class_scores(classes);
  std::vector<std::vector<char>> per_class_rel(classes);
  for (int c = 0; c < classes; ++c) {
    std::vector<std::size_t> pos_rows, neg_rows;
    for (std::size_t i = 0; i < train_x.n_samples; ++i) {
      (relevant(task.train, task.train_label_sets, i, c) ? pos_rows
                                                         : neg_rows)
          .push_back(i);
    }
    if (pos_rows.empty() || neg_rows.empty()) continue;  // degenerate class
    const BinaryLinearModel model = train_binary(
        gather_rows(train_x, pos_rows), gather_rows(train_x, neg_rows), probe);
    per_class_scores[c] = score(model, test_x);
    per_class_rel[c].resize(test_x.n_samples, 0);
    for (std::size_t i = 0; i < test_x.n_samples; ++i) {
      per_class_rel[c][i] =
          relevant(task.test, task.test_label_sets, i, c) ? 1 : 0;
    }
  }
  return mean_ap(per_class_scores, per_class_rel);
}

}  // namespace

EvalReport evaluate_representation(const Extractor& extractor,
                                   const std::string& name,
                                   const std::vector<TargetTask>& tasks,
                                   const LinearTrainOptions& probe) {
  if (tasks.empty()) {
    throw Error(ErrorKind::infeasible, "evaluate: no target tasks");
  }
  EvalReport report;
  report.representation = name;
  report.task_scores.resize(tasks.size());
  std::vector<double> scores(tasks.size(), 0.0);
  parallel_for(tasks.size(), [&](std::size_t t) {
    scores[t] = score_task(extractor, tasks[t], probe);
  });
  double sum = 0.0;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    report.task_scores[t] = {tasks[t].name, scores[t]};
    sum += scores[t];
  }
  report.average = sum / double(tasks.size());
  return report;
}

void write_sweep_csv(std::span<const SweepRow> rows,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path.string());
  out << "k,finet_avg,spefinet_avg\n";
  char buf[128];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g\n", row.k, row.finet_avg,
                  row.spefinet_avg);
    out << buf;
  }
}

}  // namespace refinery
