#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "helpers.hpp"
#include "refinery/eval.hpp"
#include "refinery/probe.hpp"
#include "refinery/rng.hpp"

using namespace refinery;

namespace {

// Independent AP oracle: precision computed at every rank by explicit
// counting, averaged over the ranks of relevant items.
double ap_oracle(std::span<const double> scores,
                 std::span<const char> relevant) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t(0));
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  double sum = 0.0;
  double total_relevant = 0.0;
  for (std::size_t rank = 1; rank <= order.size(); ++rank) {
    std::size_t hits = 0;
    for (std::size_t r = 0; r < rank; ++r) {
      if (relevant[order[r]]) ++hits;
    }
    if (relevant[order[rank - 1]]) {
      sum += double(hits) / double(rank);
      total_relevant += 1.0;
    }
  }
  return sum / total_relevant;
}

TargetTask separable_task(Rng& rng) {
  TargetTask task;
  task.name = "separable";
  task.metric = Metric::accuracy;
  task.train = testutil::blobs({{0, 0}, {12, 0}, {0, 12}}, 10, 0.5, rng);
  task.test = testutil::blobs({{0, 0}, {12, 0}, {0, 12}}, 6, 0.5, rng);
  return task;
}

}  // namespace

TEST_CASE("accuracy counts exact matches") {
  const std::vector<int> truth{0, 1, 0, 0};
  CHECK(accuracy(truth, truth) == 1.0);
  const std::vector<int> wrong{1, 0, 1, 1};
  CHECK(accuracy(wrong, truth) == 0.0);
  const std::vector<int> pred{0, 1, 1, 0};
  CHECK(accuracy(pred, truth) == 0.75);
}

TEST_CASE("average precision reproduces the worked example exactly") {
  const std::vector<double> scores{0.9, 0.8, 0.7};
  const std::vector<char> rel{1, 0, 1};
  const double expected = (1.0 / 1.0 + 2.0 / 3.0) / 2.0;
  CHECK(std::abs(average_precision(scores, rel) - expected) < 1e-12);
}

TEST_CASE("average precision edge cases") {
  const std::vector<double> scores{0.3, 0.2, 0.9, 0.5};
  CHECK(average_precision(scores, std::vector<char>{1, 1, 1, 1}) == 1.0);
  CHECK(average_precision(scores, std::vector<char>{0, 1, 0, 0}) == 0.25);
  CHECK_THROWS_AS(average_precision(scores, std::vector<char>{0, 0, 0, 0}),
                  Error);
}

TEST_CASE("average precision equals the rank-counting oracle exactly") {
  Rng rng(5);
  for (int it = 0; it < 500; ++it) {
    const std::size_t n = 1 + rng.below(24);
    std::vector<double> scores(n);
    std::vector<char> rel(n, 0);
    for (auto& s : scores) {
      s = rng.below(4) == 0 ? 0.5 : rng.uniform();  // force some ties
    }
    bool any = false;
    for (auto& r : rel) {
      r = rng.below(3) == 0 ? 1 : 0;
      any = any || r;
    }
    if (!any) rel[rng.below(n)] = 1;
    REQUIRE(average_precision(scores, rel) == ap_oracle(scores, rel));
  }
}

TEST_CASE("AP and accuracy are permutation invariant") {
  Rng rng(7);
  std::vector<double> scores(12);
  std::vector<char> rel(12, 0);
  for (auto& s : scores) s = rng.uniform();
  for (std::size_t i = 0; i < 4; ++i) rel[i] = 1;
  const double base = average_precision(scores, rel);

  std::vector<std::size_t> perm(12);
  std::iota(perm.begin(), perm.end(), std::size_t(0));
  for (int it = 0; it < 10; ++it) {
    rng.shuffle(perm);
    std::vector<double> ps(12);
    std::vector<char> pr(12);
    for (std::size_t i = 0; i < 12; ++i) {
      ps[i] = scores[perm[i]];
      pr[i] = rel[perm[i]];
    }
    // ties break by index, so only tie-free inputs are exactly invariant
    CHECK(average_precision(ps, pr) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("mean AP averages classes with relevant items") {
  // two classes with hand-computable APs 1.0 and 0.5
  std::vector<std::vector<double>> scores{{0.9, 0.1}, {0.9, 0.1}};
  std::vector<std::vector<char>> rel{{1, 0}, {0, 1}};
  CHECK(mean_ap(scores, rel) == doctest::Approx((1.0 + 0.5) / 2.0));

  std::vector<std::vector<double>> one_cls{{0.3, 0.8, 0.1}};
  std::vector<std::vector<char>> one_rel{{1, 0, 0}};
  CHECK(mean_ap(one_cls, one_rel) ==
        doctest::Approx(average_precision(one_cls[0], one_rel[0])));

  // classes without relevant items are skipped
  std::vector<std::vector<double>> skip{{0.9, 0.1}, {0.5, 0.5}};
  std::vector<std::vector<char>> skip_rel{{1, 0}, {0, 0}};
  CHECK(mean_ap(skip, skip_rel) == 1.0);
}

TEST_CASE("identity extractor solves a separable task") {
  Rng rng(9);
  const std::vector<TargetTask> tasks{separable_task(rng)};
  const Extractor identity = [](const FeatureMatrix& x) { return x; };
  const EvalReport report = evaluate_representation(identity, "id", tasks);
  CHECK(report.average == 1.0);
}

TEST_CASE("identical tasks score identically and set the average") {
  Rng rng(11);
  TargetTask task = separable_task(rng);
  TargetTask twin = task;
  twin.name = "separable-2";
  const Extractor identity = [](const FeatureMatrix& x) { return x; };
  const EvalReport report =
      evaluate_representation(identity, "id", {task, twin});
  CHECK(report.task_scores[0].second == report.task_scores[1].second);
  CHECK(report.average == report.task_scores[0].second);
}

TEST_CASE("evaluation leaves the extractor parameters untouched") {
  Rng rng(13);
  LabeledDataset d = testutil::blobs({{0, 0}, {8, 0}}, 20, 0.6, rng);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.seed = 5;
  const ProbeModel probe = train_probe(d, 8, cfg);
  const std::vector<double> w1_before = probe.w1;
  const std::vector<double> w2_before = probe.w2;

  TargetTask task = separable_task(rng);
  const Extractor ex = [&probe](const FeatureMatrix& x) {
    return extract_features(probe, x);
  };
  evaluate_representation(ex, "probe", {task});
  CHECK(probe.w1 == w1_before);
  CHECK(probe.w2 == w2_before);
}

TEST_CASE("report average equals the mean of task scores") {
  Rng rng(15);
  std::vector<TargetTask> tasks;
  for (int t = 0; t < 3; ++t) {
    TargetTask task = separable_task(rng);
    task.name = "t" + std::to_string(t);
    tasks.push_back(std::move(task));
  }
  const Extractor identity = [](const FeatureMatrix& x) { return x; };
  const EvalReport report = evaluate_representation(identity, "id", tasks);
  double mean = 0.0;
  for (const auto& [name, s] : report.task_scores) mean += s;
  mean /= double(report.task_scores.size());
  CHECK(std::abs(report.average - mean) < 1e-12);
}

TEST_CASE("multilabel mAP tasks run one probe per class") {
  Rng rng(17);
  TargetTask task;
  task.name = "ml";
  task.metric = Metric::mean_ap;
  task.multilabel = true;
  // two separable concepts; some samples carry both labels
  task.train = testutil::blobs({{0, 0}, {10, 0}, {5, 8}}, 12, 0.5, rng);
  task.test = testutil::blobs({{0, 0}, {10, 0}, {5, 8}}, 6, 0.5, rng);
  task.train.class_count = task.test.class_count = 2;
  auto sets_for = [](const LabeledDataset& d) {
    std::vector<std::vector<int>> sets(d.labels.size());
    for (std::size_t i = 0; i < d.labels.size(); ++i) {
      if (d.labels[i] == 0) sets[i] = {0};
      if (d.labels[i] == 1) sets[i] = {1};
      if (d.labels[i] == 2) sets[i] = {0, 1};  // both concepts present
    }
    return sets;
  };
  task.train_label_sets = sets_for(task.train);
  task.test_label_sets = sets_for(task.test);

  const Extractor identity = [](const FeatureMatrix& x) { return x; };
  const EvalReport report = evaluate_representation(identity, "id", {task});
  CHECK(report.average > 0.9);
}
