#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "refinery/linear.hpp"
#include "refinery/probe.hpp"
#include "refinery/rng.hpp"

using namespace refinery;
using testutil::TempDir;

namespace {

LabeledDataset two_blobs(Rng& rng) {
  return testutil::blobs({{0, 0}, {6, 6}}, 40, 0.6, rng);
}

double train_accuracy(const ProbeModel& m, const LabeledDataset& d) {
  const FeatureMatrix probs = predict_proba(m, d.features);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < probs.n_samples; ++i) {
    const auto row = probs.row(i);
    const auto arg = std::max_element(row.begin(), row.end()) - row.begin();
    if (int(arg) == d.labels[i]) ++hits;
  }
  return double(hits) / double(probs.n_samples);
}

}  // namespace

TEST_CASE("probe reaches 99% on linearly separable blobs") {
  Rng rng(1);
  const LabeledDataset d = two_blobs(rng);

  // Independent check that the construction is separable at all.
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < d.labels.size(); ++i) {
    (d.labels[i] == 1 ? pos : neg).push_back(i);
  }
  const BinaryLinearModel oracle = train_binary(
      gather_rows(d.features, pos), gather_rows(d.features, neg), {});
  std::size_t oracle_hits = 0;
  const auto s = score(oracle, d.features);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((s[i] > 0.5) == (d.labels[i] == 1)) ++oracle_hits;
  }
  REQUIRE(double(oracle_hits) / double(s.size()) >= 0.99);

  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.seed = 3;
  const ProbeModel m = train_probe(d, 8, cfg);
  CHECK(train_accuracy(m, d) >= 0.99);
}

TEST_CASE("zero learning rate leaves the parameters unchanged") {
  Rng rng(2);
  const LabeledDataset d = two_blobs(rng);
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 5;
  const ProbeModel init = train_probe(d, 8, cfg);
  cfg.epochs = 10;
  cfg.learning_rate = 0.0;
  const ProbeModel trained = train_probe(d, 8, cfg);
  CHECK(trained.w1 == init.w1);
  CHECK(trained.b1 == init.b1);
  CHECK(trained.w2 == init.w2);
  CHECK(trained.b2 == init.b2);
}

TEST_CASE("same seed trains bitwise-identical models") {
  Rng rng(4);
  const LabeledDataset d = two_blobs(rng);
  TrainConfig cfg;
  cfg.epochs = 12;
  cfg.seed = 99;
  const ProbeModel a = train_probe(d, 16, cfg);
  const ProbeModel b = train_probe(d, 16, cfg);
  CHECK(a.w1 == b.w1);
  CHECK(a.b1 == b.b1);
  CHECK(a.w2 == b.w2);
  CHECK(a.b2 == b.b2);
}

TEST_CASE("extraction edge cases") {
  ProbeModel m;
  m.input_dim = 3;
  m.hidden_dim = 3;
  m.class_count = 2;
  m.w1.assign(9, 0.0);
  m.b1.assign(3, 0.0);
  m.w2.assign(6, 0.1);
  m.b2.assign(2, 0.0);

  // zero input, zero bias -> zero hidden row
  FeatureMatrix zero(1, 3);
  const FeatureMatrix h0 = extract_features(m, zero);
  for (double v : h0.values) CHECK(v == 0.0);

  // identity W1, positive inputs -> identity mapping
  for (int i = 0; i < 3; ++i) m.w1[std::size_t(i) * 3 + i] = 1.0;
  const FeatureMatrix x = testutil::matrix_from(2, 3, {1, 2, 3, 4, 5, 6});
  const FeatureMatrix h = extract_features(m, x);
  CHECK(h.values == x.values);
  CHECK(h.dim == m.hidden_dim);

  // hidden values are never negative
  Rng rng(8);
  ProbeModel rand_model;
  rand_model.input_dim = 4;
  rand_model.hidden_dim = 6;
  rand_model.class_count = 2;
  rand_model.w1.resize(24);
  rand_model.b1.resize(6);
  rand_model.w2.resize(12);
  rand_model.b2.resize(2);
  for (auto& v : rand_model.w1) v = rng.normal();
  for (auto& v : rand_model.b1) v = rng.normal();
  const FeatureMatrix y = testutil::random_matrix(10, 4, rng);
  for (double v : extract_features(rand_model, y).values) CHECK(v >= 0.0);

  FeatureMatrix wrong(1, 2);
  CHECK_THROWS_AS(extract_features(m, wrong), Error);
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(10);
  const LabeledDataset d = testutil::blobs({{0, 0}, {4, 0}, {0, 4}}, 10, 1.0, rng);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 1;
  const ProbeModel m = train_probe(d, 8, cfg);
  const FeatureMatrix probs = predict_proba(m, d.features);
  for (std::size_t i = 0; i < probs.n_samples; ++i) {
    double sum = 0.0;
    for (double v : probs.row(i)) sum += v;
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("gradient check passes on random instances") {
  Rng rng(12);
  double worst = 0.0;
  for (int it = 0; it < 20; ++it) {
    const std::size_t dim = 2 + rng.below(4);
    const std::size_t hidden = 2 + rng.below(5);
    const std::size_t classes = 2 + rng.below(3);
    LabeledDataset d;
    d.features = testutil::random_matrix(6, dim, rng);
    d.class_count = int(classes);
    d.labels.resize(6);
    for (std::size_t i = 0; i < 6; ++i) {
      d.labels[i] = i < classes ? int(i) : int(rng.below(classes));
    }
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.seed = 7 + std::uint64_t(it);
    const ProbeModel m = train_probe(d, hidden, cfg);
    worst = std::max(worst, gradient_check(m, d.features, d.labels,
                                           1000 + std::uint64_t(it)));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("gradient check works on a single-sample batch") {
  Rng rng(14);
  LabeledDataset d;
  d.features = testutil::random_matrix(4, 3, rng);
  d.labels = {0, 1, 0, 1};
  d.class_count = 2;
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.seed = 2;
  const ProbeModel m = train_probe(d, 4, cfg);
  FeatureMatrix one = gather_rows(d.features, std::vector<std::size_t>{1});
  const int label[] = {1};
  CHECK(gradient_check(m, one, {label, 1}, 5) < 1e-4);
}

TEST_CASE("dropping the ReLU mask is caught by finite differences") {
  // Negative control: a backward pass that ignores the ReLU derivative is
  // checked against central differences of the real loss.
  Rng rng(16);
  LabeledDataset d;
  d.features = testutil::random_matrix(6, 3, rng);
  d.labels = {0, 1, 0, 1, 1, 0};
  d.class_count = 2;
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.seed = 4;
  ProbeModel m = train_probe(d, 5, cfg);

  // Faulty analytic gradient for w1: no hidden mask.
  const double wd = 1e-4;
  std::vector<double> faulty(m.w1.size(), 0.0);
  const std::size_t n = d.features.n_samples;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> hidden(m.hidden_dim, 0.0), pre(m.hidden_dim, 0.0);
    for (std::size_t hch = 0; hch < m.hidden_dim; ++hch) {
      double v = m.b1[hch];
      for (std::size_t j = 0; j < m.input_dim; ++j) {
        v += d.features.at(i, j) * m.w1[j * m.hidden_dim + hch];
      }
      pre[hch] = v;
      hidden[hch] = std::max(0.0, v);
    }
    std::vector<double> logits(m.class_count, 0.0);
    for (std::size_t c = 0; c < m.class_count; ++c) {
      double v = m.b2[c];
      for (std::size_t hch = 0; hch < m.hidden_dim; ++hch) {
        v += hidden[hch] * m.w2[hch * m.class_count + c];
      }
      logits[c] = v;
    }
    double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (auto& v : logits) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (auto& v : logits) v /= sum;
    logits[std::size_t(d.labels[i])] -= 1.0;
    for (std::size_t hch = 0; hch < m.hidden_dim; ++hch) {
      double dh = 0.0;
      for (std::size_t c = 0; c < m.class_count; ++c) {
        dh += m.w2[hch * m.class_count + c] * logits[c];
      }
      // fault: no `pre > 0` gate here
      for (std::size_t j = 0; j < m.input_dim; ++j) {
        faulty[j * m.hidden_dim + hch] +=
            d.features.at(i, j) * dh / double(n);
      }
    }
  }
  for (std::size_t i = 0; i < m.w1.size(); ++i) faulty[i] += wd * m.w1[i];

  // Compare the faulty gradient with central differences of probe_loss.
  double worst = 0.0;
  const double eps = 1e-5;
  for (std::size_t i = 0; i < m.w1.size(); ++i) {
    const double saved = m.w1[i];
    m.w1[i] = saved + eps;
    const double up = probe_loss(m, d.features, d.labels, wd);
    m.w1[i] = saved - eps;
    const double down = probe_loss(m, d.features, d.labels, wd);
    m.w1[i] = saved;
    const double numeric = (up - down) / (2 * eps);
    const double rel = std::abs(faulty[i] - numeric) /
                       std::max(1e-8, std::abs(faulty[i]) + std::abs(numeric));
    worst = std::max(worst, rel);
  }
  CHECK(worst > 1e-2);
}

TEST_CASE("loss trajectory: final below initial, mostly non-increasing") {
  Rng rng(18);
  const LabeledDataset d =
      testutil::blobs({{0, 0}, {5, 0}, {0, 5}, {5, 5}}, 30, 0.8, rng);
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.seed = 11;
  std::vector<double> losses;
  train_probe(d, 16, cfg, &losses);
  REQUIRE(losses.size() == 40);
  CHECK(losses.back() < losses.front());
  int non_increasing = 0;
  for (std::size_t e = 1; e < losses.size(); ++e) {
    if (losses[e] <= losses[e - 1] + 1e-12) ++non_increasing;
  }
  CHECK(double(non_increasing) / double(losses.size() - 1) >= 0.9);
}

TEST_CASE("divergence is reported with the epoch") {
  Rng rng(20);
  const LabeledDataset d = two_blobs(rng);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.learning_rate = 1e9;
  cfg.seed = 1;
  try {
    train_probe(d, 8, cfg);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::divergence);
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}

TEST_CASE("extraction is pure and checkpoints round-trip") {
  Rng rng(22);
  const LabeledDataset d = two_blobs(rng);
  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.seed = 13;
  const ProbeModel m = train_probe(d, 8, cfg);
  const FeatureMatrix a = extract_features(m, d.features);
  const FeatureMatrix b = extract_features(m, d.features);
  CHECK(a.values == b.values);

  TempDir dir("probe");
  save_probe(m, dir.path() / "m.bin");
  const ProbeModel back = load_probe(dir.path() / "m.bin");
  CHECK(extract_features(back, d.features).values == a.values);
}

TEST_CASE("train_probe validates inputs") {
  Rng rng(24);
  LabeledDataset d = two_blobs(rng);
  TrainConfig cfg;
  CHECK_THROWS_AS(train_probe(d, 0, cfg), Error);
  d.class_count = 1;
  for (auto& y : d.labels) y = 0;
  CHECK_THROWS_AS(train_probe(d, 8, cfg), Error);
}
