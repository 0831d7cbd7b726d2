#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "helpers.hpp"
#include "refinery/bucbam.hpp"
#include "refinery/hierarchy.hpp"
#include "refinery/rng.hpp"
#include "refinery/synth.hpp"

using namespace refinery;

namespace {

ClassView view_of(std::size_t n) {
  ClassView v;
  v.class_id = 0;
  v.sample_indices.resize(n);
  std::iota(v.sample_indices.begin(), v.sample_indices.end(), std::size_t(0));
  return v;
}

SimilarityMatrix matrix_of(int n, std::initializer_list<double> values) {
  SimilarityMatrix m;
  m.class_id = 0;
  m.size = n;
  m.m.assign(values);
  return m;
}

}  // namespace

TEST_CASE("pruning reattaches small-cluster samples to their 1-NN cluster") {
  // Three 1-d groups: 40 points near 0, 3 orphans, 20 points near 100. Two
  // orphans sit nearer the big left cluster, one nearer the right one.
  const std::size_t n = 63;
  FeatureMatrix feats(n, 1);
  std::vector<int> member(n);
  for (std::size_t i = 0; i < 40; ++i) {
    feats.at(i, 0) = double(i) * 0.01;
    member[i] = 0;
  }
  feats.at(40, 0) = 2.0;
  feats.at(41, 0) = 3.0;
  feats.at(42, 0) = 98.0;
  member[40] = member[41] = member[42] = 1;
  for (std::size_t i = 43; i < 63; ++i) {
    feats.at(i, 0) = 100.0 + double(i - 43) * 0.01;
    member[i] = 2;
  }
  const ClusterAssignment a = make_assignment(0, std::move(member), 3);
  REQUIRE(a.sizes == std::vector<std::size_t>{40, 3, 20});

  const ClusterAssignment pruned = prune_small_clusters(a, feats, 15);
  CHECK(pruned.k == 2);
  // exhaustive 1-NN over the 60 large-cluster samples
  for (std::size_t orphan : {std::size_t(40), std::size_t(41), std::size_t(42)}) {
    std::size_t nn = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (i >= 40 && i <= 42) continue;
      const double d = squared_distance(feats.row(orphan), feats.row(i));
      if (d < best) {
        best = d;
        nn = i;
      }
    }
    CHECK(pruned.member_of[orphan] == pruned.member_of[nn]);
  }
  CHECK(pruned.member_of[40] == 0);
  CHECK(pruned.member_of[41] == 0);
  CHECK(pruned.member_of[42] == 1);
}

TEST_CASE("pruning is the identity when every cluster is large") {
  Rng rng(3);
  const FeatureMatrix feats = testutil::random_matrix(40, 2, rng);
  std::vector<int> member(40);
  for (std::size_t i = 0; i < 40; ++i) member[i] = int(i % 2);
  const ClusterAssignment a = make_assignment(0, std::move(member), 2);
  const ClusterAssignment pruned = prune_small_clusters(a, feats, 15);
  CHECK(pruned.member_of == a.member_of);
  CHECK(pruned.k == 2);
}

TEST_CASE("a class too small to sustain S collapses to one cluster") {
  Rng rng(5);
  const FeatureMatrix feats = testutil::random_matrix(20, 2, rng);
  std::vector<int> member(20);
  for (std::size_t i = 0; i < 20; ++i) member[i] = int(i % 3);
  const ClusterAssignment a = make_assignment(0, std::move(member), 3);
  const ClusterAssignment pruned = prune_small_clusters(a, feats, 15);
  CHECK(pruned.k == 1);
  CHECK(pruned.sizes[0] == 20);
}

TEST_CASE("after pruning every cluster reaches S or the class collapsed") {
  Rng rng(7);
  for (int it = 0; it < 100; ++it) {
    const std::size_t n = 5 + rng.below(120);
    const int k = 1 + int(rng.below(std::min<std::uint64_t>(n, 12)));
    const FeatureMatrix feats = testutil::random_matrix(n, 3, rng, 2.0);
    std::vector<int> member(n);
    for (std::size_t i = 0; i < n; ++i) {
      member[i] = i < std::size_t(k) ? int(i) : int(rng.below(k));
    }
    const int s = 1 + int(rng.below(25));
    const ClusterAssignment pruned = prune_small_clusters(
        make_assignment(0, std::move(member), k), feats, s);
    if (pruned.k > 1) {
      for (std::size_t size : pruned.sizes) REQUIRE(size >= std::size_t(s));
    }
  }
}

TEST_CASE("diverse negatives are class-equiprobable") {
  // 2 classes, 100 vs 10 samples. 1000 single draws: each class expected
  // 500 +- 50 (3 sigma of Binomial(1000, 1/2)).
  LabeledDataset d;
  d.features = FeatureMatrix(110, 1);
  d.class_count = 2;
  d.labels.assign(100, 0);
  d.labels.insert(d.labels.end(), 10, 1);
  std::size_t from_small = 0;
  for (int it = 0; it < 1000; ++it) {
    const DiverseNegatives neg =
        sample_diverse_negatives(d, 1, {}, 9000 + std::uint64_t(it));
    REQUIRE(neg.samples.size() == 1);
    if (d.labels[neg.samples[0]] == 1) ++from_small;
  }
  CHECK(from_small >= 450);
  CHECK(from_small <= 550);
}

TEST_CASE("diverse negatives edge cases") {
  LabeledDataset d;
  d.features = FeatureMatrix(8, 1);
  d.class_count = 2;
  d.labels = {0, 0, 0, 0, 1, 1, 1, 1};

  CHECK(sample_diverse_negatives(d, 0, {}, 1).samples.empty());

  std::unordered_set<std::size_t> exclude{0, 1, 2};
  const DiverseNegatives all_rest = sample_diverse_negatives(d, 5, exclude, 1);
  std::vector<std::size_t> got = all_rest.samples;
  std::sort(got.begin(), got.end());
  CHECK(got == std::vector<std::size_t>{3, 4, 5, 6, 7});

  CHECK_THROWS_AS(sample_diverse_negatives(d, 6, exclude, 1), Error);

  // determinism
  CHECK(sample_diverse_negatives(d, 3, {}, 77).samples ==
        sample_diverse_negatives(d, 3, {}, 77).samples);
}

TEST_CASE("cluster classifiers score their own cluster high") {
  Rng rng(11);
  // one tight class at the origin, three diverse classes far away
  LabeledDataset d = testutil::blobs(
      {{0, 0, 0}, {15, 0, 0}, {0, 15, 0}, {0, 0, 15}}, 30, 0.8, rng);
  const auto views = class_views(d);
  FeatureMatrix feats = gather_rows(d.features, views[0].sample_indices);
  std::vector<int> member(30);
  for (std::size_t i = 0; i < 30; ++i) member[i] = int(i % 2);
  const ClusterAssignment pruned = make_assignment(0, std::move(member), 2);
  BucbamConfig cfg;
  cfg.seed = 13;
  const auto classifiers = train_cluster_classifiers(pruned, views[0], d, cfg);
  REQUIRE(classifiers.size() == 2);

  const SimilarityMatrix m = build_similarity_matrix(classifiers, pruned, feats);
  CHECK(m.at(0, 0) > 0.9);
  CHECK(m.at(1, 1) > 0.9);
  // both halves of the same blob look alike
  CHECK(m.at(0, 1) > 0.9);
  CHECK(m.at(1, 0) > 0.9);

  // own positives score above diverse negatives on average
  const DiverseNegatives neg = sample_diverse_negatives(
      d, 30, {views[0].sample_indices.begin(), views[0].sample_indices.end()},
      99);
  const auto pos_scores = score(classifiers[0], feats);
  const auto neg_scores =
      score(classifiers[0], gather_rows(d.features, neg.samples));
  const double pos_mean =
      std::accumulate(pos_scores.begin(), pos_scores.end(), 0.0) /
      double(pos_scores.size());
  const double neg_mean =
      std::accumulate(neg_scores.begin(), neg_scores.end(), 0.0) /
      double(neg_scores.size());
  CHECK(pos_mean > neg_mean);
}

TEST_CASE("duplicated clusters get symmetric near-one scores") {
  Rng rng(17);
  LabeledDataset d = testutil::blobs({{0, 0}, {20, 0}, {0, 20}}, 40, 1.0, rng);
  const auto views = class_views(d);
  FeatureMatrix feats = gather_rows(d.features, views[0].sample_indices);
  // duplicate the class features: clusters 0 and 1 hold identical data
  FeatureMatrix doubled(80, 2);
  std::copy(feats.values.begin(), feats.values.end(), doubled.values.begin());
  std::copy(feats.values.begin(), feats.values.end(),
            doubled.values.begin() + 80);
  std::vector<int> member(80, 0);
  std::fill(member.begin() + 40, member.end(), 1);
  const ClusterAssignment pruned = make_assignment(0, std::move(member), 2);

  // widen the dataset to supply diverse negatives for the doubled view
  LabeledDataset wide;
  wide.features = FeatureMatrix(80 + 80, 2);
  std::copy(doubled.values.begin(), doubled.values.end(),
            wide.features.values.begin());
  for (std::size_t i = 0; i < 80; ++i) {
    wide.features.at(80 + i, 0) = 20.0 + rng.normal();
    wide.features.at(80 + i, 1) = 20.0 + rng.normal();
  }
  wide.class_count = 2;
  wide.labels.assign(80, 0);
  wide.labels.insert(wide.labels.end(), 80, 1);

  ClassView view;
  view.class_id = 0;
  view.sample_indices.resize(80);
  std::iota(view.sample_indices.begin(), view.sample_indices.end(),
            std::size_t(0));
  BucbamConfig cfg;
  cfg.seed = 19;
  const auto classifiers = train_cluster_classifiers(pruned, view, wide, cfg);
  const SimilarityMatrix m =
      build_similarity_matrix(classifiers, pruned, doubled);
  CHECK(m.at(0, 1) > 0.9);
  CHECK(m.at(1, 0) > 0.9);
  CHECK(std::abs(m.at(0, 1) - m.at(0, 0)) < 0.05);

  // single cluster -> 1x1 matrix
  const ClusterAssignment solo = make_assignment(0, std::vector<int>(80, 0), 1);
  const auto solo_cls = train_cluster_classifiers(solo, view, wide, cfg);
  const SimilarityMatrix one = build_similarity_matrix(solo_cls, solo, doubled);
  CHECK(one.size == 1);
}

TEST_CASE("merge rules reproduce the worked examples") {
  const SimilarityMatrix m1 =
      matrix_of(3, {1, 0.9, 0.1, 0.95, 1, 0.05, 0.2, 0.1, 1});
  const MergePlan ss = merge_clusters(m1, MergeMode::SS, 0.8, 0.4);
  CHECK(ss.merged_count == 2);
  CHECK(ss.component_of[0] == ss.component_of[1]);
  CHECK(ss.component_of[2] != ss.component_of[0]);

  SimilarityMatrix m2 = matrix_of(2, {1, 0.85, 0.5, 1});
  const MergePlan as = merge_clusters(m2, MergeMode::AS, 0.8, 0.4);
  CHECK(as.merged_count == 1);
  const MergePlan ss2 = merge_clusters(m2, MergeMode::SS, 0.8, 0.4);
  CHECK(ss2.merged_count == 2);

  SimilarityMatrix eye = matrix_of(3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  CHECK(merge_clusters(eye, MergeMode::SS, 0.8, 0.4).merged_count == 3);
  CHECK(merge_clusters(eye, MergeMode::AS, 0.8, 0.4).merged_count == 3);
}

TEST_CASE("AS merges everything SS merges") {
  Rng rng(23);
  for (int it = 0; it < 300; ++it) {
    const int n = 2 + int(rng.below(15));
    SimilarityMatrix m;
    m.class_id = 0;
    m.size = n;
    m.m.resize(std::size_t(n) * n);
    for (auto& v : m.m) v = rng.uniform();
    const MergePlan ss = merge_clusters(m, MergeMode::SS, 0.8, 0.4);
    const MergePlan as = merge_clusters(m, MergeMode::AS, 0.8, 0.4);
    REQUIRE(as.merged_count <= ss.merged_count);
    // partitions stay valid
    std::vector<bool> seen(n, false);
    for (const auto& comp : ss.components) {
      for (int c : comp) {
        REQUIRE(!seen[std::size_t(c)]);
        seen[std::size_t(c)] = true;
      }
    }
    for (bool b : seen) REQUIRE(b);
  }
}

TEST_CASE("bucbam recovers planted subconcepts with default parameters") {
  SynthSpec spec;  // the canonical acceptance instance
  const SourceData src = generate_source(spec);
  BucbamConfig cfg;
  cfg.seed = derive_seed(42, "bucbam");
  const BucbamResult res = bucbam_split(src.dataset, cfg);

  int recovered = 0;
  for (const auto& a : res.assignments) {
    if (a.k == 3) ++recovered;
  }
  CHECK(recovered >= 9);

  Hierarchy base = Hierarchy::base(src.dataset.class_count);
  const auto finer = add_finer_level(base, src.dataset, res.assignments);
  const AriReport ari = planted_ari(finer.assignment, src.truth);
  CHECK(ari.global >= 0.9);

  for (const auto& r : res.per_class) {
    CHECK(r.merged.k <= r.pruned.k);
    CHECK(r.pruned.k <= cfg.k_initial);
    for (double v : r.matrix.m) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("a single homogeneous blob per class merges to one cluster") {
  Rng rng(29);
  LabeledDataset d = testutil::blobs({{0, 0, 0, 0}, {40, 0, 0, 0}}, 120, 1.0, rng);
  BucbamConfig cfg;
  cfg.k_initial = 8;
  cfg.seed = 31;
  const BucbamResult res = bucbam_split(d, cfg);
  CHECK(res.assignments[0].k == 1);
  CHECK(res.assignments[1].k == 1);
}

TEST_CASE("bucbam is deterministic in the seed") {
  Rng rng(37);
  LabeledDataset d = testutil::blobs({{0, 0}, {25, 0}}, 60, 1.0, rng);
  BucbamConfig cfg;
  cfg.k_initial = 6;
  cfg.min_cluster_size = 10;
  cfg.seed = 41;
  const BucbamResult a = bucbam_split(d, cfg);
  const BucbamResult b = bucbam_split(d, cfg);
  for (std::size_t c = 0; c < a.assignments.size(); ++c) {
    CHECK(a.assignments[c].member_of == b.assignments[c].member_of);
    CHECK(a.per_class[c].matrix.m == b.per_class[c].matrix.m);
  }
}

TEST_CASE("bucbam config validation") {
  BucbamConfig cfg;
  cfg.s_med = 0.9;  // above s_high
  CHECK_THROWS_AS(validate(cfg), Error);
  cfg = {};
  cfg.k_initial = 1;
  CHECK_THROWS_AS(validate(cfg), Error);
  cfg = {};
  cfg.min_cluster_size = 0;
  CHECK_THROWS_AS(validate(cfg), Error);
}
