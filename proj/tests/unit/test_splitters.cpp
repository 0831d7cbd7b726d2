#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "refinery/splitters.hpp"
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

// Optimal 2-means inertia by enumerating all 2^n assignments.
double brute_force_two_means(const FeatureMatrix& points) {
  const std::size_t n = points.n_samples;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t mask = 1; mask + 1 < (std::size_t(1) << n); ++mask) {
    std::vector<double> mean_a(points.dim, 0.0), mean_b(points.dim, 0.0);
    std::size_t ca = 0, cb = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool in_a = (mask >> i) & 1;
      auto& mean = in_a ? mean_a : mean_b;
      (in_a ? ca : cb) += 1;
      for (std::size_t j = 0; j < points.dim; ++j) mean[j] += points.at(i, j);
    }
    for (std::size_t j = 0; j < points.dim; ++j) {
      mean_a[j] /= double(ca);
      mean_b[j] /= double(cb);
    }
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& mean = ((mask >> i) & 1) ? mean_a : mean_b;
      inertia += squared_distance(points.row(i), {mean.data(), points.dim});
    }
    best = std::min(best, inertia);
  }
  return best;
}

std::vector<int> planted_labels(std::size_t per_cluster, int k) {
  std::vector<int> labels;
  for (int c = 0; c < k; ++c) {
    labels.insert(labels.end(), per_cluster, c);
  }
  return labels;
}

}  // namespace

TEST_CASE("random split balances cluster sizes") {
  const auto a = split_random_k(view_of(10), 4, 7);
  std::vector<std::size_t> sizes = a.sizes;
  std::sort(sizes.begin(), sizes.end());
  CHECK(sizes == std::vector<std::size_t>{2, 2, 3, 3});

  const auto single = split_random_k(view_of(6), 1, 7);
  CHECK(single.k == 1);
  CHECK(single.sizes[0] == 6);

  const auto b = split_random_k(view_of(10), 4, 7);
  CHECK(a.member_of == b.member_of);

  CHECK_THROWS_AS(split_random_k(view_of(3), 4, 7), Error);
}

TEST_CASE("random split size spread is at most one for random shapes") {
  Rng rng(3);
  for (int it = 0; it < 50; ++it) {
    const std::size_t n = 1 + rng.below(200);
    const int k = 1 + int(rng.below(std::min<std::uint64_t>(n, 16)));
    const auto a = split_random_k(view_of(n), k, rng.next());
    const auto [lo, hi] =
        std::minmax_element(a.sizes.begin(), a.sizes.end());
    REQUIRE(*hi - *lo <= 1);
  }
}

TEST_CASE("kmeans on two 1-d blobs matches the brute-force optimum") {
  const FeatureMatrix points =
      testutil::matrix_from(6, 1, {-0.1, 0.0, 0.1, 9.9, 10.0, 10.1});
  const KMeansResult res = kmeans_fit(points, 2, 11);
  std::vector<double> centroids{res.centroids.at(0, 0), res.centroids.at(1, 0)};
  std::sort(centroids.begin(), centroids.end());
  CHECK(centroids[0] == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(centroids[1] == doctest::Approx(10.0).epsilon(1e-6));
  CHECK(res.inertia == doctest::Approx(0.04).epsilon(1e-9));
  CHECK(res.inertia == doctest::Approx(brute_force_two_means(points)));
}

TEST_CASE("kmeans degenerate cases: k = n and k = 1") {
  Rng rng(13);
  const FeatureMatrix points = testutil::random_matrix(7, 3, rng);
  const KMeansResult each = kmeans_fit(points, 7, 5);
  CHECK(each.inertia == doctest::Approx(0.0));

  const KMeansResult one = kmeans_fit(points, 1, 5);
  std::vector<double> mean(3, 0.0);
  for (std::size_t i = 0; i < 7; ++i) {
    for (std::size_t j = 0; j < 3; ++j) mean[j] += points.at(i, j) / 7.0;
  }
  double expected = 0.0;
  for (std::size_t i = 0; i < 7; ++i) {
    expected += squared_distance(points.row(i), {mean.data(), 3});
  }
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(one.centroids.at(0, j) == doctest::Approx(mean[j]));
  }
  CHECK(one.inertia == doctest::Approx(expected));

  CHECK_THROWS_AS(kmeans_fit(points, 8, 5), Error);
}

TEST_CASE("kmeans recovers well-separated planted blobs exactly") {
  Rng data_rng(17);
  for (const std::size_t dim : {2, 8, 32}) {
    const LabeledDataset d = testutil::blobs(
        {std::vector<double>(dim, 0.0), std::vector<double>(dim, 8.0)}, 25,
        1.0, data_rng);
    const auto a = split_kmeans(view_of(50), d.features, 2, 23);
    CHECK(adjusted_rand_index(a.member_of, d.labels) == doctest::Approx(1.0));
  }
}

TEST_CASE("kmeans split handles k=1 and duplicate-only input") {
  Rng rng(19);
  const FeatureMatrix feats = testutil::random_matrix(12, 2, rng);
  const auto one = split_kmeans(view_of(12), feats, 1, 3);
  CHECK(one.k == 1);

  FeatureMatrix dup(8, 2);
  for (std::size_t i = 0; i < 8; ++i) {
    dup.at(i, 0) = 3.0;
    dup.at(i, 1) = -1.0;
  }
  const auto a = split_kmeans(view_of(8), dup, 2, 3);
  CHECK(a.k == 2);  // empty-cluster repair must keep both alive
  CHECK(a.sizes[0] + a.sizes[1] == 8);
  CHECK(a.sizes[0] >= 1);
  CHECK(a.sizes[1] >= 1);
}

TEST_CASE("kmeans split shrinks k for tiny classes with a warning") {
  Rng rng(21);
  const FeatureMatrix feats = testutil::random_matrix(3, 2, rng);
  std::vector<std::string> warnings;
  const auto a = split_kmeans(view_of(3), feats, 5, 3, &warnings);
  CHECK(a.k == 3);
  CHECK(!warnings.empty());
}

TEST_CASE("spectral clustering separates concentric rings") {
  Rng rng(29);
  const std::size_t per = 60;
  FeatureMatrix feats(2 * per, 2);
  std::vector<int> truth(2 * per);
  for (std::size_t i = 0; i < 2 * per; ++i) {
    const double radius = i < per ? 1.0 : 5.0;
    const double angle = 2.0 * M_PI * rng.uniform();
    feats.at(i, 0) = radius * std::cos(angle) + 0.05 * rng.normal();
    feats.at(i, 1) = radius * std::sin(angle) + 0.05 * rng.normal();
    truth[i] = i < per ? 0 : 1;
  }
  const auto spectral = split_spectral(view_of(2 * per), feats, 2, 31);
  CHECK(adjusted_rand_index(spectral.member_of, truth) >= 0.9);

  const auto kmeans = split_kmeans(view_of(2 * per), feats, 2, 31);
  CHECK(adjusted_rand_index(kmeans.member_of, truth) < 0.5);
}

TEST_CASE("spectral equals kmeans on two far blobs") {
  Rng rng(37);
  const LabeledDataset d = testutil::blobs({{0, 0}, {20, 0}}, 30, 1.0, rng);
  const auto spectral = split_spectral(view_of(60), d.features, 2, 41);
  const auto kmeans = split_kmeans(view_of(60), d.features, 2, 41);
  CHECK(adjusted_rand_index(spectral.member_of, d.labels) ==
        doctest::Approx(1.0));
  CHECK(adjusted_rand_index(spectral.member_of, kmeans.member_of) ==
        doctest::Approx(1.0));

  const auto one = split_spectral(view_of(60), d.features, 1, 41);
  CHECK(one.k == 1);
}

TEST_CASE("affinity propagation finds three blobs with exemplars at centers") {
  Rng rng(43);
  const LabeledDataset d =
      testutil::blobs({{0, 0}, {12, 0}, {0, 12}}, 20, 0.8, rng);
  const auto a = split_affinity(view_of(60), d.features);
  CHECK(a.k == 3);
  CHECK(adjusted_rand_index(a.member_of, d.labels) == doctest::Approx(1.0));
}

TEST_CASE("affinity propagation degenerates to one cluster on equal points") {
  FeatureMatrix dup(6, 2);
  for (std::size_t i = 0; i < 6; ++i) dup.at(i, 0) = dup.at(i, 1) = 2.5;
  std::vector<std::string> warnings;
  const auto a = split_affinity(view_of(6), dup, 0.7, 500,
                                std::numeric_limits<double>::quiet_NaN(),
                                &warnings);
  CHECK(a.k == 1);
}

TEST_CASE("lower preference produces fewer affinity clusters") {
  Rng rng(47);
  const LabeledDataset d =
      testutil::blobs({{0, 0}, {10, 0}, {0, 10}}, 15, 1.2, rng);
  const auto views = view_of(45);
  const auto median_pref = split_affinity(views, d.features);

  double min_sim = 0.0;
  for (std::size_t i = 0; i < 45; ++i) {
    for (std::size_t j = 0; j < 45; ++j) {
      if (i != j) {
        min_sim = std::min(
            min_sim, -squared_distance(d.features.row(i), d.features.row(j)));
      }
    }
  }
  const auto low_pref = split_affinity(views, d.features, 0.7, 500,
                                       min_sim * 10.0);
  CHECK(low_pref.k <= median_pref.k);
  CHECK(low_pref.k >= 1);
}

TEST_CASE("meanshift mode count tracks the bandwidth") {
  Rng rng(53);
  const LabeledDataset one = testutil::blobs({{0, 0}}, 30, 0.5, rng);
  CHECK(split_meanshift(view_of(30), one.features, 50.0).k == 1);

  const LabeledDataset two = testutil::blobs({{0, 0}, {30, 0}}, 25, 0.5, rng);
  const auto a = split_meanshift(view_of(50), two.features, 5.0);
  CHECK(a.k == 2);
  CHECK(adjusted_rand_index(a.member_of, two.labels) == doctest::Approx(1.0));

  // near-zero bandwidth: nearly every distinct point its own cluster
  const auto tiny = split_meanshift(view_of(50), two.features, 1e-4);
  CHECK(tiny.k >= 45);
}

TEST_CASE("splitters are deterministic in their seeds") {
  Rng rng(59);
  const FeatureMatrix feats = testutil::random_matrix(40, 4, rng, 3.0);
  const auto v = view_of(40);
  CHECK(split_kmeans(v, feats, 4, 77).member_of ==
        split_kmeans(v, feats, 4, 77).member_of);
  CHECK(split_spectral(v, feats, 3, 77).member_of ==
        split_spectral(v, feats, 3, 77).member_of);
  CHECK(split_affinity(v, feats).member_of ==
        split_affinity(v, feats).member_of);
  CHECK(split_meanshift(v, feats, 2.0).member_of ==
        split_meanshift(v, feats, 2.0).member_of);
}

TEST_CASE("kmeans inertia stays monotone over random runs") {
  Rng rng(61);
  for (int it = 0; it < 60; ++it) {
    const std::size_t n = 8 + rng.below(60);
    const std::size_t dim = 1 + rng.below(6);
    const int k = 1 + int(rng.below(std::min<std::uint64_t>(n, 10)));
    const FeatureMatrix points = testutil::random_matrix(n, dim, rng, 2.0);
    // kmeans_fit throws Error(divergence) if the sequence ever increases.
    CHECK_NOTHROW(kmeans_fit(points, k, rng.next()));
  }
}

TEST_CASE("spectral warns when the graph splits into more than k parts") {
  Rng rng(67);
  const LabeledDataset d =
      testutil::blobs({{0, 0}, {500, 0}, {0, 500}}, 15, 0.1, rng);
  std::vector<std::string> warnings;
  const auto a = split_spectral(view_of(45), d.features, 2, 5, &warnings);
  CHECK(a.k == 2);
  bool found = false;
  for (const auto& w : warnings) {
    if (w.find("components") != std::string::npos) found = true;
  }
  CHECK(found);
}
