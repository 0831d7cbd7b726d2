#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "refinery/fusion.hpp"
#include "refinery/rng.hpp"

using namespace refinery;

TEST_CASE("L-infinity normalization divides by the max absolute entry") {
  const FeatureMatrix m = testutil::matrix_from(1, 3, {2, -4, 1});
  const FeatureMatrix z = linf_normalize(m);
  CHECK(z.at(0, 0) == doctest::Approx(0.5));
  CHECK(z.at(0, 1) == doctest::Approx(-1.0));
  CHECK(z.at(0, 2) == doctest::Approx(0.25));
}

TEST_CASE("zero rows pass through unchanged") {
  const FeatureMatrix z = linf_normalize(FeatureMatrix(2, 4));
  for (double v : z.values) CHECK(v == 0.0);
}

TEST_CASE("normalization is idempotent and positively scale-invariant") {
  Rng rng(3);
  for (int it = 0; it < 30; ++it) {
    const FeatureMatrix m = testutil::random_matrix(4, 5, rng, 10.0);
    const FeatureMatrix once = linf_normalize(m);
    const FeatureMatrix twice = linf_normalize(once);
    for (std::size_t i = 0; i < once.values.size(); ++i) {
      REQUIRE(twice.values[i] == doctest::Approx(once.values[i]).epsilon(1e-12));
    }

    FeatureMatrix scaled = m;
    const double alpha = 0.1 + 5.0 * rng.uniform();
    for (auto& v : scaled.values) v *= alpha;
    const FeatureMatrix z = linf_normalize(scaled);
    for (std::size_t i = 0; i < z.values.size(); ++i) {
      REQUIRE(z.values[i] == doctest::Approx(once.values[i]).epsilon(1e-12));
    }

    // non-zero rows end with max-abs exactly 1
    for (std::size_t r = 0; r < once.n_samples; ++r) {
      double mx = 0.0;
      for (double v : once.row(r)) mx = std::max(mx, std::abs(v));
      REQUIRE(mx == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("fusion concatenates the normalized halves in order") {
  Rng rng(7);
  const FeatureMatrix spe = testutil::random_matrix(6, 3, rng, 4.0);
  const FeatureMatrix fine = testutil::random_matrix(6, 2, rng, 4.0);
  const FusedRepresentation fused = fuse(spe, fine);
  CHECK(fused.matrix.dim == 5);
  CHECK(fused.spe_dim == 3);
  CHECK(fused.fine_dim == 2);

  const FeatureMatrix ns = linf_normalize(spe);
  const FeatureMatrix nf = linf_normalize(fine);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      REQUIRE(fused.matrix.at(i, j) == ns.at(i, j));
    }
    for (std::size_t j = 0; j < 2; ++j) {
      REQUIRE(fused.matrix.at(i, 3 + j) == nf.at(i, j));
    }
  }
}

TEST_CASE("fusing a matrix with itself duplicates the normalized rows") {
  Rng rng(9);
  const FeatureMatrix x = testutil::random_matrix(4, 3, rng, 2.0);
  const FusedRepresentation fused = fuse(x, x);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(fused.matrix.at(i, j) == fused.matrix.at(i, 3 + j));
    }
  }
}

TEST_CASE("fused width doubles when the halves share a width") {
  Rng rng(11);
  const FeatureMatrix a = testutil::random_matrix(5, 16, rng);
  const FeatureMatrix b = testutil::random_matrix(5, 16, rng);
  CHECK(fuse(a, b).matrix.dim == 32);
}

TEST_CASE("sample-count mismatch is rejected") {
  CHECK_THROWS_AS(fuse(FeatureMatrix(3, 2), FeatureMatrix(4, 2)), Error);
}
