#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "refinery/types.hpp"

namespace refinery {

enum class SplitterKind { random, kmeans, spectral, affinity, meanshift };

SplitterKind splitter_from_name(const std::string& name);
std::string splitter_name(SplitterKind kind);

struct KMeansResult {
  FeatureMatrix centroids;
  std::vector<int> labels;
  double inertia = 0.0;
  int iterations = 0;
};

/// Lloyd iterations with k-means++ seeding. Ties in the nearest-centroid
/// assignment break toward the lowest centroid index; an emptied cluster is
/// reseeded at the point farthest from its assigned centroid. The inertia
/// sequence is checked non-increasing every iteration.
KMeansResult kmeans_fit(const FeatureMatrix& points, int k,
                        std::uint64_t seed, int max_iters = 300,
                        double tol = 1e-6);

/// Balanced shuffle-partition: sizes differ by at most one.
ClusterAssignment split_random_k(const ClassView& view, int k,
                                 std::uint64_t seed,
                                 std::vector<std::string>* warnings = nullptr);

ClusterAssignment split_kmeans(const ClassView& view,
                               const FeatureMatrix& features_of_view, int k,
                               std::uint64_t seed,
                               std::vector<std::string>* warnings = nullptr);

/// RBF similarity on the symmetrized 10-NN graph (bandwidth = median
/// pairwise distance), normalized Laplacian embedding from the bottom-k
/// eigenvectors, then k-means on the row-normalized embedding.
ClusterAssignment split_spectral(const ClassView& view,
                                 const FeatureMatrix& features_of_view, int k,
                                 std::uint64_t seed,
                                 std::vector<std::string>* warnings = nullptr);

/// Affinity propagation with similarity = negative squared Euclidean
/// distance. `preference` defaults to the median off-diagonal similarity
/// when NaN. The cluster count emerges from the exemplar set.
ClusterAssignment split_affinity(const ClassView& view,
                                 const FeatureMatrix& features_of_view,
                                 double damping = 0.7, int max_iters = 500,
                                 double preference =
                                     std::numeric_limits<double>::quiet_NaN(),
                                 std::vector<std::string>* warnings = nullptr);

/// Flat-kernel mean-shift; modes closer than bandwidth/2 merge.
ClusterAssignment split_meanshift(const ClassView& view,
                                  const FeatureMatrix& features_of_view,
                                  double bandwidth,
                                  std::vector<std::string>* warnings = nullptr);

}  // namespace refinery
