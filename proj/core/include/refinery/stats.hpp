#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "refinery/types.hpp"

namespace refinery {

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
};

struct ClusterStats {
  // Flat per-cluster records across all classes.
  std::vector<int> cluster_class;
  std::vector<int> cluster_id;
  std::vector<std::size_t> sizes;
  std::vector<double> variances;  // mean squared distance to the centroid
  std::vector<int> per_class_k;
  std::vector<HistogramBin> size_hist;
  // Variance histogram over max-normalized variances.
  std::vector<HistogramBin> variance_hist;
};

/// Sizes, intra-cluster variances and fixed-width histograms for a set of
/// per-class assignments. `d.features` are the vectors the clusters were
/// formed in.
ClusterStats compute_cluster_stats(const std::vector<ClusterAssignment>& as,
                                   const LabeledDataset& d,
                                   double size_bin_width = 10.0,
                                   double variance_bin_width = 0.05);

struct PcaResult {
  FeatureMatrix projection;            // n x 2
  std::array<double, 2> explained{};   // descending eigenvalues (N-1 denom)
  std::array<std::vector<double>, 2> components;
  bool degenerate = false;             // all-identical input
};

/// Mean-centered projection onto the top two principal components (power
/// iteration with deflation, tol 1e-9). The largest-magnitude entry of each
/// component is made positive.
PcaResult pca_top2(const FeatureMatrix& class_features);

/// Writes sizes.csv, variance_hist.csv and pca_class_<id>.csv per class.
void export_stats(const ClusterStats& stats,
                  const std::vector<PcaResult>& pca_per_class,
                  const std::vector<ClusterAssignment>& assignments,
                  const std::filesystem::path& out_dir);

}  // namespace refinery
