#include "refinery/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace refinery {

namespace {

std::vector<HistogramBin> fixed_width_hist(const std::vector<double>& values,
                                           double width) {
  std::vector<HistogramBin> bins;
  if (values.empty() || !(width > 0.0)) return bins;
  double mx = 0.0;
  for (double v : values) mx = std::max(mx, v);
  const std::size_t nbins = std::size_t(std::floor(mx / width)) + 1;
  bins.resize(nbins);
  for (std::size_t b = 0; b < nbins; ++b) {
    bins[b].lo = double(b) * width;
    bins[b].hi = double(b + 1) * width;
  }
  for (double v : values) {
    std::size_t b = std::size_t(std::floor(v / width));
    if (b >= nbins) b = nbins - 1;
    ++bins[b].count;
  }
  return bins;
}

}  // namespace

ClusterStats compute_cluster_stats(const std::vector<ClusterAssignment>& as,
                                   const LabeledDataset& d,
                                   double size_bin_width,
                                   double variance_bin_width) {
  validate(d);
  const auto views = class_views(d);
  if (as.size() != views.size()) {
    throw Error(ErrorKind::dimension,
                "cluster stats: one assignment per class required");
  }
  ClusterStats stats;
  for (std::size_t c = 0; c < as.size(); ++c) {
    const auto& a = as[c];
    const auto& view = views[c];
    if (a.member_of.size() != view.sample_indices.size()) {
      throw Error(ErrorKind::dimension,
                  "cluster stats: assignment for class " + std::to_string(c) +
                      " does not cover the class");
    }
    stats.per_class_k.push_back(a.k);

    FeatureMatrix centroids(std::size_t(a.k), d.features.dim);
    for (std::size_t i = 0; i < a.member_of.size(); ++i) {
      const auto src = d.features.row(view.sample_indices[i]);
      auto dst = centroids.row(std::size_t(a.member_of[i]));
      for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
    }
    for (int k = 0; k < a.k; ++k) {
      auto row = centroids.row(std::size_t(k));
      for (auto& v : row) v /= double(a.sizes[k]);
    }
    std::vector<double> var(a.k, 0.0);
    for (std::size_t i = 0; i < a.member_of.size(); ++i) {
      var[a.member_of[i]] +=
          squared_distance(d.features.row(view.sample_indices[i]),
                           centroids.row(std::size_t(a.member_of[i])));
    }
    for (int k = 0; k < a.k; ++k) {
      stats.cluster_class.push_back(a.class_id);
      stats.cluster_id.push_back(k);
      stats.sizes.push_back(a.sizes[k]);
      stats.variances.push_back(var[k] / double(a.sizes[k]));
    }
  }

  std::vector<double> size_values(stats.sizes.begin(), stats.sizes.end());
  stats.size_hist = fixed_width_hist(size_values, size_bin_width);

  double max_var = 0.0;
  for (double v : stats.variances) max_var = std::max(max_var, v);
  std::vector<double> norm_var = stats.variances;
  if (max_var > 0.0) {
    for (auto& v : norm_var) v /= max_var;
  }
  stats.variance_hist = fixed_width_hist(norm_var, variance_bin_width);
  return stats;
}

PcaResult pca_top2(const FeatureMatrix& class_features) {
  const std::size_t n = class_features.n_samples;
  const std::size_t d = class_features.dim;
  if (n < 3) throw Error(ErrorKind::infeasible, "pca_top2: need >= 3 samples");
  if (d < 2) throw Error(ErrorKind::infeasible, "pca_top2: need dim >= 2");

  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = class_features.row(i);
    for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
  }
  for (auto& v : mean) v /= double(n);

  FeatureMatrix centered(n, d);
  bool any_nonzero = false;
  for (std::size_t i = 0; i < n; ++i) {
    const auto src = class_features.row(i);
    auto dst = centered.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      dst[j] = src[j] - mean[j];
      any_nonzero = any_nonzero || dst[j] != 0.0;
    }
  }

  PcaResult out;
  out.projection = FeatureMatrix(n, 2);
  if (!any_nonzero) {
    out.degenerate = true;  // rank-0: zero projection
    return out;
  }

  // Sample covariance with the unbiased (N-1) denominator.
  std::vector<double> cov(d * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = centered.row(i);
    for (std::size_t a = 0; a < d; ++a) {
      const double va = row[a];
      if (va == 0.0) continue;
      for (std::size_t b = a; b < d; ++b) cov[a * d + b] += va * row[b];
    }
  }
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b) {
      cov[a * d + b] /= double(n - 1);
      cov[b * d + a] = cov[a * d + b];
    }
  }

  // Power iteration with deflation; deterministic start vectors.
  std::array<std::vector<double>, 2> comps;
  for (int e = 0; e < 2; ++e) {
    std::vector<double> v(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
      v[j] = 1.0 + 0.25 * std::sin(double(j + 1) * double(e + 2));
    }
    double lambda = 0.0;
    for (int it = 0; it < 100000; ++it) {
      if (e == 1) {
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) dot += v[j] * comps[0][j];
        for (std::size_t j = 0; j < d; ++j) v[j] -= dot * comps[0][j];
      }
      double norm = 0.0;
      for (double x : v) norm += x * x;
      norm = std::sqrt(norm);
      if (norm < 1e-300) {
        // centered data is rank-1; second component is zero
        lambda = 0.0;
        v.assign(d, 0.0);
        break;
      }
      for (auto& x : v) x /= norm;

      std::vector<double> w(d, 0.0);
      for (std::size_t a = 0; a < d; ++a) {
        double s = 0.0;
        for (std::size_t b = 0; b < d; ++b) s += cov[a * d + b] * v[b];
        w[a] = s;
      }
      double new_lambda = 0.0;
      for (std::size_t j = 0; j < d; ++j) new_lambda += v[j] * w[j];
      double wnorm = 0.0;
      for (double x : w) wnorm += x * x;
      wnorm = std::sqrt(wnorm);
      if (wnorm < 1e-300) {
        lambda = 0.0;
        v.assign(d, 0.0);
        break;
      }
      double diff = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double r = w[j] / wnorm - v[j];
        diff += r * r;
      }
      v = std::move(w);
      for (auto& x : v) x /= wnorm;
      lambda = new_lambda;
      if (std::sqrt(diff) < 1e-9 && it > 0) break;
    }
    // Sign convention: largest-magnitude entry positive.
    double best = 0.0;
    for (double x : v) {
      if (std::abs(x) > std::abs(best)) best = x;
    }
    if (best < 0.0) {
      for (auto& x : v) x = -x;
    }
    out.explained[std::size_t(e)] = std::max(0.0, lambda);
    comps[std::size_t(e)] = v;
    out.components[std::size_t(e)] = std::move(v);
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto row = centered.row(i);
    for (int e = 0; e < 2; ++e) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += row[j] * comps[e][j];
      out.projection.at(i, std::size_t(e)) = s;
    }
  }
  return out;
}

void export_stats(const ClusterStats& stats,
                  const std::vector<PcaResult>& pca_per_class,
                  const std::vector<ClusterAssignment>& assignments,
                  const std::filesystem::path& out_dir) {
  if (pca_per_class.size() != assignments.size()) {
    throw Error(ErrorKind::dimension,
                "export_stats: one PCA table per class required");
  }
  std::filesystem::create_directories(out_dir);
  char buf[160];

  auto write_hist = [&](const std::filesystem::path& path,
                        const std::vector<HistogramBin>& bins,
                        const char* comment) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::io, "cannot open " + path.string());
    out << "# " << comment << "\n";
    out << "bin_lo,bin_hi,count\n";
    for (const auto& b : bins) {
      std::snprintf(buf, sizeof buf, "%.9g,%.9g,%zu\n", b.lo, b.hi, b.count);
      out << buf;
    }
  };
  write_hist(out_dir / "sizes.csv", stats.size_hist,
             "histogram of cluster sizes");
  write_hist(out_dir / "variance_hist.csv", stats.variance_hist,
             "histogram of max-normalized intra-cluster variance "
             "(mean squared distance to centroid; covariance uses N-1)");

  for (std::size_t c = 0; c < assignments.size(); ++c) {
    const auto& a = assignments[c];
    const auto& pca = pca_per_class[c];
    if (pca.projection.n_samples != a.member_of.size()) {
      throw Error(ErrorKind::dimension,
                  "export_stats: PCA rows != class samples for class " +
                      std::to_string(a.class_id));
    }
    const auto path =
        out_dir / ("pca_class_" + std::to_string(a.class_id) + ".csv");
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::io, "cannot open " + path.string());
    out << "pc1,pc2,cluster_id\n";
    for (std::size_t i = 0; i < a.member_of.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.9g,%.9g,%d\n",
                    pca.projection.at(i, 0), pca.projection.at(i, 1),
                    a.member_of[i]);
      out << buf;
    }
  }
}

}  // namespace refinery
