#include "refinery/splitters.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "refinery/rng.hpp"

namespace refinery {

namespace {

void warn(std::vector<std::string>* sink, std::string msg) {
  if (sink) sink->push_back(std::move(msg));
}

int nearest_centroid(const FeatureMatrix& points, std::size_t i,
                     const FeatureMatrix& centroids, double* dist_out) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  const auto x = points.row(i);
  for (std::size_t c = 0; c < centroids.n_samples; ++c) {
    const double d = squared_distance(x, centroids.row(c));
    if (d < best_d) {  // strict: ties keep the lowest index
      best_d = d;
      best = int(c);
    }
  }
  if (dist_out) *dist_out = best_d;
  return best;
}

FeatureMatrix kmeanspp_seed(const FeatureMatrix& points, int k, Rng& rng) {
  const std::size_t n = points.n_samples;
  FeatureMatrix centroids(k, points.dim);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());

  const std::size_t first = std::size_t(rng.below(n));
  std::copy(points.row(first).begin(), points.row(first).end(),
            centroids.row(0).begin());
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = squared_distance(points.row(i), centroids.row(c - 1));
      d2[i] = std::min(d2[i], d);
      total += d2[i];
    }
    std::size_t pick;
    if (total <= 0.0) {
      pick = std::size_t(rng.below(n));  // all points coincide with seeds
    } else {
      double target = rng.uniform() * total;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        target -= d2[i];
        if (target <= 0.0) {
          pick = i;
          break;
        }
      }
    }
    std::copy(points.row(pick).begin(), points.row(pick).end(),
              centroids.row(c).begin());
  }
  return centroids;
}

}  // namespace

SplitterKind splitter_from_name(const std::string& name) {
  if (name == "random") return SplitterKind::random;
  if (name == "kmeans") return SplitterKind::kmeans;
  if (name == "spectral") return SplitterKind::spectral;
  if (name == "affinity") return SplitterKind::affinity;
  if (name == "meanshift") return SplitterKind::meanshift;
  throw Error(ErrorKind::config, "unknown splitter '" + name + "'");
}

std::string splitter_name(SplitterKind kind) {
  switch (kind) {
    case SplitterKind::random: return "random";
    case SplitterKind::kmeans: return "kmeans";
    case SplitterKind::spectral: return "spectral";
    case SplitterKind::affinity: return "affinity";
    case SplitterKind::meanshift: return "meanshift";
  }
  return "?";
}

namespace {

// Moves the point farthest from its assigned centroid into each empty
// cluster and parks the centroid on it. Distances of other points are left
// stale (upper bounds); the next assignment pass tightens them.
void repair_empty_clusters(const FeatureMatrix& points,
                           FeatureMatrix& centroids, std::vector<int>& labels,
                           std::vector<double>& dist) {
  const int k = int(centroids.n_samples);
  std::vector<std::size_t> counts(k, 0);
  for (int l : labels) ++counts[l];
  for (int c = 0; c < k; ++c) {
    if (counts[c] > 0) continue;
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t i = 0; i < points.n_samples; ++i) {
      if (counts[labels[i]] <= 1) continue;
      if (dist[i] > far_d) {
        far_d = dist[i];
        far = i;
      }
    }
    --counts[labels[far]];
    labels[far] = c;
    counts[c] = 1;
    dist[far] = 0.0;
    std::copy(points.row(far).begin(), points.row(far).end(),
              centroids.row(c).begin());
  }
}

}  // namespace

KMeansResult kmeans_fit(const FeatureMatrix& points, int k,
                        std::uint64_t seed, int max_iters, double tol) {
  const std::size_t n = points.n_samples;
  if (k < 1) throw Error(ErrorKind::infeasible, "kmeans: k < 1");
  if (std::size_t(k) > n) {
    throw Error(ErrorKind::infeasible,
                "kmeans: k = " + std::to_string(k) + " > n_samples = " +
                    std::to_string(n));
  }

  Rng rng(seed);
  FeatureMatrix centroids = kmeanspp_seed(points, k, rng);
  std::vector<int> labels(n, 0);
  std::vector<double> dist(n, 0.0);
  double prev_inertia = std::numeric_limits<double>::infinity();
  int iter = 0;

  auto assign_all = [&]() {
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = nearest_centroid(points, i, centroids, &dist[i]);
      inertia += dist[i];
    }
    return inertia;
  };

  for (iter = 0; iter < max_iters; ++iter) {
    double inertia = assign_all();
    repair_empty_clusters(points, centroids, labels, dist);
    inertia = 0.0;
    for (double d : dist) inertia += d;

    if (inertia > prev_inertia + 1e-9 * std::max(1.0, prev_inertia)) {
      throw Error(ErrorKind::divergence,
                  "kmeans: inertia increased at iteration " +
                      std::to_string(iter));
    }
    prev_inertia = inertia;

    // Update step.
    FeatureMatrix sums(k, points.dim);
    std::vector<std::size_t> size(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++size[labels[i]];
      auto dst = sums.row(labels[i]);
      const auto src = points.row(i);
      for (std::size_t j = 0; j < points.dim; ++j) dst[j] += src[j];
    }
    double shift = 0.0;
    for (int c = 0; c < k; ++c) {
      auto dst = sums.row(c);
      for (std::size_t j = 0; j < points.dim; ++j) dst[j] /= double(size[c]);
      shift = std::max(shift,
                       std::sqrt(squared_distance(dst, centroids.row(c))));
    }
    std::copy(sums.values.begin(), sums.values.end(),
              centroids.values.begin());
    if (shift < tol) {
      ++iter;
      break;
    }
  }

  // Final assignment; repair any cluster emptied by the last update. The
  // round cap only matters for tie-degenerate inputs (exact duplicates).
  double inertia = 0.0;
  for (int round = 0; round <= k; ++round) {
    inertia = assign_all();
    if (inertia > prev_inertia + 1e-9 * std::max(1.0, prev_inertia)) {
      throw Error(ErrorKind::divergence, "kmeans: final inertia increased");
    }
    prev_inertia = inertia;
    std::vector<std::size_t> counts(k, 0);
    for (int l : labels) ++counts[l];
    bool any_empty = false;
    for (int c = 0; c < k; ++c) any_empty = any_empty || counts[c] == 0;
    if (!any_empty) break;
    repair_empty_clusters(points, centroids, labels, dist);
    inertia = 0.0;
    for (double d : dist) inertia += d;
    prev_inertia = inertia;
  }

  KMeansResult res;
  res.centroids = std::move(centroids);
  res.labels = std::move(labels);
  res.inertia = inertia;
  res.iterations = iter;
  return res;
}

ClusterAssignment split_random_k(const ClassView& view, int k,
                                 std::uint64_t seed,
                                 std::vector<std::string>* warnings) {
  const std::size_t n = view.sample_indices.size();
  if (k < 1) throw Error(ErrorKind::infeasible, "random split: k < 1");
  if (std::size_t(k) > n) {
    throw Error(ErrorKind::infeasible,
                "random split: k = " + std::to_string(k) + " > class size " +
                    std::to_string(n));
  }
  (void)warnings;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t(0));
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<int> member(n, 0);
  for (std::size_t pos = 0; pos < n; ++pos) {
    member[order[pos]] = int(pos % std::size_t(k));
  }
  return make_assignment(view.class_id, std::move(member), k);
}

namespace {

// Fixed-K splitters fall back to one-point clusters when the class is
// smaller than the requested k.
bool shrink_k_for_small_class(const ClassView& view, int& k,
                              std::vector<std::string>* warnings,
                              const char* who) {
  const std::size_t n = view.sample_indices.size();
  if (std::size_t(k) <= n) return false;
  warn(warnings, std::string(who) + ": class " +
                     std::to_string(view.class_id) + " has " +
                     std::to_string(n) + " samples < k; using singletons");
  k = int(n);
  return true;
}

}  // namespace

ClusterAssignment split_kmeans(const ClassView& view,
                               const FeatureMatrix& features_of_view, int k,
                               std::uint64_t seed,
                               std::vector<std::string>* warnings) {
  if (features_of_view.n_samples != view.sample_indices.size()) {
    throw Error(ErrorKind::dimension, "kmeans split: view/feature mismatch");
  }
  shrink_k_for_small_class(view, k, warnings, "kmeans split");
  KMeansResult res = kmeans_fit(features_of_view, k, seed);
  return make_assignment(view.class_id, std::move(res.labels), k);
}

// ---------------------------------------------------------------------------
// Spectral clustering
// ---------------------------------------------------------------------------

namespace {

struct DenseSym {
  std::size_t n = 0;
  std::vector<double> a;  // row-major n*n
  double& at(std::size_t i, std::size_t j) { return a[i * n + j]; }
  double at(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

// Largest eigenpairs of a symmetric PSD matrix by power iteration with
// deflation. Start vectors come from `rng` so runs are reproducible.
void top_eigenpairs(const DenseSym& m, int count, double tol, int max_iters,
                    Rng& rng, std::vector<double>& eigvals,
                    std::vector<std::vector<double>>& eigvecs) {
  const std::size_t n = m.n;
  eigvals.clear();
  eigvecs.clear();
  for (int e = 0; e < count; ++e) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    // Orthogonalize against found eigenvectors, then iterate.
    double lambda = 0.0;
    for (int it = 0; it < max_iters; ++it) {
      for (const auto& u : eigvecs) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += v[i] * u[i];
        for (std::size_t i = 0; i < n; ++i) v[i] -= dot * u[i];
      }
      double norm = 0.0;
      for (double x : v) norm += x * x;
      norm = std::sqrt(norm);
      if (norm < 1e-300) {  // degenerate start; redraw
        for (auto& x : v) x = rng.normal();
        continue;
      }
      for (auto& x : v) x /= norm;

      std::vector<double> w(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += m.at(i, j) * v[j];
        w[i] = s;
      }
      double new_lambda = 0.0;
      for (std::size_t i = 0; i < n; ++i) new_lambda += v[i] * w[i];

      double diff = 0.0;
      double wnorm = 0.0;
      for (double x : w) wnorm += x * x;
      wnorm = std::sqrt(wnorm);
      if (wnorm < 1e-300) {
        lambda = 0.0;
        break;  // v is (numerically) in the kernel
      }
      for (std::size_t i = 0; i < n; ++i) {
        const double r = w[i] / wnorm - v[i];
        diff += r * r;
      }
      v = std::move(w);
      double inv = 1.0 / wnorm;
      for (auto& x : v) x *= inv;
      lambda = new_lambda;
      if (std::sqrt(diff) < tol && it > 0) break;
    }
    eigvals.push_back(lambda);
    eigvecs.push_back(std::move(v));
  }
}

std::size_t count_components(const std::vector<std::vector<std::size_t>>& adj) {
  const std::size_t n = adj.size();
  std::vector<bool> seen(n, false);
  std::size_t comps = 0;
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < n; ++s) {
    if (seen[s]) continue;
    ++comps;
    stack.push_back(s);
    seen[s] = true;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t v : adj[u]) {
        if (!seen[v]) {
          seen[v] = true;
          stack.push_back(v);
        }
      }
    }
  }
  return comps;
}

}  // namespace

ClusterAssignment split_spectral(const ClassView& view,
                                 const FeatureMatrix& features_of_view, int k,
                                 std::uint64_t seed,
                                 std::vector<std::string>* warnings) {
  const std::size_t n = view.sample_indices.size();
  if (features_of_view.n_samples != n) {
    throw Error(ErrorKind::dimension, "spectral split: view/feature mismatch");
  }
  shrink_k_for_small_class(view, k, warnings, "spectral split");
  if (k == 1) {
    return make_assignment(view.class_id, std::vector<int>(n, 0), 1);
  }

  // Pairwise distances and the median bandwidth.
  std::vector<double> dist(n * n, 0.0);
  std::vector<double> offdiag;
  offdiag.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = std::sqrt(
          squared_distance(features_of_view.row(i), features_of_view.row(j)));
      dist[i * n + j] = d;
      dist[j * n + i] = d;
      offdiag.push_back(d);
    }
  }
  std::nth_element(offdiag.begin(), offdiag.begin() + offdiag.size() / 2,
                   offdiag.end());
  double sigma = offdiag.empty() ? 1.0 : offdiag[offdiag.size() / 2];
  if (sigma <= 0.0) sigma = 1.0;  // all points coincide

  // Symmetrized 10-NN graph with RBF weights.
  const std::size_t knn = std::min<std::size_t>(10, n - 1);
  DenseSym w;
  w.n = n;
  w.a.assign(n * n, 0.0);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::iota(order.begin(), order.end(), std::size_t(0));
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double da = dist[i * n + a], db = dist[i * n + b];
      if (da != db) return da < db;
      return a < b;
    });
    std::size_t added = 0;
    for (std::size_t pos = 0; pos < n && added < knn; ++pos) {
      const std::size_t j = order[pos];
      if (j == i) continue;
      const double d = dist[i * n + j];
      const double sim = std::exp(-(d * d) / (2.0 * sigma * sigma));
      w.at(i, j) = std::max(w.at(i, j), sim);
      w.at(j, i) = w.at(i, j);
      ++added;
    }
  }

  // Component count for the disconnection warning.
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (w.at(i, j) > 0.0) {
        adj[i].push_back(j);
        adj[j].push_back(i);
      }
    }
  }
  const std::size_t comps = count_components(adj);
  if (comps > std::size_t(k)) {
    warn(warnings, "spectral split: class " + std::to_string(view.class_id) +
                       " graph has " + std::to_string(comps) +
                       " components > k = " + std::to_string(k));
  }

  // Shifted normalized Laplacian: B = 2I - L_sym. Its top-k eigenvectors are
  // the bottom-k of L_sym, and B is PSD because eig(L_sym) lies in [0, 2].
  std::vector<double> inv_sqrt_deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j) deg += w.at(i, j);
    inv_sqrt_deg[i] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
  }
  DenseSym b;
  b.n = n;
  b.a.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double lij = (i == j ? 1.0 : 0.0) -
                   inv_sqrt_deg[i] * w.at(i, j) * inv_sqrt_deg[j];
      b.at(i, j) = (i == j ? 2.0 : 0.0) - lij;
    }
  }

  Rng rng(derive_seed(seed, "spectral-eig"));
  std::vector<double> eigvals;
  std::vector<std::vector<double>> eigvecs;
  top_eigenpairs(b, k, 1e-8, 5000, rng, eigvals, eigvecs);

  FeatureMatrix embedding(n, std::size_t(k));
  for (std::size_t i = 0; i < n; ++i) {
    double norm = 0.0;
    for (int e = 0; e < k; ++e) norm += eigvecs[e][i] * eigvecs[e][i];
    norm = std::sqrt(norm);
    for (int e = 0; e < k; ++e) {
      embedding.at(i, std::size_t(e)) =
          norm > 0.0 ? eigvecs[std::size_t(e)][i] / norm : 0.0;
    }
  }

  KMeansResult res =
      kmeans_fit(embedding, k, derive_seed(seed, "spectral-kmeans"));
  return make_assignment(view.class_id, std::move(res.labels), k);
}

// ---------------------------------------------------------------------------
// Affinity propagation
// ---------------------------------------------------------------------------

ClusterAssignment split_affinity(const ClassView& view,
                                 const FeatureMatrix& features_of_view,
                                 double damping, int max_iters,
                                 double preference,
                                 std::vector<std::string>* warnings) {
  const std::size_t n = view.sample_indices.size();
  if (features_of_view.n_samples != n) {
    throw Error(ErrorKind::dimension, "affinity split: view/feature mismatch");
  }
  if (n < 2) {
    throw Error(ErrorKind::infeasible, "affinity split: need >= 2 samples");
  }
  if (damping < 0.0 || damping >= 1.0) {
    throw Error(ErrorKind::config, "affinity split: damping outside [0, 1)");
  }

  std::vector<double> s(n * n, 0.0);
  std::vector<double> offdiag;
  offdiag.reserve(n * (n - 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      s[i * n + j] =
          -squared_distance(features_of_view.row(i), features_of_view.row(j));
      offdiag.push_back(s[i * n + j]);
    }
  }
  if (std::isnan(preference)) {
    std::nth_element(offdiag.begin(), offdiag.begin() + offdiag.size() / 2,
                     offdiag.end());
    preference = offdiag[offdiag.size() / 2];
  }
  for (std::size_t i = 0; i < n; ++i) s[i * n + i] = preference;

  std::vector<double> r(n * n, 0.0), a(n * n, 0.0);
  std::vector<int> exemplar_of(n, -1);
  std::vector<int> last_exemplar_of(n, -2);
  int stable_rounds = 0;
  const int needed_stable = 15;
  bool converged = false;

  for (int it = 0; it < max_iters; ++it) {
    // Responsibilities.
    for (std::size_t i = 0; i < n; ++i) {
      // top-2 of a(i,k) + s(i,k) over k
      double best = -std::numeric_limits<double>::infinity();
      double second = best;
      std::size_t best_k = 0;
      for (std::size_t k2 = 0; k2 < n; ++k2) {
        const double v = a[i * n + k2] + s[i * n + k2];
        if (v > best) {
          second = best;
          best = v;
          best_k = k2;
        } else if (v > second) {
          second = v;
        }
      }
      for (std::size_t k2 = 0; k2 < n; ++k2) {
        const double cap = (k2 == best_k) ? second : best;
        const double raw = s[i * n + k2] - cap;
        r[i * n + k2] = damping * r[i * n + k2] + (1.0 - damping) * raw;
      }
    }
    // Availabilities.
    for (std::size_t k2 = 0; k2 < n; ++k2) {
      double pos_sum = 0.0;
      for (std::size_t i2 = 0; i2 < n; ++i2) {
        if (i2 == k2) continue;
        pos_sum += std::max(0.0, r[i2 * n + k2]);
      }
      for (std::size_t i = 0; i < n; ++i) {
        double raw;
        if (i == k2) {
          raw = pos_sum;
        } else {
          const double without_i = pos_sum - std::max(0.0, r[i * n + k2]);
          raw = std::min(0.0, r[k2 * n + k2] + without_i);
        }
        a[i * n + k2] = damping * a[i * n + k2] + (1.0 - damping) * raw;
      }
    }
    // Current exemplar set.
    std::vector<std::size_t> exemplars;
    for (std::size_t k2 = 0; k2 < n; ++k2) {
      if (r[k2 * n + k2] + a[k2 * n + k2] > 0.0) exemplars.push_back(k2);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (exemplars.empty()) {
        exemplar_of[i] = -1;
        continue;
      }
      double best = -std::numeric_limits<double>::infinity();
      std::size_t best_k = exemplars[0];
      for (std::size_t k2 : exemplars) {
        if (s[i * n + k2] > best) {
          best = s[i * n + k2];
          best_k = k2;
        }
      }
      exemplar_of[i] = int(best_k);
    }
    for (std::size_t k2 : exemplars) exemplar_of[k2] = int(k2);

    if (exemplar_of == last_exemplar_of && !exemplars.empty()) {
      if (++stable_rounds >= needed_stable) {
        converged = true;
        break;
      }
    } else {
      stable_rounds = 0;
    }
    last_exemplar_of = exemplar_of;
  }

  if (!converged) {
    warn(warnings, "affinity split: class " + std::to_string(view.class_id) +
                       " did not converge after " + std::to_string(max_iters) +
                       " iterations");
  }

  bool any_exemplar = false;
  for (int e : exemplar_of) {
    if (e >= 0) any_exemplar = true;
  }
  if (!any_exemplar) {
    warn(warnings, "affinity split: class " + std::to_string(view.class_id) +
                       " produced no exemplars; single cluster");
    return make_assignment(view.class_id, std::vector<int>(n, 0), 1);
  }

  // Renumber exemplars to contiguous cluster ids by ascending sample index.
  std::vector<int> cluster_of_point(n, -1);
  std::vector<int> exemplar_ids;
  for (std::size_t i = 0; i < n; ++i) {
    const int e = exemplar_of[i];
    if (e == int(i)) exemplar_ids.push_back(e);
  }
  std::sort(exemplar_ids.begin(), exemplar_ids.end());
  auto cluster_index = [&](int e) {
    return int(std::lower_bound(exemplar_ids.begin(), exemplar_ids.end(), e) -
               exemplar_ids.begin());
  };
  for (std::size_t i = 0; i < n; ++i) {
    int e = exemplar_of[i];
    if (e < 0 || exemplar_of[std::size_t(e)] != e) {
      // point to the nearest surviving exemplar
      double best = -std::numeric_limits<double>::infinity();
      for (int cand : exemplar_ids) {
        if (s[i * n + std::size_t(cand)] > best) {
          best = s[i * n + std::size_t(cand)];
          e = cand;
        }
      }
    }
    cluster_of_point[i] = cluster_index(e);
  }
  return make_assignment(view.class_id, std::move(cluster_of_point),
                         int(exemplar_ids.size()));
}

// ---------------------------------------------------------------------------
// Mean-shift
// ---------------------------------------------------------------------------

ClusterAssignment split_meanshift(const ClassView& view,
                                  const FeatureMatrix& features_of_view,
                                  double bandwidth,
                                  std::vector<std::string>* warnings) {
  const std::size_t n = view.sample_indices.size();
  if (features_of_view.n_samples != n) {
    throw Error(ErrorKind::dimension, "meanshift split: view/feature mismatch");
  }
  if (!(bandwidth > 0.0)) {
    throw Error(ErrorKind::config, "meanshift split: bandwidth must be > 0");
  }
  (void)warnings;
  const std::size_t d = features_of_view.dim;
  const double bw2 = bandwidth * bandwidth;
  const double stop = std::max(1e-9, bandwidth * 1e-4);

  FeatureMatrix modes(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> pos(features_of_view.row(i).begin(),
                            features_of_view.row(i).end());
    for (int it = 0; it < 300; ++it) {
      std::vector<double> mean(d, 0.0);
      std::size_t count = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (squared_distance({pos.data(), d}, features_of_view.row(j)) <= bw2) {
          const auto rj = features_of_view.row(j);
          for (std::size_t c = 0; c < d; ++c) mean[c] += rj[c];
          ++count;
        }
      }
      for (std::size_t c = 0; c < d; ++c) mean[c] /= double(count);
      const double shift =
          std::sqrt(squared_distance({pos.data(), d}, {mean.data(), d}));
      pos = std::move(mean);
      if (shift < stop) break;
    }
    std::copy(pos.begin(), pos.end(), modes.row(i).begin());
  }

  // Merge modes within bandwidth/2 (greedy by sample index).
  const double merge2 = (bandwidth / 2.0) * (bandwidth / 2.0);
  std::vector<std::size_t> representative;  // index into `modes`
  std::vector<int> member(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    int found = -1;
    for (std::size_t c = 0; c < representative.size(); ++c) {
      if (squared_distance(modes.row(i), modes.row(representative[c])) <=
          merge2) {
        found = int(c);
        break;
      }
    }
    if (found < 0) {
      representative.push_back(i);
      found = int(representative.size()) - 1;
    }
    member[i] = found;
  }
  return make_assignment(view.class_id, std::move(member),
                         int(representative.size()));
}

}  // namespace refinery
