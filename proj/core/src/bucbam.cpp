#include "refinery/bucbam.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "refinery/parallel.hpp"
#include "refinery/rng.hpp"
#include "refinery/splitters.hpp"

namespace refinery {

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);  // keep the lowest index as root
    parent[b] = a;
  }
};

}  // namespace

MergeMode merge_mode_from_name(const std::string& name) {
  if (name == "ss" || name == "SS") return MergeMode::SS;
  if (name == "as" || name == "AS") return MergeMode::AS;
  throw Error(ErrorKind::config, "unknown merge mode '" + name + "'");
}

std::string merge_mode_name(MergeMode mode) {
  return mode == MergeMode::SS ? "ss" : "as";
}

void validate(const BucbamConfig& cfg) {
  if (cfg.k_initial < 2) {
    throw Error(ErrorKind::config, "bucbam: k_initial must be >= 2");
  }
  if (cfg.min_cluster_size < 1) {
    throw Error(ErrorKind::config, "bucbam: min_cluster_size must be >= 1");
  }
  if (!(cfg.s_med > 0.0) || !(cfg.s_med < cfg.s_high) || !(cfg.s_high <= 1.0)) {
    throw Error(ErrorKind::config, "bucbam: need 0 < S_M < S_H <= 1");
  }
  if (!(cfg.negatives_per_positive > 0.0)) {
    throw Error(ErrorKind::config, "bucbam: negatives_per_positive <= 0");
  }
}

ClusterAssignment prune_small_clusters(const ClusterAssignment& a,
                                       const FeatureMatrix& features_of_view,
                                       int min_cluster_size) {
  const std::size_t n = a.member_of.size();
  const std::size_t min_size = std::size_t(min_cluster_size);
  if (features_of_view.n_samples != n) {
    throw Error(ErrorKind::dimension, "prune: view/feature mismatch");
  }
  // Dissolve sub-S clusters smallest-first: each orphan joins the cluster of
  // its 1-NN among samples of the remaining clusters. Clusters only grow, so
  // attachments can lift a small cluster over S before its turn comes. A
  // class whose total mass cannot sustain a >= S cluster collapses to a
  // single cluster (the whole-class fallback).
  std::vector<int> member = a.member_of;
  std::vector<std::size_t> sizes = a.sizes;
  std::vector<bool> alive(a.k, true);
  int alive_count = a.k;
  for (;;) {
    if (alive_count == 1) break;
    int smallest = -1;
    for (int c = 0; c < a.k; ++c) {
      if (!alive[c] || sizes[c] >= min_size) continue;
      if (smallest < 0 || sizes[c] < sizes[smallest]) smallest = c;
    }
    if (smallest < 0) break;

    std::vector<std::size_t> orphan_rows, pool_rows;
    for (std::size_t i = 0; i < n; ++i) {
      (member[i] == smallest ? orphan_rows : pool_rows).push_back(i);
    }
    const FeatureMatrix pool = gather_rows(features_of_view, pool_rows);
    for (std::size_t row : orphan_rows) {
      const std::size_t nn = nearest_neighbor(features_of_view.row(row), pool);
      member[row] = member[pool_rows[nn]];
      ++sizes[member[row]];
    }
    sizes[smallest] = 0;
    alive[smallest] = false;
    --alive_count;
  }

  // Renumber survivors contiguously, keeping the original order.
  std::vector<int> new_id(a.k, -1);
  int next = 0;
  for (int c = 0; c < a.k; ++c) {
    if (alive[c]) new_id[c] = next++;
  }
  for (auto& m : member) m = new_id[m];
  return make_assignment(a.class_id, std::move(member), next);
}

DiverseNegatives sample_diverse_negatives(
    const LabeledDataset& d, std::size_t count,
    const std::unordered_set<std::size_t>& exclude, std::uint64_t seed) {
  const std::size_t available = d.features.n_samples - exclude.size();
  if (count > available) {
    throw Error(ErrorKind::infeasible,
                "diverse negatives: want " + std::to_string(count) +
                    ", only " + std::to_string(available) + " eligible");
  }
  DiverseNegatives out;
  out.seed = seed;
  if (count == 0) return out;

  const auto views = class_views(d);
  Rng rng(seed);
  std::unordered_set<std::size_t> chosen;
  chosen.reserve(count * 2);
  const std::size_t max_attempts = 1000 + 200 * count;
  std::size_t attempts = 0;
  while (out.samples.size() < count && attempts < max_attempts) {
    ++attempts;
    const auto& view = views[std::size_t(rng.below(views.size()))];
    const std::size_t pick =
        view.sample_indices[std::size_t(rng.below(view.sample_indices.size()))];
    if (exclude.count(pick) || chosen.count(pick)) continue;
    chosen.insert(pick);
    out.samples.push_back(pick);
  }
  if (out.samples.size() < count) {
    // Rejection stalled (nearly everything excluded); fill from a shuffle of
    // the remaining eligible samples. Still deterministic in the seed.
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < d.features.n_samples; ++i) {
      if (!exclude.count(i) && !chosen.count(i)) eligible.push_back(i);
    }
    rng.shuffle(eligible);
    for (std::size_t i = 0; out.samples.size() < count; ++i) {
      out.samples.push_back(eligible[i]);
    }
  }
  return out;
}

std::vector<BinaryLinearModel> train_cluster_classifiers(
    const ClusterAssignment& pruned, const ClassView& view,
    const LabeledDataset& d, const BucbamConfig& cfg) {
  if (pruned.member_of.size() != view.sample_indices.size()) {
    throw Error(ErrorKind::dimension, "classifiers: view/assignment mismatch");
  }
  std::vector<BinaryLinearModel> models(pruned.k);
  // The positive cluster's whole class is excluded from the diverse
  // negatives. With few specific classes, class-equiprobable sampling puts
  // a large same-class fraction into c_d, and those samples train the
  // classifiers to reject sibling clusters across k-means cell boundaries;
  // with many classes the same-class fraction is negligible, so the
  // exclusion reproduces that regime.
  const std::unordered_set<std::size_t> exclude(view.sample_indices.begin(),
                                                view.sample_indices.end());
  for (int c = 0; c < pruned.k; ++c) {
    std::vector<std::size_t> members;  // global sample indices
    for (std::size_t i = 0; i < pruned.member_of.size(); ++i) {
      if (pruned.member_of[i] == c) members.push_back(view.sample_indices[i]);
    }
    const std::size_t neg_count = std::max<std::size_t>(
        1, std::size_t(std::llround(cfg.negatives_per_positive *
                                    double(members.size()))));
    const DiverseNegatives negatives = sample_diverse_negatives(
        d, std::min(neg_count, d.features.n_samples - exclude.size()),
        exclude,
        derive_seed(cfg.seed, "bucbam-negatives",
                    std::uint64_t(pruned.class_id) * 100000 +
                        std::uint64_t(c)));

    FeatureMatrix pos = gather_rows(d.features, members);
    FeatureMatrix neg = gather_rows(d.features, negatives.samples);
    LinearTrainOptions opt = cfg.classifier;
    opt.loss = LossKind::logistic;  // the similarity matrix needs [0,1]
    models[c] = train_binary(pos, neg, opt);
  }
  return models;
}

SimilarityMatrix build_similarity_matrix(
    const std::vector<BinaryLinearModel>& classifiers,
    const ClusterAssignment& pruned, const FeatureMatrix& features_of_view) {
  if (int(classifiers.size()) != pruned.k) {
    throw Error(ErrorKind::dimension,
                "similarity matrix: one classifier per cluster required");
  }
  SimilarityMatrix sm;
  sm.class_id = pruned.class_id;
  sm.size = pruned.k;
  sm.m.assign(std::size_t(pruned.k) * pruned.k, 0.0);
  for (int k = 0; k < pruned.k; ++k) {
    const std::vector<double> s = score(classifiers[k], features_of_view);
    std::vector<double> sum(pruned.k, 0.0);
    for (std::size_t i = 0; i < s.size(); ++i) {
      sum[pruned.member_of[i]] += s[i];
    }
    for (int l = 0; l < pruned.k; ++l) {
      sm.at(k, l) = sum[l] / double(pruned.sizes[l]);
    }
  }
  return sm;
}

MergePlan merge_clusters(const SimilarityMatrix& m, MergeMode mode,
                         double s_high, double s_med) {
  if (!(s_med < s_high)) {
    throw Error(ErrorKind::config, "merge: need S_M < S_H");
  }
  const int k = m.size;
  UnionFind uf(k);
  for (int a = 0; a < k; ++a) {
    for (int b = a + 1; b < k; ++b) {
      const double ab = m.at(a, b);
      const double ba = m.at(b, a);
      bool related;
      if (mode == MergeMode::SS) {
        related = ab > s_high && ba > s_high;
      } else {
        related = (ab > s_high && ba > s_med) || (ba > s_high && ab > s_med);
      }
      if (related) uf.unite(a, b);
    }
  }
  MergePlan plan;
  plan.class_id = m.class_id;
  plan.component_of.assign(k, -1);
  std::vector<int> root_to_component;
  for (int c = 0; c < k; ++c) {
    const int root = uf.find(c);
    int idx = -1;
    for (std::size_t r = 0; r < root_to_component.size(); ++r) {
      if (root_to_component[r] == root) idx = int(r);
    }
    if (idx < 0) {
      idx = int(root_to_component.size());
      root_to_component.push_back(root);
      plan.components.emplace_back();
    }
    plan.component_of[c] = idx;
    plan.components[idx].push_back(c);
  }
  plan.merged_count = int(plan.components.size());
  return plan;
}

BucbamResult bucbam_split(const LabeledDataset& d, const BucbamConfig& cfg) {
  validate(d);
  validate(cfg);
  const auto views = class_views(d);
  BucbamResult result;
  result.per_class.resize(views.size());
  std::vector<std::vector<std::string>> class_warnings(views.size());

  parallel_for(views.size(), [&](std::size_t c) {
    const ClassView& view = views[c];
    auto* warnings = &class_warnings[c];
    const std::uint64_t class_seed =
        derive_seed(cfg.seed, "bucbam-class", std::uint64_t(c));
    FeatureMatrix feats = gather_rows(d.features, view.sample_indices);

    BucbamClassResult r;
    r.initial =
        cfg.init == BucbamInit::kmeans
            ? split_kmeans(view, feats, cfg.k_initial, class_seed, warnings)
            : split_random_k(view, std::min<int>(cfg.k_initial,
                                                 int(view.sample_indices.size())),
                             class_seed, warnings);
    r.pruned = prune_small_clusters(r.initial, feats, cfg.min_cluster_size);
    if (r.pruned.k == 1) {
      // Single cluster: nothing to compare or merge.
      r.matrix.class_id = view.class_id;
      r.matrix.size = 1;
      r.matrix.m = {1.0};
      r.plan.class_id = view.class_id;
      r.plan.components = {{0}};
      r.plan.component_of = {0};
      r.plan.merged_count = 1;
      r.merged = r.pruned;
    } else {
      const auto classifiers =
          train_cluster_classifiers(r.pruned, view, d, cfg);
      r.matrix = build_similarity_matrix(classifiers, r.pruned, feats);
      r.plan = merge_clusters(r.matrix, cfg.merge_mode, cfg.s_high, cfg.s_med);
      std::vector<int> member(r.pruned.member_of.size());
      for (std::size_t i = 0; i < member.size(); ++i) {
        member[i] = r.plan.component_of[r.pruned.member_of[i]];
      }
      r.merged = make_assignment(view.class_id, std::move(member),
                                 r.plan.merged_count);
    }
    result.per_class[c] = std::move(r);
  });

  for (auto& w : class_warnings) {
    result.warnings.insert(result.warnings.end(), w.begin(), w.end());
  }
  result.assignments.reserve(views.size());
  for (const auto& r : result.per_class) {
    result.assignments.push_back(r.merged);
  }
  return result;
}

}  // namespace refinery
