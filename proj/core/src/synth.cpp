#include "refinery/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "refinery/rng.hpp"

namespace refinery {

void validate(const SynthSpec& spec) {
  if (spec.n_classes < 1 || spec.subconcepts_per_class < 1 ||
      spec.samples_per_subconcept < 1 || spec.dim < 1) {
    throw Error(ErrorKind::config, "synth: all counts must be >= 1");
  }
  if (!(spec.within_std > 0.0)) {
    throw Error(ErrorKind::config, "synth: within_std must be > 0");
  }
  if (!(spec.separation > 0.0)) {
    throw Error(ErrorKind::config, "synth: separation must be > 0");
  }
}

namespace {

// Centers drawn i.i.d. Gaussian on a frame scaled so the minimum pairwise
// distance barely clears the separation constraint (redrawn until it does).
// The tight scale keeps every subconcept surrounded by others, which the
// cluster classifiers rely on for grounded negatives.
FeatureMatrix draw_centers(const SynthSpec& spec, Rng& rng) {
  const int total = spec.n_classes * spec.subconcepts_per_class;
  const double min_dist = spec.separation * spec.within_std;
  const double frame_std =
      2.0 * min_dist / std::sqrt(2.0 * double(spec.dim));
  for (int attempt = 0; attempt < 1000; ++attempt) {
    FeatureMatrix centers(total, std::size_t(spec.dim));
    for (auto& v : centers.values) v = frame_std * rng.normal();
    bool ok = true;
    for (int a = 0; a < total && ok; ++a) {
      for (int b = a + 1; b < total && ok; ++b) {
        if (squared_distance(centers.row(a), centers.row(b)) <
            min_dist * min_dist) {
          ok = false;
        }
      }
    }
    if (ok) return centers;
  }
  throw Error(ErrorKind::infeasible,
              "synth: could not place " + std::to_string(total) +
                  " centers at separation " + std::to_string(spec.separation) +
                  " after 1000 attempts; increase dim or lower separation");
}

void sample_around(const FeatureMatrix& centers, int subconcept,
                   double within_std, Rng& rng, std::span<double> out) {
  const auto c = centers.row(std::size_t(subconcept));
  for (std::size_t j = 0; j < c.size(); ++j) {
    out[j] = c[j] + within_std * rng.normal();
  }
}

// Groups the drawn centers into classes so that each class gets mutually
// anti-aligned subconcepts (greedy minimum-cosine pick). Classes are
// mixtures of dissimilar semantics, which is the premise the refinement
// exploits; aligned directions ending up in one class would model duplicate
// subconcepts instead. Returns center row index per (class, slot),
// class-major.
std::vector<int> disperse_class_assignment(const FeatureMatrix& centers,
                                           int n_classes, int g) {
  const int total = n_classes * g;
  // Pair danger: same-class subconcepts should be neither aligned in
  // direction nor near in distance (either lets the refinement confuse
  // them). Both terms live in [-1, 1]-ish with high = bad.
  double min_d2 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < total; ++a) {
    for (int b = a + 1; b < total; ++b) {
      min_d2 = std::min(min_d2,
                        squared_distance(centers.row(std::size_t(a)),
                                         centers.row(std::size_t(b))));
    }
  }
  auto cosine = [&](int a, int b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    const auto ra = centers.row(std::size_t(a));
    const auto rb = centers.row(std::size_t(b));
    for (std::size_t j = 0; j < ra.size(); ++j) {
      dot += ra[j] * rb[j];
      na += ra[j] * ra[j];
      nb += rb[j] * rb[j];
    }
    const double denom = std::sqrt(na * nb);
    const double cos = denom > 0.0 ? dot / denom : 0.0;
    const double proximity =
        min_d2 / squared_distance(ra, rb);  // 1 at the closest pair
    return std::max(cos, proximity);
  };
  std::vector<bool> taken(total, false);
  std::vector<std::vector<int>> members(n_classes);

  // Round one: a pole per class, mutually anti-aligned (farthest-point
  // greedy in cosine, starting from center 0).
  members[0].push_back(0);
  taken[0] = true;
  for (int c = 1; c < n_classes; ++c) {
    int best = -1;
    double best_score = std::numeric_limits<double>::infinity();
    for (int i = 0; i < total; ++i) {
      if (taken[i]) continue;
      double aligned = -1.0;
      for (int oc = 0; oc < c; ++oc) {
        aligned = std::max(aligned, cosine(i, members[oc][0]));
      }
      if (aligned < best_score) {
        best_score = aligned;
        best = i;
      }
    }
    members[c].push_back(best);
    taken[best] = true;
  }

  // Remaining rounds: classes pick in most-constrained-first order so no
  // class is left with only aligned leftovers.
  for (int round = 1; round < g; ++round) {
    std::vector<bool> filled(n_classes, false);
    for (int turn = 0; turn < n_classes; ++turn) {
      // For every unfilled class, its best available pick.
      int pick_class = -1, pick_center = -1;
      double pick_score = -1.0;  // the WORST best-score goes first
      for (int c = 0; c < n_classes; ++c) {
        if (filled[c]) continue;
        int best = -1;
        double best_score = std::numeric_limits<double>::infinity();
        for (int i = 0; i < total; ++i) {
          if (taken[i]) continue;
          double aligned = -1.0;
          for (int m : members[c]) aligned = std::max(aligned, cosine(i, m));
          if (aligned < best_score) {
            best_score = aligned;
            best = i;
          }
        }
        if (best_score > pick_score) {
          pick_score = best_score;
          pick_class = c;
          pick_center = best;
        }
      }
      members[pick_class].push_back(pick_center);
      taken[pick_center] = true;
      filled[pick_class] = true;
    }
  }

  std::vector<int> order;
  order.reserve(total);
  for (int c = 0; c < n_classes; ++c) {
    order.insert(order.end(), members[c].begin(), members[c].end());
  }
  return order;
}

}  // namespace

SourceData generate_source(const SynthSpec& spec) {
  validate(spec);
  Rng center_rng(derive_seed(spec.seed, "synth-centers"));
  FeatureMatrix drawn = draw_centers(spec, center_rng);
  const std::vector<int> order = disperse_class_assignment(
      drawn, spec.n_classes, spec.subconcepts_per_class);
  FeatureMatrix centers(drawn.n_samples, drawn.dim);
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const auto src = drawn.row(std::size_t(order[pos]));
    std::copy(src.begin(), src.end(), centers.row(pos).begin());
  }

  const int g = spec.subconcepts_per_class;
  const int total_sub = spec.n_classes * g;
  const std::size_t n =
      std::size_t(total_sub) * std::size_t(spec.samples_per_subconcept);

  SourceData out;
  out.dataset.features = FeatureMatrix(n, std::size_t(spec.dim));
  out.dataset.labels.resize(n);
  out.dataset.class_count = spec.n_classes;
  out.dataset.level = 0;
  out.truth.subconcept_labels.resize(n);
  out.truth.class_labels.resize(n);

  std::size_t row = 0;
  for (int sub = 0; sub < total_sub; ++sub) {
    Rng rng(derive_seed(spec.seed, "synth-samples", std::uint64_t(sub)));
    for (int s = 0; s < spec.samples_per_subconcept; ++s, ++row) {
      sample_around(centers, sub, spec.within_std, rng,
                    out.dataset.features.row(row));
      out.dataset.labels[row] = sub / g;
      out.truth.subconcept_labels[row] = sub;
      out.truth.class_labels[row] = sub / g;
    }
  }
  out.truth.centers = std::move(centers);
  return out;
}

TargetKind target_kind_from_name(const std::string& name) {
  if (name == "subconcept_id") return TargetKind::subconcept_id;
  if (name == "recombined") return TargetKind::recombined;
  if (name == "shifted") return TargetKind::shifted;
  throw Error(ErrorKind::config, "unknown target kind '" + name + "'");
}

std::string target_kind_name(TargetKind kind) {
  switch (kind) {
    case TargetKind::subconcept_id: return "subconcept_id";
    case TargetKind::recombined: return "recombined";
    case TargetKind::shifted: return "shifted";
  }
  return "?";
}

namespace {

// Groups global subconcept ids into recombined classes, pairing subconcept
// g of class c with subconcept g of class c+1 (consecutive class pairs), so
// a recombined class never unions two subconcepts of one source class.
// With an odd class count the last class's subconcepts stay singleton
// groups.
std::vector<int> recombined_class_of(int n_classes, int g) {
  std::vector<int> group(std::size_t(n_classes) * g, -1);
  int next = 0;
  for (int c = 0; c + 1 < n_classes; c += 2) {
    for (int j = 0; j < g; ++j) {
      group[std::size_t(c) * g + j] = next;
      group[std::size_t(c + 1) * g + j] = next;
      ++next;
    }
  }
  if (n_classes % 2 == 1) {
    const int last = n_classes - 1;
    for (int j = 0; j < g; ++j) {
      group[std::size_t(last) * g + j] = next++;
    }
  }
  return group;
}

LabeledDataset sample_split(const FeatureMatrix& centers,
                            std::span<const int> class_of_subconcept,
                            int class_count, int per_subconcept,
                            double within_std, std::uint64_t seed) {
  const int total_sub = int(centers.n_samples);
  LabeledDataset d;
  d.features =
      FeatureMatrix(std::size_t(total_sub) * per_subconcept, centers.dim);
  d.labels.resize(d.features.n_samples);
  d.class_count = class_count;
  std::size_t row = 0;
  for (int sub = 0; sub < total_sub; ++sub) {
    Rng rng(derive_seed(seed, "synth-target-sub", std::uint64_t(sub)));
    for (int s = 0; s < per_subconcept; ++s, ++row) {
      sample_around(centers, sub, within_std, rng, d.features.row(row));
      d.labels[row] = class_of_subconcept[sub];
    }
  }
  return d;
}

}  // namespace

std::vector<TargetTask> generate_targets(const PlantedTruth& truth,
                                         const SynthSpec& spec,
                                         std::span<const TargetKind> kinds,
                                         int train_per_subconcept,
                                         int test_per_subconcept) {
  if (truth.centers.n_samples == 0) {
    throw Error(ErrorKind::invalid_data, "generate_targets: no centers");
  }
  const int g = spec.subconcepts_per_class;
  const int total_sub = spec.n_classes * g;

  std::vector<TargetTask> tasks;
  for (TargetKind kind : kinds) {
    TargetTask task;
    task.name = target_kind_name(kind);
    task.metric = Metric::accuracy;

    std::vector<int> class_of(total_sub);
    const FeatureMatrix* centers = &truth.centers;
    FeatureMatrix shifted_centers;
    int class_count = 0;

    switch (kind) {
      case TargetKind::subconcept_id: {
        for (int s = 0; s < total_sub; ++s) class_of[s] = s;
        class_count = total_sub;
        break;
      }
      case TargetKind::recombined: {
        class_of = recombined_class_of(spec.n_classes, g);
        class_count = 1 + *std::max_element(class_of.begin(), class_of.end());
        break;
      }
      case TargetKind::shifted: {
        for (int s = 0; s < total_sub; ++s) class_of[s] = s;
        class_count = total_sub;
        shifted_centers = truth.centers;
        Rng rng(derive_seed(spec.seed, "synth-shift"));
        for (int s = 0; s < total_sub; ++s) {
          // unit perturbation of length exactly within_std
          std::vector<double> u(shifted_centers.dim);
          double norm = 0.0;
          for (auto& v : u) {
            v = rng.normal();
            norm += v * v;
          }
          norm = std::sqrt(norm);
          auto row = shifted_centers.row(std::size_t(s));
          for (std::size_t j = 0; j < row.size(); ++j) {
            row[j] += spec.within_std * u[j] / norm;
          }
        }
        centers = &shifted_centers;
        break;
      }
    }

    const std::uint64_t train_seed =
        derive_seed(spec.seed, "synth-target-train",
                    std::uint64_t(int(kind)) + 1);
    const std::uint64_t test_seed = derive_seed(
        spec.seed, "synth-target-test", std::uint64_t(int(kind)) + 1);
    task.train = sample_split(*centers, class_of, class_count,
                              train_per_subconcept, spec.within_std,
                              train_seed);
    task.test = sample_split(*centers, class_of, class_count,
                             test_per_subconcept, spec.within_std, test_seed);
    tasks.push_back(std::move(task));
  }
  return tasks;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size() || a.empty()) {
    throw Error(ErrorKind::dimension, "ARI: length mismatch or empty");
  }
  auto relabel = [](std::span<const int> v, std::vector<int>& out) {
    std::vector<int> uniq(v.begin(), v.end());
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    out.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      out[i] = int(std::lower_bound(uniq.begin(), uniq.end(), v[i]) -
                   uniq.begin());
    }
    return int(uniq.size());
  };
  std::vector<int> la, lb;
  const int ka = relabel(a, la);
  const int kb = relabel(b, lb);

  std::vector<double> cont(std::size_t(ka) * kb, 0.0);
  std::vector<double> row_sum(ka, 0.0), col_sum(kb, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    cont[std::size_t(la[i]) * kb + lb[i]] += 1.0;
    row_sum[la[i]] += 1.0;
    col_sum[lb[i]] += 1.0;
  }
  auto comb2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double sum_ij = 0.0;
  for (double v : cont) sum_ij += comb2(v);
  double sum_a = 0.0;
  for (double v : row_sum) sum_a += comb2(v);
  double sum_b = 0.0;
  for (double v : col_sum) sum_b += comb2(v);
  const double total = comb2(double(a.size()));
  const double expected = sum_a * sum_b / total;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;  // both partitions degenerate
  return (sum_ij - expected) / (max_index - expected);
}

AriReport planted_ari(const FinerAssignment& fa, const PlantedTruth& truth) {
  if (fa.finer_labels.size() != truth.subconcept_labels.size()) {
    throw Error(ErrorKind::dimension, "planted_ari: coverage mismatch");
  }
  AriReport report;
  report.global =
      adjusted_rand_index(fa.finer_labels, truth.subconcept_labels);
  const int classes =
      1 + *std::max_element(truth.class_labels.begin(),
                            truth.class_labels.end());
  report.per_class.resize(classes, 0.0);
  for (int c = 0; c < classes; ++c) {
    std::vector<int> got, want;
    for (std::size_t i = 0; i < fa.finer_labels.size(); ++i) {
      if (truth.class_labels[i] == c) {
        got.push_back(fa.finer_labels[i]);
        want.push_back(truth.subconcept_labels[i]);
      }
    }
    report.per_class[c] = adjusted_rand_index(got, want);
  }
  return report;
}

}  // namespace refinery
