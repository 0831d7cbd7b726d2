#include "refinery/types.hpp"

#include <algorithm>
#include <cmath>

namespace refinery {

void validate(const FeatureMatrix& m) {
  if (m.values.size() != m.n_samples * m.dim) {
    throw Error(ErrorKind::invalid_data,
                "feature matrix: values length " +
                    std::to_string(m.values.size()) + " != " +
                    std::to_string(m.n_samples) + " x " +
                    std::to_string(m.dim));
  }
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    if (!std::isfinite(m.values[i])) {
      throw Error(ErrorKind::invalid_data,
                  "feature matrix: non-finite value at flat index " +
                      std::to_string(i));
    }
  }
}

void validate(const LabeledDataset& d) {
  validate(d.features);
  if (d.labels.size() != d.features.n_samples) {
    throw Error(ErrorKind::invalid_data,
                "dataset: labels length " + std::to_string(d.labels.size()) +
                    " != n_samples " + std::to_string(d.features.n_samples));
  }
  if (d.class_count < 1) {
    throw Error(ErrorKind::invalid_data, "dataset: class_count < 1");
  }
  std::vector<std::size_t> counts(d.class_count, 0);
  for (std::size_t i = 0; i < d.labels.size(); ++i) {
    int y = d.labels[i];
    if (y < 0 || y >= d.class_count) {
      throw Error(ErrorKind::invalid_data,
                  "dataset: label " + std::to_string(y) + " of sample " +
                      std::to_string(i) + " outside [0, " +
                      std::to_string(d.class_count) + ")");
    }
    ++counts[y];
  }
  for (int c = 0; c < d.class_count; ++c) {
    if (counts[c] == 0) {
      throw Error(ErrorKind::invalid_data,
                  "dataset: class " + std::to_string(c) + " has no samples");
    }
  }
}

std::vector<ClassView> class_views(const LabeledDataset& d) {
  std::vector<ClassView> views(d.class_count);
  for (int c = 0; c < d.class_count; ++c) views[c].class_id = c;
  for (std::size_t i = 0; i < d.labels.size(); ++i) {
    views[d.labels[i]].sample_indices.push_back(i);
  }
  return views;
}

ClusterAssignment make_assignment(int class_id, std::vector<int> member_of,
                                  int k) {
  if (k < 1) throw Error(ErrorKind::invalid_data, "assignment: k < 1");
  std::vector<std::size_t> sizes(k, 0);
  for (int c : member_of) {
    if (c < 0 || c >= k) {
      throw Error(ErrorKind::invalid_data,
                  "assignment: cluster index " + std::to_string(c) +
                      " outside [0, " + std::to_string(k) + ")");
    }
    ++sizes[c];
  }
  for (int c = 0; c < k; ++c) {
    if (sizes[c] == 0) {
      throw Error(ErrorKind::invalid_data,
                  "assignment: empty cluster " + std::to_string(c) +
                      " in class " + std::to_string(class_id));
    }
  }
  ClusterAssignment a;
  a.class_id = class_id;
  a.member_of = std::move(member_of);
  a.k = k;
  a.sizes = std::move(sizes);
  return a;
}

FeatureMatrix gather_rows(const FeatureMatrix& m,
                          std::span<const std::size_t> indices) {
  FeatureMatrix out(indices.size(), m.dim);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    auto src = m.row(indices[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace refinery
