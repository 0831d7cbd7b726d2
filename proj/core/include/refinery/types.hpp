#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace refinery {

enum class ErrorKind {
  io,             // file could not be opened / read / written
  format,         // bad magic, malformed header or CSV
  truncated,      // payload shorter than the header declares
  invalid_data,   // non-finite values, label gaps, coverage violations
  dimension,      // shape mismatch between operands
  config,         // bad configuration value
  divergence,     // optimization produced non-finite state
  infeasible,     // request cannot be satisfied (e.g. k > n)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

/// Dense row-major sample matrix. Values live as doubles in memory; the
/// on-disk FINF format stores 32-bit floats (see io.hpp).
struct FeatureMatrix {
  std::size_t n_samples = 0;
  std::size_t dim = 0;
  std::vector<double> values;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t n, std::size_t d)
      : n_samples(n), dim(d), values(n * d, 0.0) {}
  FeatureMatrix(std::size_t n, std::size_t d, std::vector<double> v)
      : n_samples(n), dim(d), values(std::move(v)) {}

  double& at(std::size_t i, std::size_t j) { return values[i * dim + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * dim + j]; }

  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * dim, dim};
  }
  std::span<double> row(std::size_t i) {
    return {values.data() + i * dim, dim};
  }
};

/// Throws Error(invalid_data) on size mismatch or non-finite entries.
void validate(const FeatureMatrix& m);

/// Samples labeled among `class_count` classes at one hierarchy level.
struct LabeledDataset {
  FeatureMatrix features;
  std::vector<int> labels;
  int level = 0;
  int class_count = 0;
};

/// Checks label range, length and that every class is non-empty.
void validate(const LabeledDataset& d);

/// The sample indices of one class, in increasing global order.
struct ClassView {
  int class_id = 0;
  std::vector<std::size_t> sample_indices;
};

/// One view per class; the views partition [0, n_samples).
std::vector<ClassView> class_views(const LabeledDataset& d);

/// Per-class clustering output: member_of[i] is the cluster of the i-th
/// sample of the class (in ClassView order).
struct ClusterAssignment {
  int class_id = 0;
  std::vector<int> member_of;
  int k = 0;
  std::vector<std::size_t> sizes;
};

/// Builds an assignment from raw cluster indices, computing sizes and
/// enforcing the partition invariants (indices in range, no empty cluster).
ClusterAssignment make_assignment(int class_id, std::vector<int> member_of,
                                  int k);

/// Rows of `m` selected by `indices`, in order.
FeatureMatrix gather_rows(const FeatureMatrix& m,
                          std::span<const std::size_t> indices);

double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace refinery
