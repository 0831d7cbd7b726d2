#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "refinery/rng.hpp"
#include "refinery/types.hpp"

namespace testutil {

using refinery::FeatureMatrix;
using refinery::LabeledDataset;

inline FeatureMatrix matrix_from(std::size_t n, std::size_t d,
                                 std::initializer_list<double> values) {
  FeatureMatrix m(n, d);
  std::size_t i = 0;
  for (double v : values) m.values[i++] = v;
  return m;
}

inline FeatureMatrix random_matrix(std::size_t n, std::size_t d,
                                   refinery::Rng& rng, double scale = 1.0) {
  FeatureMatrix m(n, d);
  for (auto& v : m.values) v = scale * rng.normal();
  return m;
}

/// Random finite f32 values stored as doubles (the FINF on-disk domain).
inline FeatureMatrix random_f32_matrix(std::size_t n, std::size_t d,
                                       refinery::Rng& rng) {
  FeatureMatrix m(n, d);
  for (auto& v : m.values) {
    v = double(float((rng.uniform() - 0.5) * 2.0e6));
  }
  return m;
}

/// Isotropic Gaussian blobs at the given centers; labels follow center
/// order, `per` samples each.
inline LabeledDataset blobs(const std::vector<std::vector<double>>& centers,
                            std::size_t per, double std_dev,
                            refinery::Rng& rng) {
  const std::size_t d = centers[0].size();
  LabeledDataset out;
  out.features = FeatureMatrix(centers.size() * per, d);
  out.class_count = int(centers.size());
  std::size_t row = 0;
  for (std::size_t c = 0; c < centers.size(); ++c) {
    for (std::size_t s = 0; s < per; ++s, ++row) {
      for (std::size_t j = 0; j < d; ++j) {
        out.features.at(row, j) = centers[c][j] + std_dev * rng.normal();
      }
      out.labels.push_back(int(c));
    }
  }
  return out;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("refinery_test_" + tag + "_" + std::to_string(counter()++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace testutil
