#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "refinery/types.hpp"

namespace refinery {

// FINF binary feature format:
//   bytes 0-3   magic "FINF"
//   bytes 4-7   version u32 = 1 (little-endian)
//   bytes 8-15  n_samples u64
//   bytes 16-19 dim u32
//   bytes 20-23 reserved, zero
//   then n_samples*dim f32, little-endian, row-major.
void save_features(const FeatureMatrix& m, const std::filesystem::path& path);
FeatureMatrix load_features(const std::filesystem::path& path);

struct LabelFile {
  std::vector<int> labels;
  int class_count = 0;
};

/// CSV manifest with header `sample,label`; every sample in [0, n_samples)
/// must appear exactly once and every class in [0, max] must be non-empty.
LabelFile load_labels(const std::filesystem::path& path,
                      std::size_t n_samples);
void save_labels(std::span<const int> labels,
                 const std::filesystem::path& path);

/// Multi-label variant: repeated `sample,label` rows accumulate into
/// per-sample label sets (used by mAP target tasks).
std::vector<std::vector<int>> load_multilabels(
    const std::filesystem::path& path, std::size_t n_samples);

// FINT tensor container (model checkpoints). Same header idiom as FINF but
// stores named f64 tensors so reloaded models score bit-identically.
struct NamedTensor {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;
};

void save_tensors(std::span<const NamedTensor> tensors,
                  const std::filesystem::path& path);
std::vector<NamedTensor> load_tensors(const std::filesystem::path& path);

/// Finds a tensor by name or throws Error(format).
const NamedTensor& find_tensor(std::span<const NamedTensor> tensors,
                               std::string_view name);

}  // namespace refinery
