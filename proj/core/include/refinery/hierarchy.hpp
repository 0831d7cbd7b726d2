#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "refinery/types.hpp"

namespace refinery {

struct NodeMeta {
  int source_class = -1;   // parent class at the previous level
  int local_cluster = -1;  // cluster index within that class; -1 for roots
};

/// Leveled class DAG. Edges only connect consecutive levels and every
/// non-root node has exactly one parent.
struct Hierarchy {
  std::vector<std::vector<int>> levels;      // node ids per level
  std::vector<std::pair<int, int>> edges;    // (parent, child)
  std::map<int, NodeMeta> node_meta;

  static Hierarchy base(int n_classes);
  int node_count() const;
};

/// Per-sample labels at the appended finer level, with the finer -> specific
/// parent map. Finer ids are contiguous, class-major then cluster-minor.
struct FinerAssignment {
  std::vector<int> finer_labels;
  int finer_class_count = 0;
  std::vector<int> parent_map;
};

struct FinerLevelResult {
  Hierarchy hierarchy;
  FinerAssignment assignment;
};

/// Appends level l+1 from one ClusterAssignment per leaf class. Each
/// assignment must cover exactly that class's samples (in ClassView order).
FinerLevelResult add_finer_level(const Hierarchy& h, const LabeledDataset& d,
                                 const std::vector<ClusterAssignment>& splits);

/// Same features, labels replaced by the finer ids.
LabeledDataset relabel_dataset(const LabeledDataset& d,
                               const FinerAssignment& fa);

/// Structural check; returns human-readable violations (empty when valid).
std::vector<std::string> validate_hierarchy(const Hierarchy& h);

void save_hierarchy(const Hierarchy& h, const std::filesystem::path& path);
Hierarchy load_hierarchy(const std::filesystem::path& path);

/// CSV `sample,specific_class,finer_class`.
void save_finer_assignment(const FinerAssignment& fa,
                           std::span<const int> specific_labels,
                           const std::filesystem::path& path);
FinerAssignment load_finer_assignment(const std::filesystem::path& path,
                                      std::size_t n_samples);

}  // namespace refinery
