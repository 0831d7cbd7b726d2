#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "refinery/eval.hpp"
#include "refinery/hierarchy.hpp"
#include "refinery/types.hpp"

namespace refinery {

/// Planted-ground-truth generator: each class is a mixture of G hidden
/// subconcepts (isotropic Gaussians) whose centers keep pairwise distance
/// >= separation * within_std.
struct SynthSpec {
  int n_classes = 10;
  int subconcepts_per_class = 3;
  int samples_per_subconcept = 60;
  int dim = 16;
  double within_std = 1.0;
  double separation = 6.0;
  std::uint64_t seed = 42;
};

void validate(const SynthSpec& spec);

struct PlantedTruth {
  std::vector<int> subconcept_labels;  // global subconcept id per sample
  std::vector<int> class_labels;
  FeatureMatrix centers;               // (n_classes * G) x dim
};

struct SourceData {
  LabeledDataset dataset;
  PlantedTruth truth;
};

SourceData generate_source(const SynthSpec& spec);

enum class TargetKind { subconcept_id, recombined, shifted };

TargetKind target_kind_from_name(const std::string& name);
std::string target_kind_name(TargetKind kind);

/// Fresh train/test samples from the planted generative process:
///   subconcept_id - classify the G*C subconcepts;
///   recombined    - classes union subconcepts of different source classes;
///   shifted       - subconcept task with centers perturbed by within_std.
std::vector<TargetTask> generate_targets(const PlantedTruth& truth,
                                         const SynthSpec& spec,
                                         std::span<const TargetKind> kinds,
                                         int train_per_subconcept = 1,
                                         int test_per_subconcept = 20);

/// Chance-corrected partition agreement in [-1, 1]; 1 iff the partitions
/// are identical up to renaming.
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

struct AriReport {
  double global = 0.0;
  std::vector<double> per_class;
};

/// ARI of the recovered finer labels against the planted subconcepts,
/// globally and restricted to each class.
AriReport planted_ari(const FinerAssignment& fa, const PlantedTruth& truth);

}  // namespace refinery
