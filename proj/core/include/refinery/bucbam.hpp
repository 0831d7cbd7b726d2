#pragma once

#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "refinery/linear.hpp"
#include "refinery/types.hpp"

namespace refinery {

enum class MergeMode { SS, AS };

MergeMode merge_mode_from_name(const std::string& name);
std::string merge_mode_name(MergeMode mode);

enum class BucbamInit { kmeans, random };

struct BucbamConfig {
  int k_initial = 32;
  int min_cluster_size = 15;           // S
  double s_high = 0.8;                 // S_H
  double s_med = 0.4;                  // S_M, S_H / 2 by default
  MergeMode merge_mode = MergeMode::SS;
  std::uint64_t seed = 0;
  double negatives_per_positive = 1.0;
  BucbamInit init = BucbamInit::kmeans;
  // Psi training budget; calibrated so classifiers of similar clusters score
  // near 1.0 while regions they never saw stay clear of S_H.
  LinearTrainOptions classifier{LossKind::logistic, 1e-2, 2000, 0.1};
};

void validate(const BucbamConfig& cfg);

/// K^P x K^P matrix; entry (k, l) is the mean score of classifier k over the
/// samples of cluster l.
struct SimilarityMatrix {
  int class_id = 0;
  int size = 0;
  std::vector<double> m;
  double at(int k, int l) const { return m[std::size_t(k) * size + l]; }
  double& at(int k, int l) { return m[std::size_t(k) * size + l]; }
};

struct MergePlan {
  int class_id = 0;
  std::vector<std::vector<int>> components;  // partition of [0, K^P)
  std::vector<int> component_of;             // pruned cluster -> component
  int merged_count = 0;                      // K^M
};

struct DiverseNegatives {
  std::vector<std::size_t> samples;
  std::uint64_t seed = 0;
};

/// Reassigns every sample of a cluster smaller than S to the cluster of its
/// 1-NN among samples of clusters with size >= S. When no cluster reaches S
/// the whole class collapses to a single cluster.
ClusterAssignment prune_small_clusters(const ClusterAssignment& a,
                                       const FeatureMatrix& features_of_view,
                                       int min_cluster_size);

/// Class-equiprobable sampling without replacement: pick a class uniformly,
/// then a sample uniformly within it, rejecting excluded or repeated picks.
DiverseNegatives sample_diverse_negatives(
    const LabeledDataset& d, std::size_t count,
    const std::unordered_set<std::size_t>& exclude, std::uint64_t seed);

/// One logistic classifier per pruned cluster: cluster samples as positives
/// against an equal-sized diverse negative set.
std::vector<BinaryLinearModel> train_cluster_classifiers(
    const ClusterAssignment& pruned, const ClassView& view,
    const LabeledDataset& d, const BucbamConfig& cfg);

SimilarityMatrix build_similarity_matrix(
    const std::vector<BinaryLinearModel>& classifiers,
    const ClusterAssignment& pruned, const FeatureMatrix& features_of_view);

/// SS: merge k,l iff M[k,l] > S_H and M[l,k] > S_H.
/// AS: merge k,l iff one of M[k,l], M[l,k] exceeds S_H and the other
/// exceeds S_M. Merged groups are connected components of the relation.
MergePlan merge_clusters(const SimilarityMatrix& m, MergeMode mode,
                         double s_high, double s_med);

struct BucbamClassResult {
  ClusterAssignment initial;
  ClusterAssignment pruned;
  ClusterAssignment merged;
  SimilarityMatrix matrix;
  MergePlan plan;
};

struct BucbamResult {
  std::vector<BucbamClassResult> per_class;
  std::vector<ClusterAssignment> assignments;  // merged, one per class
  std::vector<std::string> warnings;
};

/// Full per-class pipeline: fixed-K split, prune, classifiers, similarity
/// matrix, merge. `d.features` must already be the representation the
/// clusters are formed in (the probe's penultimate features).
BucbamResult bucbam_split(const LabeledDataset& d, const BucbamConfig& cfg);

}  // namespace refinery
