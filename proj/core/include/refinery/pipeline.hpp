#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "refinery/bucbam.hpp"
#include "refinery/eval.hpp"
#include "refinery/hierarchy.hpp"
#include "refinery/probe.hpp"
#include "refinery/splitters.hpp"
#include "refinery/synth.hpp"
#include "refinery/toml.hpp"

namespace refinery {

struct ProbeSpec {
  std::size_t hidden_dim = 128;
  TrainConfig train;
};

/// Splitting stage choice; method is a splitter name or "bucbam".
struct SplitSpec {
  std::string method = "bucbam";
  int k = 8;                // fixed-K splitters
  double bandwidth = 1.0;   // meanshift
  double damping = 0.7;     // affinity
};

struct PipelineConfig {
  // Exactly one source: explicit data files or a synthetic spec.
  std::string features_path;
  std::string labels_path;
  std::optional<SynthSpec> synth;

  // The SpeNet probe trains longer than the FiNet probe by default; its
  // representation is both the clustering space and the reference baseline.
  ProbeSpec spe_probe{128, TrainConfig{100, 32, 0.05, 0.9, 1e-4, 0}};
  ProbeSpec fine_probe{128, TrainConfig{60, 32, 0.05, 0.9, 1e-4, 0}};
  SplitSpec split;
  BucbamConfig bucbam;

  std::string tasks_manifest;  // required in data mode; synth mode generates
  LinearTrainOptions eval_probe{LossKind::hinge, 1e-3, 3000, 0.5};
  int target_train_per = 1;  // synth targets are deliberately few-shot
  int target_test_per = 20;

  std::string out_dir = "run";
  std::uint64_t seed = 42;
};

/// Reads a TOML document into a PipelineConfig and validates it.
PipelineConfig parse_pipeline_config(const TomlTable& table);
void validate(const PipelineConfig& cfg);

/// Canonical JSON echo of the effective config (stable key order).
std::string config_echo_json(const PipelineConfig& cfg);
std::uint64_t config_hash(const PipelineConfig& cfg);

/// JSON tasks manifest -> target tasks. Relative paths resolve against the
/// manifest's directory.
std::vector<TargetTask> load_tasks_manifest(
    const std::filesystem::path& path);
void save_tasks_manifest(const std::vector<TargetTask>& tasks,
                         const std::filesystem::path& dir,
                         const std::string& manifest_name);

/// Source -> SpeNet probe -> penultimate features -> split -> finer level ->
/// FiNet probe, with every intermediate retained.
struct RefinementArtifacts {
  ProbeModel spe_model;
  FeatureMatrix spe_features;
  std::vector<ClusterAssignment> assignments;
  Hierarchy hierarchy;
  FinerAssignment finer;
  LabeledDataset finer_dataset;
  ProbeModel fine_model;
  std::optional<BucbamResult> bucbam;
  std::vector<std::string> warnings;
};

RefinementArtifacts run_refinement(const LabeledDataset& source,
                                   const ProbeSpec& spe, const ProbeSpec& fine,
                                   const SplitSpec& split,
                                   const BucbamConfig& bucbam_cfg,
                                   std::uint64_t master_seed);

Extractor spe_extractor(const ProbeModel& spe);
Extractor fine_extractor(const ProbeModel& fine);
Extractor fused_extractor(const ProbeModel& spe, const ProbeModel& fine);

struct RunResult {
  std::filesystem::path run_dir;
  EvalReport spe;
  EvalReport fine;
  EvalReport spefine;
  std::optional<AriReport> recovery;  // synth mode only
};

/// Executes the full stage sequence and writes every artifact plus a
/// manifest into the run directory. Wall-clock timings go to timings.json
/// only, so a rerun with the same config is byte-identical elsewhere.
RunResult run_pipeline(const PipelineConfig& cfg);

struct SweepConfig {
  ProbeSpec spe_probe;
  ProbeSpec fine_probe;
  SplitterKind splitter = SplitterKind::kmeans;
  LinearTrainOptions eval_probe{LossKind::hinge, 1e-3, 3000, 0.5};
  std::uint64_t seed = 42;
};

/// Full FiNet/SpeFiNet pipeline per K; one row per K value.
std::vector<SweepRow> k_sweep(const LabeledDataset& source,
                              std::span<const int> ks,
                              const std::vector<TargetTask>& tasks,
                              const SweepConfig& cfg);

}  // namespace refinery
