#include "refinery/pipeline.hpp"

#include "refinery/rng.hpp"

namespace refinery {

std::vector<SweepRow> k_sweep(const LabeledDataset& source,
                              std::span<const int> ks,
                              const std::vector<TargetTask>& tasks,
                              const SweepConfig& cfg) {
  if (ks.empty()) {
    throw Error(ErrorKind::config, "k_sweep: empty K list");
  }
  for (int k : ks) {
    if (k < 1) throw Error(ErrorKind::config, "k_sweep: K values must be >= 1");
  }
  std::vector<SweepRow> rows;
  rows.reserve(ks.size());
  for (int k : ks) {
    SplitSpec split;
    split.method = splitter_name(cfg.splitter);
    split.k = k;
    BucbamConfig unused;
    const RefinementArtifacts art =
        run_refinement(source, cfg.spe_probe, cfg.fine_probe, split, unused,
                       derive_seed(cfg.seed, "sweep", std::uint64_t(k)));
    const EvalReport fine = evaluate_representation(
        fine_extractor(art.fine_model), "finet", tasks, cfg.eval_probe);
    const EvalReport fused = evaluate_representation(
        fused_extractor(art.spe_model, art.fine_model), "spefinet", tasks,
        cfg.eval_probe);
    rows.push_back({k, fine.average, fused.average});
  }
  return rows;
}

}  // namespace refinery
