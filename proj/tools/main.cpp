// refinery: refine labeled feature datasets into finer sub-classes, retrain
// probe networks on them, fuse representations and measure transfer quality.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "refinery/bucbam.hpp"
#include "refinery/eval.hpp"
#include "refinery/fusion.hpp"
#include "refinery/hierarchy.hpp"
#include "refinery/io.hpp"
#include "refinery/pipeline.hpp"
#include "refinery/probe.hpp"
#include "refinery/rng.hpp"
#include "refinery/splitters.hpp"
#include "refinery/stats.hpp"
#include "refinery/synth.hpp"
#include "refinery/toml.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace refinery;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

LabeledDataset load_dataset(const std::string& features_path,
                            const std::string& labels_path) {
  LabeledDataset d;
  d.features = load_features(features_path);
  auto labels = load_labels(labels_path, d.features.n_samples);
  d.labels = std::move(labels.labels);
  d.class_count = labels.class_count;
  validate(d);
  return d;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

int cmd_synth(const SynthSpec& spec, int train_per, int test_per,
              const std::string& out_dir) {
  SourceData data = generate_source(spec);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  save_features(data.dataset.features, dir / "source_features.finf");
  save_labels(data.dataset.labels, dir / "source_labels.csv");
  save_labels(data.truth.subconcept_labels, dir / "truth.csv");
  const TargetKind kinds[] = {TargetKind::subconcept_id,
                              TargetKind::recombined, TargetKind::shifted};
  const auto tasks =
      generate_targets(data.truth, spec, kinds, train_per, test_per);
  save_tasks_manifest(tasks, dir, "tasks.json");
  std::cout << "wrote " << data.dataset.features.n_samples << " samples, "
            << data.truth.centers.n_samples << " subconcepts, "
            << tasks.size() << " target tasks to " << out_dir << "\n";
  return 0;
}

int cmd_train_probe(const std::string& features, const std::string& labels,
                    int hidden, const TrainConfig& cfg,
                    const std::string& out) {
  const LabeledDataset d = load_dataset(features, labels);
  std::vector<double> losses;
  const ProbeModel model =
      train_probe(d, std::size_t(hidden), cfg, &losses);
  save_probe(model, out);
  std::printf("trained probe: dim=%zu hidden=%zu classes=%zu epochs=%d "
              "loss %.6f -> %.6f\n",
              model.input_dim, model.hidden_dim, model.class_count,
              cfg.epochs, losses.empty() ? 0.0 : losses.front(),
              losses.empty() ? 0.0 : losses.back());
  return 0;
}

int cmd_extract(const std::string& model_path, const std::string& features,
                const std::string& out) {
  const ProbeModel model = load_probe(model_path);
  const FeatureMatrix feats = extract_features(model, load_features(features));
  save_features(feats, out);
  std::printf("extracted %zu x %zu features\n", feats.n_samples, feats.dim);
  return 0;
}

int cmd_split(const std::string& method, const std::string& features,
              const std::string& labels, int k, double bandwidth,
              double damping, std::uint64_t seed, const std::string& out) {
  const LabeledDataset d = load_dataset(features, labels);
  const SplitterKind kind = splitter_from_name(method);
  const auto views = class_views(d);
  std::vector<ClusterAssignment> assignments(views.size());
  std::vector<std::string> warnings;
  for (std::size_t c = 0; c < views.size(); ++c) {
    const auto& view = views[c];
    FeatureMatrix feats = gather_rows(d.features, view.sample_indices);
    const std::uint64_t class_seed =
        derive_seed(seed, "split-class", std::uint64_t(c));
    switch (kind) {
      case SplitterKind::random:
        assignments[c] = split_random_k(
            view, std::min<int>(k, int(view.sample_indices.size())),
            class_seed, &warnings);
        break;
      case SplitterKind::kmeans:
        assignments[c] = split_kmeans(view, feats, k, class_seed, &warnings);
        break;
      case SplitterKind::spectral:
        assignments[c] = split_spectral(view, feats, k, class_seed, &warnings);
        break;
      case SplitterKind::affinity:
        assignments[c] =
            split_affinity(view, feats, damping, 500,
                           std::numeric_limits<double>::quiet_NaN(), &warnings);
        break;
      case SplitterKind::meanshift:
        assignments[c] = split_meanshift(view, feats, bandwidth, &warnings);
        break;
    }
  }
  print_warnings(warnings);
  Hierarchy base = Hierarchy::base(d.class_count);
  const auto finer = add_finer_level(base, d, assignments);
  save_finer_assignment(finer.assignment, d.labels, out);
  std::printf("split %d classes into %d finer classes (%s)\n", d.class_count,
              finer.assignment.finer_class_count, method.c_str());
  return 0;
}

int cmd_bucbam(const std::string& features, const std::string& labels,
               const std::string& spe_model_path, const BucbamConfig& cfg,
               const std::string& out_dir) {
  LabeledDataset d = load_dataset(features, labels);
  if (!spe_model_path.empty()) {
    const ProbeModel spe = load_probe(spe_model_path);
    d.features = extract_features(spe, d.features);
  }
  const auto t0 = std::chrono::steady_clock::now();
  const BucbamResult res = bucbam_split(d, cfg);
  const auto elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
  print_warnings(res.warnings);

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  Hierarchy base = Hierarchy::base(d.class_count);
  const auto finer = add_finer_level(base, d, res.assignments);
  save_finer_assignment(finer.assignment, d.labels, dir / "assignments.csv");
  save_hierarchy(finer.hierarchy, dir / "hierarchy.json");

  fs::create_directories(dir / "matrices");
  json per_class = json::array();
  json plans = json::array();
  for (const auto& r : res.per_class) {
    per_class.push_back({{"class", r.initial.class_id},
                         {"k_initial", r.initial.k},
                         {"k_pruned", r.pruned.k},
                         {"k_merged", r.merged.k}});
    FeatureMatrix m(std::size_t(r.matrix.size), std::size_t(r.matrix.size),
                    r.matrix.m);
    save_features(m, dir / "matrices" /
                         ("matrix_class_" + std::to_string(r.matrix.class_id) +
                          ".finf"));
    plans.push_back({{"class", r.plan.class_id},
                     {"components", r.plan.components},
                     {"k_merged", r.plan.merged_count}});
  }
  json report;
  report["parameters"] = {{"k", cfg.k_initial},
                          {"min_size", cfg.min_cluster_size},
                          {"s_high", cfg.s_high},
                          {"s_med", cfg.s_med},
                          {"mode", merge_mode_name(cfg.merge_mode)},
                          {"seed", cfg.seed}};
  report["per_class"] = per_class;
  report["warnings"] = res.warnings;
  report["timings"] = {{"bucbam_ms", elapsed_ms}};
  std::ofstream(dir / "bucbam_report.json") << report.dump(2) << "\n";
  std::ofstream(dir / "merge_plan.json")
      << json{{"plans", plans}}.dump(2) << "\n";
  std::printf("bucbam: %d classes -> %d finer classes; artifacts in %s\n",
              d.class_count, finer.assignment.finer_class_count,
              out_dir.c_str());
  return 0;
}

int cmd_fuse(const std::string& spe, const std::string& fine,
             const std::string& out) {
  const FusedRepresentation fused =
      fuse(load_features(spe), load_features(fine));
  save_features(fused.matrix, out);
  std::printf("fused %zu + %zu -> %zu dims\n", fused.spe_dim, fused.fine_dim,
              fused.matrix.dim);
  return 0;
}

int cmd_eval(const std::string& repr, const std::string& spe_model_path,
             const std::string& fine_model_path, const std::string& tasks_path,
             const LinearTrainOptions& probe, const std::string& out) {
  const auto tasks = load_tasks_manifest(tasks_path);
  ProbeModel spe, fine;
  Extractor extractor;
  if (repr == "spe") {
    spe = load_probe(spe_model_path);
    extractor = spe_extractor(spe);
  } else if (repr == "fine") {
    fine = load_probe(fine_model_path);
    extractor = fine_extractor(fine);
  } else if (repr == "spefine") {
    spe = load_probe(spe_model_path);
    fine = load_probe(fine_model_path);
    extractor = fused_extractor(spe, fine);
  } else {
    throw Error(ErrorKind::config, "unknown representation '" + repr + "'");
  }
  EvalReport report = evaluate_representation(extractor, repr, tasks, probe);
  json tasks_json = json::array();
  for (const auto& [name, score] : report.task_scores) {
    tasks_json.push_back({{"task", name}, {"score", score}});
  }
  json doc{{"representation", report.representation},
           {"tasks", tasks_json},
           {"average", report.average},
           {"config",
            {{"loss", probe.loss == LossKind::hinge ? "hinge" : "logistic"},
             {"l2", probe.l2},
             {"iters", probe.iters},
             {"lr", probe.lr},
             {"ap_variant", "non-interpolated"}}}};
  std::ofstream(out) << doc.dump(2) << "\n";
  std::printf("%s average over %zu tasks: %.4f\n", repr.c_str(), tasks.size(),
              report.average);
  return 0;
}

int cmd_stats(const std::string& assignments_path, const std::string& features,
              const std::string& labels, double size_bin, double var_bin,
              const std::string& out_dir) {
  const LabeledDataset d = load_dataset(features, labels);
  const FinerAssignment fa =
      load_finer_assignment(assignments_path, d.features.n_samples);
  // Regroup the finer labels into per-class assignments.
  const auto views = class_views(d);
  std::vector<ClusterAssignment> assignments;
  for (const auto& view : views) {
    std::vector<int> local;
    std::vector<int> finer_ids;
    for (std::size_t i : view.sample_indices) {
      finer_ids.push_back(fa.finer_labels[i]);
    }
    std::vector<int> uniq = finer_ids;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    for (int f : finer_ids) {
      local.push_back(int(std::lower_bound(uniq.begin(), uniq.end(), f) -
                          uniq.begin()));
    }
    assignments.push_back(
        make_assignment(view.class_id, std::move(local), int(uniq.size())));
  }
  const ClusterStats stats =
      compute_cluster_stats(assignments, d, size_bin, var_bin);
  std::vector<PcaResult> pca(views.size());
  for (std::size_t c = 0; c < views.size(); ++c) {
    pca[c] = pca_top2(gather_rows(d.features, views[c].sample_indices));
  }
  export_stats(stats, pca, assignments, out_dir);
  std::printf("stats for %zu clusters written to %s\n", stats.sizes.size(),
              out_dir.c_str());
  return 0;
}

int cmd_sweep(const std::string& features, const std::string& labels,
              const std::string& tasks_path, const std::vector<int>& ks,
              const std::string& splitter, std::uint64_t seed, int hidden,
              int epochs, const std::string& out) {
  const LabeledDataset d = load_dataset(features, labels);
  const auto tasks = load_tasks_manifest(tasks_path);
  SweepConfig cfg;
  cfg.spe_probe.hidden_dim = std::size_t(hidden);
  cfg.spe_probe.train.epochs = epochs;
  cfg.fine_probe = cfg.spe_probe;
  cfg.splitter = splitter_from_name(splitter);
  cfg.seed = seed;
  const auto rows = k_sweep(d, ks, tasks, cfg);
  write_sweep_csv(rows, out);
  for (const auto& row : rows) {
    std::printf("K=%d finet=%.4f spefinet=%.4f\n", row.k, row.finet_avg,
                row.spefinet_avg);
  }
  return 0;
}

int cmd_pipeline(const std::string& config_path,
                 const std::vector<std::string>& overrides) {
  TomlTable table;
  if (!config_path.empty()) {
    table = parse_toml_file(config_path);
  }
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::config,
                  "--set expects key=value, got '" + kv + "'");
    }
    // Reuse the TOML value grammar for the override.
    const TomlTable once = parse_toml(kv);
    for (const auto& [key, value] : once.entries()) table.set(key, value);
  }
  const PipelineConfig cfg = parse_pipeline_config(table);
  const RunResult result = run_pipeline(cfg);
  std::printf("pipeline done: %s\n", result.run_dir.string().c_str());
  std::printf("  spenet   avg %.4f\n", result.spe.average);
  std::printf("  finet    avg %.4f\n", result.fine.average);
  std::printf("  spefinet avg %.4f\n", result.spefine.average);
  if (result.recovery) {
    std::printf("  planted ARI %.4f\n", result.recovery->global);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"refinery: unsupervised class refinement and universality "
               "evaluation"};
  app.require_subcommand(1);

  // synth
  SynthSpec synth_spec;
  int synth_train_per = 1, synth_test_per = 20;
  std::string synth_out = "synth";
  auto* synth = app.add_subcommand("synth", "generate a planted dataset");
  synth->add_option("--classes", synth_spec.n_classes);
  synth->add_option("--subconcepts", synth_spec.subconcepts_per_class);
  synth->add_option("--per", synth_spec.samples_per_subconcept);
  synth->add_option("--dim", synth_spec.dim);
  synth->add_option("--sep", synth_spec.separation);
  synth->add_option("--within-std", synth_spec.within_std);
  synth->add_option("--seed", synth_spec.seed);
  synth->add_option("--target-train-per", synth_train_per);
  synth->add_option("--target-test-per", synth_test_per);
  synth->add_option("--out-dir", synth_out);

  // train-probe
  std::string tp_features, tp_labels, tp_out = "model.bin";
  int tp_hidden = 128;
  TrainConfig tp_cfg;
  auto* tp = app.add_subcommand("train-probe", "train a probe network");
  tp->add_option("--features", tp_features)->required();
  tp->add_option("--labels", tp_labels)->required();
  tp->add_option("--hidden", tp_hidden);
  tp->add_option("--epochs", tp_cfg.epochs);
  tp->add_option("--batch", tp_cfg.batch_size);
  tp->add_option("--lr", tp_cfg.learning_rate);
  tp->add_option("--momentum", tp_cfg.momentum);
  tp->add_option("--weight-decay", tp_cfg.weight_decay);
  tp->add_option("--seed", tp_cfg.seed);
  tp->add_option("--out", tp_out);

  // extract
  std::string ex_model, ex_features, ex_out = "feats.finf";
  auto* ex = app.add_subcommand("extract", "extract penultimate features");
  ex->add_option("--model", ex_model)->required();
  ex->add_option("--features", ex_features)->required();
  ex->add_option("--out", ex_out);

  // split
  std::string sp_method = "kmeans", sp_features, sp_labels,
              sp_out = "assignments.csv";
  int sp_k = 8;
  double sp_bandwidth = 1.0, sp_damping = 0.7;
  std::uint64_t sp_seed = 42;
  auto* sp = app.add_subcommand("split", "split classes with a baseline");
  sp->add_option("--method", sp_method)
      ->check(CLI::IsMember({"random", "kmeans", "spectral", "affinity",
                             "meanshift"}));
  sp->add_option("--features", sp_features)->required();
  sp->add_option("--labels", sp_labels)->required();
  sp->add_option("--k", sp_k);
  sp->add_option("--bandwidth", sp_bandwidth);
  sp->add_option("--damping", sp_damping);
  sp->add_option("--seed", sp_seed);
  sp->add_option("--out", sp_out);

  // bucbam
  std::string bb_features, bb_labels, bb_spe_model, bb_out = "bucbam";
  BucbamConfig bb_cfg;
  std::string bb_mode = "ss";
  double bb_s_med = -1.0;
  auto* bb = app.add_subcommand("bucbam", "split-prune-merge refinement");
  bb->add_option("--features", bb_features)->required();
  bb->add_option("--labels", bb_labels)->required();
  bb->add_option("--spe-model", bb_spe_model)
      ->description("probe checkpoint; features are extracted through it");
  bb->add_option("--k", bb_cfg.k_initial);
  bb->add_option("--min-size", bb_cfg.min_cluster_size);
  bb->add_option("--s-high", bb_cfg.s_high);
  bb->add_option("--s-med", bb_s_med);
  bb->add_option("--mode", bb_mode)->check(CLI::IsMember({"ss", "as"}));
  bb->add_option("--negatives-per-positive", bb_cfg.negatives_per_positive);
  bb->add_option("--seed", bb_cfg.seed);
  bb->add_option("--out-dir", bb_out);

  // fuse
  std::string fu_spe, fu_fine, fu_out = "fused.finf";
  auto* fu = app.add_subcommand("fuse", "L-inf normalize and concatenate");
  fu->add_option("--spe", fu_spe)->required();
  fu->add_option("--fine", fu_fine)->required();
  fu->add_option("--out", fu_out);

  // eval
  std::string ev_repr = "spe", ev_spe_model, ev_fine_model, ev_tasks,
              ev_out = "report.json", ev_loss = "hinge";
  LinearTrainOptions ev_probe{LossKind::hinge, 1e-3, 3000, 0.5};
  auto* ev = app.add_subcommand("eval", "linear-probe transfer evaluation");
  ev->add_option("--repr", ev_repr)
      ->check(CLI::IsMember({"spe", "fine", "spefine"}));
  ev->add_option("--spe-model", ev_spe_model);
  ev->add_option("--fine-model", ev_fine_model);
  ev->add_option("--tasks", ev_tasks)->required();
  ev->add_option("--loss", ev_loss)->check(CLI::IsMember({"hinge", "logistic"}));
  ev->add_option("--l2", ev_probe.l2);
  ev->add_option("--iters", ev_probe.iters);
  ev->add_option("--lr", ev_probe.lr);
  ev->add_option("--out", ev_out);

  // stats
  std::string st_assignments, st_features, st_labels, st_out = "stats";
  double st_size_bin = 10.0, st_var_bin = 0.05;
  auto* st = app.add_subcommand("stats", "cluster size/variance/PCA tables");
  st->add_option("--assignments", st_assignments)->required();
  st->add_option("--features", st_features)->required();
  st->add_option("--labels", st_labels)->required();
  st->add_option("--size-bin-width", st_size_bin);
  st->add_option("--variance-bin-width", st_var_bin);
  st->add_option("--out-dir", st_out);

  // sweep
  std::string sw_features, sw_labels, sw_tasks, sw_splitter = "kmeans",
              sw_out = "sweep.csv";
  std::vector<int> sw_ks{2, 4, 8, 16};
  std::uint64_t sw_seed = 42;
  int sw_hidden = 128, sw_epochs = 60;
  auto* sw = app.add_subcommand("sweep", "K sweep of the FiNet pipeline");
  sw->add_option("--features", sw_features)->required();
  sw->add_option("--labels", sw_labels)->required();
  sw->add_option("--tasks", sw_tasks)->required();
  sw->add_option("--k-list", sw_ks)->delimiter(',');
  sw->add_option("--splitter", sw_splitter);
  sw->add_option("--seed", sw_seed);
  sw->add_option("--hidden", sw_hidden);
  sw->add_option("--epochs", sw_epochs);
  sw->add_option("--out", sw_out);

  // pipeline
  std::string pl_config;
  std::vector<std::string> pl_overrides;
  auto* pl = app.add_subcommand("pipeline", "run the end-to-end pipeline");
  pl->add_option("--config", pl_config)->description("TOML config file");
  pl->add_option("--set", pl_overrides)
      ->description("override config keys, e.g. --set seed=7")
      ->take_all();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      return cmd_synth(synth_spec, synth_train_per, synth_test_per, synth_out);
    }
    if (tp->parsed()) {
      return cmd_train_probe(tp_features, tp_labels, tp_hidden, tp_cfg, tp_out);
    }
    if (ex->parsed()) return cmd_extract(ex_model, ex_features, ex_out);
    if (sp->parsed()) {
      return cmd_split(sp_method, sp_features, sp_labels, sp_k, sp_bandwidth,
                       sp_damping, sp_seed, sp_out);
    }
    if (bb->parsed()) {
      bb_cfg.merge_mode = merge_mode_from_name(bb_mode);
      bb_cfg.s_med = bb_s_med < 0.0 ? bb_cfg.s_high / 2.0 : bb_s_med;
      return cmd_bucbam(bb_features, bb_labels, bb_spe_model, bb_cfg, bb_out);
    }
    if (fu->parsed()) return cmd_fuse(fu_spe, fu_fine, fu_out);
    if (ev->parsed()) {
      ev_probe.loss = ev_loss == "hinge" ? LossKind::hinge : LossKind::logistic;
      return cmd_eval(ev_repr, ev_spe_model, ev_fine_model, ev_tasks, ev_probe,
                      ev_out);
    }
    if (st->parsed()) {
      return cmd_stats(st_assignments, st_features, st_labels, st_size_bin,
                       st_var_bin, st_out);
    }
    if (sw->parsed()) {
      return cmd_sweep(sw_features, sw_labels, sw_tasks, sw_ks, sw_splitter,
                       sw_seed, sw_hidden, sw_epochs, sw_out);
    }
    if (pl->parsed()) return cmd_pipeline(pl_config, pl_overrides);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::config ? kExitConfig : kExitStage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStage;
  }
  return 0;
}
