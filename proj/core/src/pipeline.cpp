#include "refinery/pipeline.hpp"

#include <chrono>
#include <fstream>

#include <json.hpp>

#include "refinery/fusion.hpp"
#include "refinery/io.hpp"
#include "refinery/parallel.hpp"
#include "refinery/rng.hpp"
#include "refinery/stats.hpp"

namespace refinery {

using nlohmann::json;

namespace {

TrainConfig parse_train_config(const TomlTable& t, const std::string& prefix,
                               const TrainConfig& defaults) {
  TrainConfig cfg = defaults;
  cfg.epochs = int(t.get_int(prefix + ".epochs", cfg.epochs));
  cfg.batch_size = int(t.get_int(prefix + ".batch_size", cfg.batch_size));
  cfg.learning_rate = t.get_double(prefix + ".learning_rate", cfg.learning_rate);
  cfg.momentum = t.get_double(prefix + ".momentum", cfg.momentum);
  cfg.weight_decay = t.get_double(prefix + ".weight_decay", cfg.weight_decay);
  cfg.seed = std::uint64_t(t.get_int(prefix + ".seed", 0));
  return cfg;
}

LinearTrainOptions parse_linear_options(const TomlTable& t,
                                        const std::string& prefix,
                                        const LinearTrainOptions& defaults) {
  LinearTrainOptions opt = defaults;
  const std::string loss =
      t.get_string(prefix + ".loss",
                   opt.loss == LossKind::hinge ? "hinge" : "logistic");
  if (loss == "hinge") {
    opt.loss = LossKind::hinge;
  } else if (loss == "logistic") {
    opt.loss = LossKind::logistic;
  } else {
    throw Error(ErrorKind::config, "unknown loss '" + loss + "'");
  }
  opt.l2 = t.get_double(prefix + ".l2", opt.l2);
  opt.iters = int(t.get_int(prefix + ".iters", opt.iters));
  opt.lr = t.get_double(prefix + ".lr", opt.lr);
  return opt;
}

}  // namespace

PipelineConfig parse_pipeline_config(const TomlTable& t) {
  PipelineConfig cfg;
  cfg.seed = std::uint64_t(t.get_int("seed", std::int64_t(cfg.seed)));
  cfg.out_dir = t.get_string("out_dir", cfg.out_dir);

  cfg.features_path = t.get_string("data.features", "");
  cfg.labels_path = t.get_string("data.labels", "");
  cfg.tasks_manifest = t.get_string("data.tasks", "");

  if (!t.keys_under("synth").empty()) {
    SynthSpec spec;
    spec.n_classes = int(t.get_int("synth.classes", spec.n_classes));
    spec.subconcepts_per_class =
        int(t.get_int("synth.subconcepts", spec.subconcepts_per_class));
    spec.samples_per_subconcept =
        int(t.get_int("synth.per", spec.samples_per_subconcept));
    spec.dim = int(t.get_int("synth.dim", spec.dim));
    spec.within_std = t.get_double("synth.within_std", spec.within_std);
    spec.separation = t.get_double("synth.sep", spec.separation);
    spec.seed = std::uint64_t(t.get_int("synth.seed", std::int64_t(cfg.seed)));
    cfg.synth = spec;
  }

  cfg.spe_probe.hidden_dim =
      std::size_t(t.get_int("spe_probe.hidden", std::int64_t(cfg.spe_probe.hidden_dim)));
  cfg.spe_probe.train = parse_train_config(t, "spe_probe", cfg.spe_probe.train);
  cfg.fine_probe.hidden_dim =
      std::size_t(t.get_int("fine_probe.hidden", std::int64_t(cfg.fine_probe.hidden_dim)));
  cfg.fine_probe.train =
      parse_train_config(t, "fine_probe", cfg.fine_probe.train);

  cfg.split.method = t.get_string("split.method", cfg.split.method);
  cfg.split.k = int(t.get_int("split.k", cfg.split.k));
  cfg.split.bandwidth = t.get_double("split.bandwidth", cfg.split.bandwidth);
  cfg.split.damping = t.get_double("split.damping", cfg.split.damping);

  cfg.bucbam.k_initial = int(t.get_int("bucbam.k", cfg.bucbam.k_initial));
  cfg.bucbam.min_cluster_size =
      int(t.get_int("bucbam.min_size", cfg.bucbam.min_cluster_size));
  cfg.bucbam.s_high = t.get_double("bucbam.s_high", cfg.bucbam.s_high);
  cfg.bucbam.s_med = t.get_double("bucbam.s_med", cfg.bucbam.s_high / 2.0);
  cfg.bucbam.merge_mode =
      merge_mode_from_name(t.get_string("bucbam.mode", "ss"));
  cfg.bucbam.negatives_per_positive = t.get_double(
      "bucbam.negatives_per_positive", cfg.bucbam.negatives_per_positive);
  cfg.bucbam.classifier =
      parse_linear_options(t, "bucbam.classifier", cfg.bucbam.classifier);
  cfg.bucbam.classifier.loss = LossKind::logistic;

  cfg.eval_probe = parse_linear_options(t, "eval", cfg.eval_probe);
  cfg.target_train_per =
      int(t.get_int("eval.target_train_per", cfg.target_train_per));
  cfg.target_test_per =
      int(t.get_int("eval.target_test_per", cfg.target_test_per));

  validate(cfg);
  return cfg;
}

void validate(const PipelineConfig& cfg) {
  const bool has_data = !cfg.features_path.empty() || !cfg.labels_path.empty();
  if (has_data && cfg.synth.has_value()) {
    throw Error(ErrorKind::config,
                "pipeline: config has both data paths and a synth spec");
  }
  if (!has_data && !cfg.synth.has_value()) {
    throw Error(ErrorKind::config,
                "pipeline: config needs data paths or a synth spec");
  }
  if (has_data && (cfg.features_path.empty() || cfg.labels_path.empty())) {
    throw Error(ErrorKind::config,
                "pipeline: data mode needs both features and labels paths");
  }
  if (has_data && cfg.tasks_manifest.empty()) {
    throw Error(ErrorKind::config,
                "pipeline: data mode needs a tasks manifest");
  }
  if (cfg.synth) validate(*cfg.synth);
  if (cfg.split.method != "bucbam") {
    splitter_from_name(cfg.split.method);  // throws on unknown
  }
  validate(cfg.bucbam);
  if (cfg.out_dir.empty()) {
    throw Error(ErrorKind::config, "pipeline: empty out_dir");
  }
}

std::string config_echo_json(const PipelineConfig& cfg) {
  json doc;
  doc["seed"] = cfg.seed;
  doc["out_dir"] = cfg.out_dir;
  if (cfg.synth) {
    doc["synth"] = {{"classes", cfg.synth->n_classes},
                    {"subconcepts", cfg.synth->subconcepts_per_class},
                    {"per", cfg.synth->samples_per_subconcept},
                    {"dim", cfg.synth->dim},
                    {"within_std", cfg.synth->within_std},
                    {"sep", cfg.synth->separation},
                    {"seed", cfg.synth->seed}};
  } else {
    doc["data"] = {{"features", cfg.features_path},
                   {"labels", cfg.labels_path},
                   {"tasks", cfg.tasks_manifest}};
  }
  auto probe_json = [](const ProbeSpec& p) {
    return json{{"hidden", p.hidden_dim},
                {"epochs", p.train.epochs},
                {"batch_size", p.train.batch_size},
                {"learning_rate", p.train.learning_rate},
                {"momentum", p.train.momentum},
                {"weight_decay", p.train.weight_decay},
                {"seed", p.train.seed}};
  };
  doc["spe_probe"] = probe_json(cfg.spe_probe);
  doc["fine_probe"] = probe_json(cfg.fine_probe);
  doc["split"] = {{"method", cfg.split.method},
                  {"k", cfg.split.k},
                  {"bandwidth", cfg.split.bandwidth},
                  {"damping", cfg.split.damping}};
  doc["bucbam"] = {{"k", cfg.bucbam.k_initial},
                   {"min_size", cfg.bucbam.min_cluster_size},
                   {"s_high", cfg.bucbam.s_high},
                   {"s_med", cfg.bucbam.s_med},
                   {"mode", merge_mode_name(cfg.bucbam.merge_mode)},
                   {"negatives_per_positive", cfg.bucbam.negatives_per_positive}};
  doc["eval"] = {{"loss", cfg.eval_probe.loss == LossKind::hinge ? "hinge"
                                                                 : "logistic"},
                 {"l2", cfg.eval_probe.l2},
                 {"iters", cfg.eval_probe.iters},
                 {"lr", cfg.eval_probe.lr},
                 {"target_train_per", cfg.target_train_per},
                 {"target_test_per", cfg.target_test_per},
                 {"ap_variant", "non-interpolated"}};
  return doc.dump(2);
}

std::uint64_t config_hash(const PipelineConfig& cfg) {
  return fnv1a(config_echo_json(cfg));
}

std::vector<TargetTask> load_tasks_manifest(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::format, path.string() + ": " + e.what());
  }
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  std::vector<TargetTask> tasks;
  try {
    for (const auto& entry : doc.at("tasks")) {
      TargetTask task;
      task.name = entry.at("name").get<std::string>();
      task.metric = metric_from_name(entry.at("metric").get<std::string>());
      task.multilabel = entry.value("multilabel", false);
      task.train.features =
          load_features(resolve(entry.at("train_features")));
      task.test.features = load_features(resolve(entry.at("test_features")));
      if (task.multilabel) {
        task.train_label_sets =
            load_multilabels(resolve(entry.at("train_labels")),
                             task.train.features.n_samples);
        task.test_label_sets = load_multilabels(
            resolve(entry.at("test_labels")), task.test.features.n_samples);
        int max_label = -1;
        for (const auto& sets : {task.train_label_sets, task.test_label_sets}) {
          for (const auto& set : sets) {
            for (int y : set) max_label = std::max(max_label, y);
          }
        }
        task.train.class_count = task.test.class_count = max_label + 1;
        // dense labels kept as the first set entry (unused by mAP scoring)
        task.train.labels.assign(task.train.features.n_samples, 0);
        task.test.labels.assign(task.test.features.n_samples, 0);
      } else {
        auto train = load_labels(resolve(entry.at("train_labels")),
                                 task.train.features.n_samples);
        auto test = load_labels(resolve(entry.at("test_labels")),
                                task.test.features.n_samples);
        task.train.labels = std::move(train.labels);
        task.test.labels = std::move(test.labels);
        task.train.class_count =
            std::max(train.class_count, test.class_count);
        task.test.class_count = task.train.class_count;
      }
      tasks.push_back(std::move(task));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::format, path.string() + ": " + e.what());
  }
  if (tasks.empty()) {
    throw Error(ErrorKind::config, path.string() + ": no tasks");
  }
  return tasks;
}

void save_tasks_manifest(const std::vector<TargetTask>& tasks,
                         const std::filesystem::path& dir,
                         const std::string& manifest_name) {
  std::filesystem::create_directories(dir);
  json list = json::array();
  for (const auto& task : tasks) {
    const std::string stem = "task_" + task.name;
    save_features(task.train.features, dir / (stem + "_train.finf"));
    save_features(task.test.features, dir / (stem + "_test.finf"));
    save_labels(task.train.labels, dir / (stem + "_train_labels.csv"));
    save_labels(task.test.labels, dir / (stem + "_test_labels.csv"));
    list.push_back({{"name", task.name},
                    {"metric", metric_name(task.metric)},
                    {"multilabel", task.multilabel},
                    {"train_features", stem + "_train.finf"},
                    {"train_labels", stem + "_train_labels.csv"},
                    {"test_features", stem + "_test.finf"},
                    {"test_labels", stem + "_test_labels.csv"}});
  }
  json doc;
  doc["tasks"] = list;
  std::ofstream out(dir / manifest_name);
  if (!out) {
    throw Error(ErrorKind::io,
                "cannot open " + (dir / manifest_name).string());
  }
  out << doc.dump(2) << "\n";
}

RefinementArtifacts run_refinement(const LabeledDataset& source,
                                   const ProbeSpec& spe, const ProbeSpec& fine,
                                   const SplitSpec& split,
                                   const BucbamConfig& bucbam_cfg,
                                   std::uint64_t master_seed) {
  validate(source);
  RefinementArtifacts art;

  TrainConfig spe_train = spe.train;
  if (spe_train.seed == 0) {
    spe_train.seed = derive_seed(master_seed, "spe-probe");
  }
  art.spe_model = train_probe(source, spe.hidden_dim, spe_train);
  art.spe_features = extract_features(art.spe_model, source.features);

  LabeledDataset rep;
  rep.features = art.spe_features;
  rep.labels = source.labels;
  rep.class_count = source.class_count;
  rep.level = source.level;

  if (split.method == "bucbam") {
    BucbamConfig cfg = bucbam_cfg;
    if (cfg.seed == 0) cfg.seed = derive_seed(master_seed, "bucbam");
    BucbamResult res = bucbam_split(rep, cfg);
    art.assignments = res.assignments;
    art.warnings.insert(art.warnings.end(), res.warnings.begin(),
                        res.warnings.end());
    art.bucbam = std::move(res);
  } else {
    const SplitterKind kind = splitter_from_name(split.method);
    const auto views = class_views(rep);
    art.assignments.resize(views.size());
    std::vector<std::vector<std::string>> warnings(views.size());
    parallel_for(views.size(), [&](std::size_t c) {
      const auto& view = views[c];
      FeatureMatrix feats = gather_rows(rep.features, view.sample_indices);
      const std::uint64_t seed =
          derive_seed(master_seed, "split-class", std::uint64_t(c));
      switch (kind) {
        case SplitterKind::random:
          art.assignments[c] = split_random_k(
              view, std::min<int>(split.k, int(view.sample_indices.size())),
              seed, &warnings[c]);
          break;
        case SplitterKind::kmeans:
          art.assignments[c] =
              split_kmeans(view, feats, split.k, seed, &warnings[c]);
          break;
        case SplitterKind::spectral:
          art.assignments[c] =
              split_spectral(view, feats, split.k, seed, &warnings[c]);
          break;
        case SplitterKind::affinity:
          art.assignments[c] = split_affinity(
              view, feats, split.damping, 500,
              std::numeric_limits<double>::quiet_NaN(), &warnings[c]);
          break;
        case SplitterKind::meanshift:
          art.assignments[c] =
              split_meanshift(view, feats, split.bandwidth, &warnings[c]);
          break;
      }
    });
    for (auto& w : warnings) {
      art.warnings.insert(art.warnings.end(), w.begin(), w.end());
    }
  }

  Hierarchy base = Hierarchy::base(source.class_count);
  auto finer = add_finer_level(base, source, art.assignments);
  art.hierarchy = std::move(finer.hierarchy);
  art.finer = std::move(finer.assignment);
  art.finer_dataset = relabel_dataset(source, art.finer);

  TrainConfig fine_train = fine.train;
  if (fine_train.seed == 0) {
    fine_train.seed = derive_seed(master_seed, "fine-probe");
  }
  // A finer level with a single class (every splitter returned one cluster
  // on a one-class dataset) cannot train a softmax; keep the class pair.
  art.fine_model =
      train_probe(art.finer_dataset, fine.hidden_dim, fine_train);
  return art;
}

Extractor spe_extractor(const ProbeModel& spe) {
  return [&spe](const FeatureMatrix& x) { return extract_features(spe, x); };
}

Extractor fine_extractor(const ProbeModel& fine) {
  return [&fine](const FeatureMatrix& x) { return extract_features(fine, x); };
}

Extractor fused_extractor(const ProbeModel& spe, const ProbeModel& fine) {
  return [&spe, &fine](const FeatureMatrix& x) {
    return fuse(extract_features(spe, x), extract_features(fine, x)).matrix;
  };
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path.string());
  out << text;
}

json report_json(const EvalReport& r) {
  json tasks = json::array();
  for (const auto& [name, score] : r.task_scores) {
    tasks.push_back({{"task", name}, {"score", score}});
  }
  return json{{"representation", r.representation},
              {"tasks", tasks},
              {"average", r.average},
              {"config", r.config_echo}};
}

}  // namespace

RunResult run_pipeline(const PipelineConfig& cfg) {
  validate(cfg);
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  json timings;
  auto mark = [&](const char* stage, clock::time_point& last) {
    const auto now = clock::now();
    timings[stage] =
        std::chrono::duration_cast<std::chrono::milliseconds>(now - last)
            .count();
    last = now;
  };
  clock::time_point last = t0;

  const std::filesystem::path run_dir(cfg.out_dir);
  std::filesystem::create_directories(run_dir);

  // Stage 0: source data.
  LabeledDataset source;
  std::optional<PlantedTruth> truth;
  std::vector<TargetTask> tasks;
  if (cfg.synth) {
    SourceData data = generate_source(*cfg.synth);
    source = std::move(data.dataset);
    truth = std::move(data.truth);
    const TargetKind kinds[] = {TargetKind::subconcept_id,
                                TargetKind::recombined, TargetKind::shifted};
    tasks = generate_targets(*truth, *cfg.synth, kinds, cfg.target_train_per,
                             cfg.target_test_per);
    save_labels(truth->subconcept_labels, run_dir / "truth.csv");
  } else {
    source.features = load_features(cfg.features_path);
    auto labels = load_labels(cfg.labels_path, source.features.n_samples);
    source.labels = std::move(labels.labels);
    source.class_count = labels.class_count;
    tasks = load_tasks_manifest(cfg.tasks_manifest);
  }
  validate(source);
  save_features(source.features, run_dir / "source_features.finf");
  save_labels(source.labels, run_dir / "source_labels.csv");
  mark("source", last);

  // Stages 1-5: refinement.
  RefinementArtifacts art =
      run_refinement(source, cfg.spe_probe, cfg.fine_probe, cfg.split,
                     cfg.bucbam, cfg.seed);
  mark("refinement", last);

  save_probe(art.spe_model, run_dir / "spe_model.bin");
  save_features(art.spe_features, run_dir / "spe_features.finf");
  save_hierarchy(art.hierarchy, run_dir / "hierarchy.json");
  save_finer_assignment(art.finer, source.labels, run_dir / "assignments.csv");
  save_probe(art.fine_model, run_dir / "fine_model.bin");

  // Stages 6-7: extraction + fusion on the source data.
  FeatureMatrix fine_feats =
      extract_features(art.fine_model, source.features);
  save_features(fine_feats, run_dir / "fine_features.finf");
  FusedRepresentation fused = fuse(art.spe_features, fine_feats);
  save_features(fused.matrix, run_dir / "fused_features.finf");
  mark("extract_fuse", last);

  if (art.bucbam) {
    json per_class = json::array();
    const auto& res = *art.bucbam;
    std::filesystem::create_directories(run_dir / "matrices");
    json plans = json::array();
    for (const auto& r : res.per_class) {
      per_class.push_back({{"class", r.initial.class_id},
                           {"k_initial", r.initial.k},
                           {"k_pruned", r.pruned.k},
                           {"k_merged", r.merged.k}});
      FeatureMatrix m(std::size_t(r.matrix.size), std::size_t(r.matrix.size),
                      r.matrix.m);
      save_features(m, run_dir / "matrices" /
                           ("matrix_class_" +
                            std::to_string(r.matrix.class_id) + ".finf"));
      plans.push_back({{"class", r.plan.class_id},
                       {"components", r.plan.components},
                       {"k_merged", r.plan.merged_count}});
    }
    json report;
    report["parameters"] = {{"k", cfg.bucbam.k_initial},
                            {"min_size", cfg.bucbam.min_cluster_size},
                            {"s_high", cfg.bucbam.s_high},
                            {"s_med", cfg.bucbam.s_med},
                            {"mode", merge_mode_name(cfg.bucbam.merge_mode)}};
    report["per_class"] = per_class;
    report["warnings"] = art.warnings;
    write_text(run_dir / "bucbam_report.json", report.dump(2) + "\n");
    write_text(run_dir / "merge_plan.json",
               json{{"plans", plans}}.dump(2) + "\n");
  }

  // Stage 8: evaluation of the three representations.
  RunResult result;
  result.run_dir = run_dir;
  const std::string splitter_tag =
      cfg.split.method == "bucbam"
          ? "bucbam-" + merge_mode_name(cfg.bucbam.merge_mode)
          : cfg.split.method;
  const std::string echo = config_echo_json(cfg);

  result.spe = evaluate_representation(spe_extractor(art.spe_model), "spenet",
                                       tasks, cfg.eval_probe);
  result.fine =
      evaluate_representation(fine_extractor(art.fine_model),
                              "finet-" + splitter_tag, tasks, cfg.eval_probe);
  result.spefine = evaluate_representation(
      fused_extractor(art.spe_model, art.fine_model),
      "spefinet-" + splitter_tag, tasks, cfg.eval_probe);
  result.spe.config_echo = echo;
  result.fine.config_echo = echo;
  result.spefine.config_echo = echo;
  write_text(run_dir / "eval_spenet.json",
             report_json(result.spe).dump(2) + "\n");
  write_text(run_dir / "eval_finet.json",
             report_json(result.fine).dump(2) + "\n");
  write_text(run_dir / "eval_spefinet.json",
             report_json(result.spefine).dump(2) + "\n");
  mark("evaluation", last);

  // Stage 9: cluster statistics on the representation the clusters came
  // from, plus per-class PCA tables.
  {
    LabeledDataset rep;
    rep.features = art.spe_features;
    rep.labels = source.labels;
    rep.class_count = source.class_count;
    const ClusterStats stats = compute_cluster_stats(art.assignments, rep);
    const auto views = class_views(rep);
    std::vector<PcaResult> pca(views.size());
    parallel_for(views.size(), [&](std::size_t c) {
      pca[c] = pca_top2(gather_rows(rep.features, views[c].sample_indices));
    });
    export_stats(stats, pca, art.assignments, run_dir / "stats");
  }
  mark("stats", last);

  if (truth) {
    result.recovery = planted_ari(art.finer, *truth);
    json rec;
    rec["global_ari"] = result.recovery->global;
    rec["per_class_ari"] = result.recovery->per_class;
    write_text(run_dir / "recovery.json", rec.dump(2) + "\n");
  }

  json manifest;
  manifest["config"] = json::parse(echo);
  manifest["config_hash"] = config_hash(cfg);
  manifest["warnings"] = art.warnings;
  manifest["artifacts"] = {
      "source_features.finf", "source_labels.csv", "spe_model.bin",
      "spe_features.finf",    "hierarchy.json",    "assignments.csv",
      "fine_model.bin",       "fine_features.finf", "fused_features.finf",
      "eval_spenet.json",     "eval_finet.json",   "eval_spefinet.json",
      "stats"};
  write_text(run_dir / "manifest.json", manifest.dump(2) + "\n");

  timings["total"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                         clock::now() - t0)
                         .count();
  write_text(run_dir / "timings.json", timings.dump(2) + "\n");
  return result;
}

}  // namespace refinery
