#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <iostream>

#include "gwcl/pipeline.hpp"

namespace {

using namespace gwcl;

struct CommonArgs {
  std::string config_path;
  std::string cube_path;
  std::string labels_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int reps = 0;
  // Ablation/override flags; only applied when passed.
  bool skip_stage1 = false, skip_stage2 = false, no_gwcl = false, no_ce = false,
       no_spatial = false;
  std::string similarity, knn_backend;
  int threads = -1;
};

void add_common_options(CLI::App* cmd, CommonArgs& args, bool needs_data) {
  cmd->add_option("--config", args.config_path, "key=value config file");
  auto* cube = cmd->add_option("--cube", args.cube_path, "cube raw/header stem");
  auto* labels = cmd->add_option("--labels", args.labels_path, "label raster stem");
  if (needs_data) {
    cube->required();
    labels->required();
  }
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--seed", args.seed, "base RNG seed")->each([&args](const std::string&) {
    args.seed_set = true;
  });
  cmd->add_flag("--skip-stage1", args.skip_stage1, "skip supervised pre-training");
  cmd->add_flag("--skip-stage2", args.skip_stage2, "skip semi-supervised training");
  cmd->add_flag("--no-gwcl", args.no_gwcl, "drop the contrastive term");
  cmd->add_flag("--no-ce", args.no_ce, "drop the cross-entropy term");
  cmd->add_flag("--no-spatial", args.no_spatial, "feed spectral features only");
  cmd->add_option("--similarity", args.similarity, "gaussian|indicator|graph");
  cmd->add_option("--knn-backend", args.knn_backend, "brute|kdtree");
  cmd->add_option("--threads", args.threads, "worker threads (0 = auto)");
}

TrainConfig resolve_config(const CommonArgs& args) {
  TrainConfig cfg;
  if (!args.config_path.empty()) cfg = TrainConfig::load_file(args.config_path);
  if (args.seed_set) cfg.seed = args.seed;
  if (args.skip_stage1) cfg.skip_stage1 = true;
  if (args.skip_stage2) cfg.skip_stage2 = true;
  if (args.no_gwcl) cfg.disable_gwcl = true;
  if (args.no_ce) cfg.disable_ce = true;
  if (args.no_spatial) cfg.no_spatial_input = true;
  if (!args.similarity.empty()) cfg.similarity = similarity_kind_from_name(args.similarity);
  if (!args.knn_backend.empty()) cfg.knn_backend = knn_backend_from_name(args.knn_backend);
  if (args.threads >= 0) cfg.threads = args.threads;
  cfg.validate();
  return cfg;
}

ExperimentSpec make_spec(const CommonArgs& args, const TrainConfig& cfg, int default_reps) {
  ExperimentSpec spec;
  spec.cube_path = args.cube_path;
  spec.labels_path = args.labels_path;
  spec.config = cfg;
  spec.repetitions = args.reps > 0 ? args.reps : default_reps;
  spec.out_dir = args.out_dir;
  spec.base_seed = cfg.seed;
  return spec;
}

int cmd_ingest(const CommonArgs& args) {
  const TrainConfig cfg = resolve_config(args);
  const HsiCube cube = load_cube(resolve_data_path(args.cube_path));
  std::vector<std::uint16_t> remap;
  const LabelRaster labels = load_labels(resolve_data_path(args.labels_path), &remap);
  if (labels.height != cube.height || labels.width != cube.width) {
    throw std::runtime_error("label raster dimensions do not match the cube");
  }
  std::cout << "cube: " << cube.height << "x" << cube.width << "x" << cube.bands << "\n";
  std::cout << "classes: " << labels.class_count << "\n";
  if (!remap.empty()) std::cout << "note: sparse class codes remapped to dense 1..c\n";
  const auto pops = labels.class_populations();
  for (std::size_t k = 0; k < pops.size(); ++k) {
    std::cout << "class " << (k + 1) << ": " << pops[k] << " pixels\n";
  }
  const Split split = make_split(labels, cfg.quota, cfg.fallback, cfg.seed);
  std::cout << "split: " << split.labeled.size() << " labeled, " << split.test.size()
            << " test\n";
  std::filesystem::create_directories(args.out_dir);
  const PixelMap map(labels, &cube);
  split.save((std::filesystem::path(args.out_dir) / "split.txt").string(), map);
  std::cout << "wrote " << args.out_dir << "/split.txt\n";
  return 0;
}

int cmd_reduce(const CommonArgs& args) {
  const TrainConfig cfg = resolve_config(args);
  const HsiCube cube = load_cube(resolve_data_path(args.cube_path));
  const LabelRaster labels = load_labels(resolve_data_path(args.labels_path));
  const PixelMap map(labels, &cube);
  const PcaModel model = fit_reduce(cube, map, cfg.beta);
  const FeatureMatrix features =
      assemble_features(cube, map, model, cfg.normalize_spectral, cfg.threads);
  std::filesystem::create_directories(args.out_dir);
  model.save((std::filesystem::path(args.out_dir) / "pca_model").string());
  features.save((std::filesystem::path(args.out_dir) / "features").string());
  double explained = 0.0;
  for (double e : model.explained) explained += e;
  std::cout << "reduced " << cube.bands << " bands to " << cfg.beta << " components ("
            << explained * 100.0 << "% variance), " << features.rows << " pixels\n";
  return 0;
}

int cmd_build_graph(const CommonArgs& args) {
  const TrainConfig cfg = resolve_config(args);
  const std::string stem = (std::filesystem::path(args.out_dir) / "features").string();
  FeatureMatrix features;
  if (std::filesystem::exists(stem + ".bin")) {
    features = FeatureMatrix::load(stem);
  } else {
    const HsiCube cube = load_cube(resolve_data_path(args.cube_path));
    const LabelRaster labels = load_labels(resolve_data_path(args.labels_path));
    const PixelMap map(labels, &cube);
    const PcaModel model = fit_reduce(cube, map, cfg.beta);
    features = assemble_features(cube, map, model, cfg.normalize_spectral, cfg.threads);
  }
  const MetricSpec metric(features.cols - 2, cfg.sigma_m, cfg.sigma_n);
  const SparseGraph graph = build_similarity(features, metric, cfg.knn_k, cfg.symmetrize,
                                             cfg.knn_backend, cfg.threads);
  std::filesystem::create_directories(args.out_dir);
  graph.save((std::filesystem::path(args.out_dir) / "graph").string());

  std::cout << "nodes: " << graph.nodes << "\nnnz: " << graph.nnz() << "\n";
  std::vector<std::int64_t> degrees(static_cast<std::size_t>(graph.nodes));
  for (std::int64_t i = 0; i < graph.nodes; ++i) degrees[i] = graph.degree(i);
  std::sort(degrees.begin(), degrees.end());
  std::cout << "degree min/median/max: " << degrees.front() << "/"
            << degrees[degrees.size() / 2] << "/" << degrees.back() << "\n";
  std::vector<double> w = graph.weights;
  std::sort(w.begin(), w.end());
  if (!w.empty()) {
    auto q = [&](double f) { return w[static_cast<std::size_t>(f * (w.size() - 1))]; };
    std::cout << "weight quantiles 0/25/50/75/100: " << q(0.0) << " " << q(0.25) << " "
              << q(0.5) << " " << q(0.75) << " " << q(1.0) << "\n";
  }
  return 0;
}

int cmd_train(const CommonArgs& args) {
  const TrainConfig cfg = resolve_config(args);
  ExperimentSpec spec = make_spec(args, cfg, 1);
  spec.repetitions = 1;
  const ExperimentResult result = run_pipeline(spec);
  if (result.runs.empty() || !result.runs.front().ok) {
    std::cerr << "training failed: "
              << (result.runs.empty() ? "no run" : result.runs.front().error) << "\n";
    return 1;
  }
  const MetricReport& r = result.runs.front().report;
  std::cout << "oa=" << r.oa << " aa=" << r.aa << " kappa=" << r.kappa << "\n";
  return 0;
}

int cmd_evaluate(const std::string& checkpoint, const std::string& features_stem,
                 const std::string& split_path, const std::string& out_path, int threads) {
  const TrainState state = TrainState::load(checkpoint);
  const FeatureMatrix features = FeatureMatrix::load(features_stem);
  const Split split = Split::load(split_path);
  const std::vector<std::uint16_t> preds =
      predict_all(state.params, features, state.params.inputs(), 4096, threads);
  int classes = static_cast<int>(state.params.classes());
  const MetricReport report = evaluate_split(preds, split, classes);
  report.save_kv(out_path);
  std::cout << "oa=" << report.oa << " aa=" << report.aa << " kappa=" << report.kappa << "\n";
  return 0;
}

int cmd_render_map(const std::string& checkpoint, const std::string& features_stem,
                   const std::string& labels_path, const std::string& out_path, int threads) {
  const TrainState state = TrainState::load(checkpoint);
  const FeatureMatrix features = FeatureMatrix::load(features_stem);
  const LabelRaster labels = load_labels(resolve_data_path(labels_path));
  const PixelMap map(labels);
  if (map.valid_count() != features.rows) {
    throw std::runtime_error("feature rows do not match the label raster's valid pixels");
  }
  const std::vector<std::uint16_t> preds =
      predict_all(state.params, features, state.params.inputs(), 4096, threads);
  render_map(to_class_map(map, preds), default_palette(labels.class_count), out_path);
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int cmd_run_experiment(const CommonArgs& args) {
  const TrainConfig cfg = resolve_config(args);
  const ExperimentSpec spec = make_spec(args, cfg, 10);
  const ExperimentResult result = run_pipeline(spec);
  int rep = 0;
  for (const auto& run : result.runs) {
    if (run.ok) {
      std::cout << "run " << rep << ": oa=" << run.report.oa << " aa=" << run.report.aa
                << " kappa=" << run.report.kappa << "\n";
    } else {
      std::cout << "run " << rep << ": FAILED (" << run.error << ")\n";
    }
    ++rep;
  }
  if (result.failures == static_cast<int>(result.runs.size())) return 1;
  std::cout << "aggregate: oa=" << result.aggregated.oa << "(" << result.aggregated.oa_stddev
            << ") aa=" << result.aggregated.aa << "(" << result.aggregated.aa_stddev
            << ") kappa=" << result.aggregated.kappa << "(" << result.aggregated.kappa_stddev
            << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-weighted contrastive learning for semi-supervised HSI classification"};
  app.require_subcommand(1);

  CommonArgs ingest_args, reduce_args, graph_args, train_args, experiment_args;
  std::string checkpoint, features_stem, split_path, labels_path, out_path;
  int eval_threads = 0;

  add_common_options(app.add_subcommand("ingest", "validate a dataset and export a split"),
                     ingest_args, true);
  add_common_options(app.add_subcommand("reduce", "fit the spectral reducer and features"),
                     reduce_args, true);
  add_common_options(app.add_subcommand("build-graph", "build the similarity graph"),
                     graph_args, false);
  add_common_options(app.add_subcommand("train", "run both training stages once"), train_args,
                     true);

  auto* evaluate_cmd = app.add_subcommand("evaluate", "score a checkpoint on a split");
  evaluate_cmd->add_option("--checkpoint", checkpoint)->required();
  evaluate_cmd->add_option("--features", features_stem)->required();
  evaluate_cmd->add_option("--split", split_path)->required();
  evaluate_cmd->add_option("--out", out_path, "metrics kv output")->required();
  evaluate_cmd->add_option("--threads", eval_threads);

  auto* render_cmd = app.add_subcommand("render-map", "render a prediction map");
  render_cmd->add_option("--checkpoint", checkpoint)->required();
  render_cmd->add_option("--features", features_stem)->required();
  render_cmd->add_option("--labels", labels_path)->required();
  render_cmd->add_option("--out", out_path, "png output path")->required();
  render_cmd->add_option("--threads", eval_threads);

  auto* experiment_cmd =
      app.add_subcommand("run-experiment", "repeat the full pipeline and aggregate");
  add_common_options(experiment_cmd, experiment_args, true);
  experiment_cmd->add_option("--reps", experiment_args.reps, "repetitions (default 10)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("ingest")) return cmd_ingest(ingest_args);
    if (app.got_subcommand("reduce")) return cmd_reduce(reduce_args);
    if (app.got_subcommand("build-graph")) return cmd_build_graph(graph_args);
    if (app.got_subcommand("train")) return cmd_train(train_args);
    if (app.got_subcommand("evaluate")) {
      return cmd_evaluate(checkpoint, features_stem, split_path, out_path, eval_threads);
    }
    if (app.got_subcommand("render-map")) {
      return cmd_render_map(checkpoint, features_stem, labels_path, out_path, eval_threads);
    }
    if (app.got_subcommand("run-experiment")) return cmd_run_experiment(experiment_args);
  } catch (const std::exception& e) {
    std::cerr << "gwcl: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
