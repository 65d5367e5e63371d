#include "gwcl/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gwcl/parallel.hpp"

namespace gwcl {

namespace {

// Background (slot 0) plus 20 class colors; the usual qualitative map used
// for land-cover figures.
constexpr std::array<std::array<std::uint8_t, 3>, 21> kPaletteColors = {{
    {0, 0, 0},        // background
    {255, 179, 0},    {128, 62, 117},  {255, 104, 0},   {166, 189, 215},
    {193, 0, 32},     {206, 162, 98},  {129, 112, 102}, {0, 125, 52},
    {246, 118, 142},  {0, 83, 138},    {255, 122, 92},  {83, 55, 122},
    {255, 142, 0},    {179, 40, 81},   {244, 200, 0},   {127, 24, 13},
    {147, 170, 0},    {89, 51, 21},    {241, 58, 19},   {35, 44, 22},
}};

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

bool cache_matches(const std::string& stem, const std::string& kind, const std::string& key) {
  if (!std::filesystem::exists(stem + ".hdr.txt") || !std::filesystem::exists(stem + ".bin")) {
    return false;
  }
  try {
    const ArrayBundle b = ArrayBundle::load(stem);
    return b.has_meta("kind") && b.meta("kind") == kind && b.has_meta("cache_key") &&
           b.meta("cache_key") == key;
  } catch (const std::exception&) {
    return false;
  }
}

std::string feature_cache_key(const ExperimentSpec& spec, std::int64_t p) {
  std::ostringstream os;
  os << "beta=" << spec.config.beta << ";norm=" << (spec.config.normalize_spectral ? 1 : 0)
     << ";p=" << p;
  return os.str();
}

std::string graph_cache_key(const ExperimentSpec& spec, std::int64_t p) {
  std::ostringstream os;
  os.precision(17);
  os << feature_cache_key(spec, p) << ";sm=" << spec.config.sigma_m
     << ";sn=" << spec.config.sigma_n << ";k=" << spec.config.knn_k
     << ";mode=" << (spec.config.symmetrize == SymmetrizeMode::knn_union ? "union" : "mutual");
  return os.str();
}

}  // namespace

Palette default_palette(int classes) {
  if (classes < 1 || classes + 1 > static_cast<int>(kPaletteColors.size())) {
    throw std::invalid_argument("palette supports 1.." +
                                std::to_string(kPaletteColors.size() - 1) + " classes, got " +
                                std::to_string(classes));
  }
  Palette p;
  p.colors.assign(kPaletteColors.begin(), kPaletteColors.begin() + classes + 1);
  return p;
}

std::vector<std::uint16_t> predict_all(const MlpParams& params, const FeatureMatrix& features,
                                       std::int64_t input_cols, std::int64_t batch_size,
                                       int threads) {
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  const std::int64_t p = features.rows;
  std::vector<std::uint16_t> preds(static_cast<std::size_t>(p), 0);
  const std::int64_t chunks = (p + batch_size - 1) / batch_size;
  parallel_chunks(chunks, threads, [&](std::int64_t cb, std::int64_t ce) {
    for (std::int64_t chunk = cb; chunk < ce; ++chunk) {
      const std::int64_t begin = chunk * batch_size;
      const std::int64_t end = std::min(p, begin + batch_size);
      Eigen::MatrixXd batch(end - begin, input_cols);
      for (std::int64_t i = begin; i < end; ++i) {
        const double* src = features.row(i);
        for (std::int64_t j = 0; j < input_cols; ++j) batch(i - begin, j) = src[j];
      }
      const ForwardTrace trace = forward(params, batch);
      for (std::int64_t i = begin; i < end; ++i) {
        // Strict > keeps the smallest class index on ties.
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < trace.probs.cols(); ++c) {
          if (trace.probs(i - begin, c) > trace.probs(i - begin, best)) best = c;
        }
        preds[static_cast<std::size_t>(i)] = static_cast<std::uint16_t>(best + 1);
      }
    }
  });
  return preds;
}

MetricReport evaluate_split(const std::vector<std::uint16_t>& preds, const Split& split,
                            int classes) {
  std::vector<std::uint16_t> pred_codes, truth_codes;
  pred_codes.reserve(split.test.size());
  truth_codes.reserve(split.test.size());
  for (const auto& t : split.test) {
    pred_codes.push_back(preds.at(static_cast<std::size_t>(t.flat)));
    truth_codes.push_back(t.class_code);
  }
  return evaluate(confusion(pred_codes, truth_codes, classes));
}

ClassMap to_class_map(const PixelMap& map, const std::vector<std::uint16_t>& preds) {
  ClassMap cm;
  cm.height = map.grid_height();
  cm.width = map.grid_width();
  cm.codes.assign(static_cast<std::size_t>(cm.height * cm.width), 0);
  for (std::int64_t i = 0; i < map.valid_count(); ++i) {
    cm.codes[static_cast<std::size_t>(map.row_of(i) * cm.width + map.col_of(i))] =
        preds.at(static_cast<std::size_t>(i));
  }
  return cm;
}

void render_map(const ClassMap& map, const Palette& palette, const std::string& path) {
  std::uint16_t max_code = 0;
  for (std::uint16_t c : map.codes) max_code = std::max(max_code, c);
  if (static_cast<std::size_t>(max_code) + 1 > palette.colors.size()) {
    throw std::invalid_argument("palette has " + std::to_string(palette.colors.size()) +
                                " colors; class map needs " + std::to_string(max_code + 1));
  }
  std::vector<std::uint8_t> rgb(map.codes.size() * 3);
  for (std::size_t i = 0; i < map.codes.size(); ++i) {
    const auto& c = palette.colors[map.codes[i]];
    rgb[3 * i] = c[0];
    rgb[3 * i + 1] = c[1];
    rgb[3 * i + 2] = c[2];
  }
  write_png_rgb(path, map.height, map.width, rgb);
}

std::string resolve_data_path(const std::string& path) {
  if (std::filesystem::exists(path) || std::filesystem::exists(path + ".hdr.txt")) return path;
  if (const char* root = std::getenv("GWCL_DATA_DIR"); root != nullptr) {
    const std::string joined = join(root, path);
    if (std::filesystem::exists(joined) || std::filesystem::exists(joined + ".hdr.txt")) {
      return joined;
    }
  }
  return path;
}

ExperimentResult run_pipeline(const ExperimentSpec& spec) {
  spec.config.validate();
  std::filesystem::create_directories(spec.out_dir);

  const HsiCube cube = load_cube(resolve_data_path(spec.cube_path));
  const LabelRaster labels = load_labels(resolve_data_path(spec.labels_path));
  if (labels.height != cube.height || labels.width != cube.width) {
    throw std::runtime_error("label raster dimensions do not match the cube");
  }
  if (labels.class_count < 2) {
    throw std::runtime_error("need at least two classes to classify");
  }
  const PixelMap map(labels, &cube);
  const std::int64_t p = map.valid_count();

  // Seed-independent artifacts, cached across repetitions.
  const std::string feat_stem = join(spec.out_dir, "features");
  const std::string pca_stem = join(spec.out_dir, "pca_model");
  const std::string graph_stem = join(spec.out_dir, "graph");
  const std::string feat_key = feature_cache_key(spec, p);
  const std::string graph_key = graph_cache_key(spec, p);

  FeatureMatrix features;
  if (cache_matches(feat_stem, "features", feat_key)) {
    features = FeatureMatrix::load(feat_stem);
  } else {
    const PcaModel model = fit_reduce(cube, map, spec.config.beta);
    model.save(pca_stem);
    features = assemble_features(cube, map, model, spec.config.normalize_spectral,
                                 spec.config.threads);
    ArrayBundle b;
    b.add(NamedArray::from_f64("data", features.data, {features.rows, features.cols}));
    std::vector<double> st;
    for (const auto& s : features.stats) {
      st.push_back(s.min);
      st.push_back(s.max);
      st.push_back(s.mean);
      st.push_back(s.stddev);
    }
    b.add(NamedArray::from_f64("stats", st,
                               {static_cast<std::int64_t>(features.stats.size()), 4}));
    b.set_meta("kind", "features");
    b.set_meta("cache_key", feat_key);
    b.save(feat_stem);
  }

  const MetricSpec metric(spec.config.beta, spec.config.sigma_m, spec.config.sigma_n);
  SparseGraph graph;
  if (cache_matches(graph_stem, "similarity-graph", graph_key)) {
    graph = SparseGraph::load(graph_stem);
  } else {
    graph = build_similarity(features, metric, spec.config.knn_k, spec.config.symmetrize,
                             spec.config.knn_backend, spec.config.threads);
    ArrayBundle b;
    b.add(NamedArray::from_i64("row_offsets", graph.row_offsets,
                               {static_cast<std::int64_t>(graph.row_offsets.size())}));
    b.add(NamedArray::from_i32("cols", graph.cols,
                               {static_cast<std::int64_t>(graph.cols.size())}));
    b.add(NamedArray::from_f64("weights", graph.weights,
                               {static_cast<std::int64_t>(graph.weights.size())}));
    b.set_meta("kind", "similarity-graph");
    b.set_meta("nodes", std::to_string(graph.nodes));
    b.set_meta("symmetric", graph.symmetric ? "1" : "0");
    b.set_meta("cache_key", graph_key);
    b.save(graph_stem);
  }

  const Palette palette = default_palette(labels.class_count);
  ExperimentResult result;
  std::vector<MetricReport> successful;
  for (int r = 0; r < spec.repetitions; ++r) {
    RunResult run;
    try {
      TrainConfig cfg = spec.config;
      cfg.seed = spec.base_seed + static_cast<std::uint64_t>(r);
      const Split split = make_split(labels, cfg.quota, cfg.fallback, cfg.seed);
      split.save(join(spec.out_dir, "split_run" + std::to_string(r) + ".txt"), map);

      const std::string ckpt_stem = join(spec.out_dir, "checkpoint_run" + std::to_string(r));
      TrainState state = init_state(cfg, labels.class_count);
      pretrain(features, split, cfg, state, ckpt_stem);
      train_main(features, graph, split, cfg, state, ckpt_stem);
      state.save(ckpt_stem);

      const std::vector<std::uint16_t> preds =
          predict_all(state.params, features, cfg.net_inputs(), 4096, cfg.threads);
      run.report = evaluate_split(preds, split, labels.class_count);
      run.map = to_class_map(map, preds);
      run.ok = true;

      run.report.save_kv(join(spec.out_dir, "metrics_run" + std::to_string(r) + ".kv"));
      render_map(run.map, palette, join(spec.out_dir, "map_run" + std::to_string(r) + ".png"));
      append_train_log(join(spec.out_dir, "train_log_run" + std::to_string(r) + ".csv"),
                       state.history);
      successful.push_back(run.report);
    } catch (const std::exception& e) {
      run.ok = false;
      run.error = e.what();
      ++result.failures;
      std::cerr << "gwcl: repetition " << r << " failed: " << e.what() << "\n";
    }
    result.runs.push_back(std::move(run));
  }

  if (!successful.empty()) {
    result.aggregated = aggregate(successful);
    result.aggregated.save_kv(join(spec.out_dir, "metrics_aggregate.kv"));
  }
  return result;
}

}  // namespace gwcl
