#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gwcl/metrics.hpp"
#include "gwcl/png.hpp"
#include "gwcl/trainer.hpp"

namespace gwcl {

/// RGB colors indexed by class code; slot 0 is the reserved background color.
struct Palette {
  std::vector<std::array<std::uint8_t, 3>> colors;
};

/// Fixed color list shared by all rendered maps; throws when the request
/// exceeds the embedded list.
Palette default_palette(int classes);

/// M x N predicted class codes, 0 where background.
struct ClassMap {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::vector<std::uint16_t> codes;
};

/// A full reproduction: dataset, hyperparameters, repetition count.
/// Repetition r runs with seed base_seed + r.
struct ExperimentSpec {
  std::string cube_path;
  std::string labels_path;
  TrainConfig config;
  int repetitions = 10;
  std::string out_dir = "out";
  std::uint64_t base_seed = 1;
};

struct RunResult {
  bool ok = false;
  std::string error;
  MetricReport report;
  ClassMap map;
};

struct ExperimentResult {
  std::vector<RunResult> runs;
  MetricReport aggregated;  // over successful runs
  int failures = 0;
};

/// Argmax class (1-based) per valid pixel, computed in mini-batches; ties
/// resolve to the smallest class index. Batch size does not affect results.
std::vector<std::uint16_t> predict_all(const MlpParams& params, const FeatureMatrix& features,
                                       std::int64_t input_cols, std::int64_t batch_size = 4096,
                                       int threads = 0);

/// Confusion-matrix metrics of `preds` against the split's test partition.
MetricReport evaluate_split(const std::vector<std::uint16_t>& preds, const Split& split,
                            int classes);

ClassMap to_class_map(const PixelMap& map, const std::vector<std::uint16_t>& preds);

/// Lossless deterministic rendering; background uses palette slot 0.
void render_map(const ClassMap& map, const Palette& palette, const std::string& path);

/// Resolves a dataset path, falling back to $GWCL_DATA_DIR/<path> when the
/// file is not found directly.
std::string resolve_data_path(const std::string& path);

/// End-to-end reproduction: ingest, reduce, graph, two-stage training,
/// evaluation and rendering for every repetition. The PCA model, feature
/// matrix and graph depend only on the data and config (not the split seed),
/// so they are cached in out_dir and reused; stale caches are rebuilt.
/// A failing repetition is recorded and the remaining ones continue.
ExperimentResult run_pipeline(const ExperimentSpec& spec);

}  // namespace gwcl
