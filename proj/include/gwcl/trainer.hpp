#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gwcl/features.hpp"
#include "gwcl/graph.hpp"
#include "gwcl/hsi_data.hpp"
#include "gwcl/net.hpp"
#include "gwcl/objective.hpp"

namespace gwcl {

/// Full hyperparameter record for a run. Defaults follow the Indian Pines
/// configuration; per-dataset values live in configs/*.conf.
struct TrainConfig {
  std::int64_t beta = 20;
  double sigma_m = 0.04;
  double sigma_n = 0.001;
  std::int64_t knn_k = 10;
  double lambda = 8.0;
  double eta1 = 0.001;
  double eta2 = 0.001;
  std::int64_t pretrain_epochs = 300;
  std::int64_t pretrain_batch = 1;
  std::int64_t main_epochs = 1000;
  std::int64_t main_batch = 512;
  std::int64_t hidden = 180;
  std::uint64_t seed = 1;
  int quota = 30;
  int fallback = 15;
  bool normalize_spectral = true;
  std::string activation = "relu";
  std::string optimizer = "adam";
  std::int64_t checkpoint_every = 0;  // epochs between checkpoints; 0 = final only

  // Ablation switches (one flag per ablation row).
  bool skip_stage1 = false;
  bool skip_stage2 = false;
  bool disable_gwcl = false;
  bool disable_ce = false;
  bool no_spatial_input = false;
  SimilarityKind similarity = SimilarityKind::graph;
  KnnBackend knn_backend = KnnBackend::brute;
  SymmetrizeMode symmetrize = SymmetrizeMode::knn_union;
  int threads = 0;

  /// Columns fed to the classifier: beta + 2, or beta with no_spatial_input.
  std::int64_t net_inputs() const { return no_spatial_input ? beta : beta + 2; }

  void validate() const;

  /// Flat `key=value` file; unknown keys are rejected. Lines starting with
  /// `#` are comments.
  static TrainConfig load_file(const std::string& path);
  void apply_kv(const std::string& key, const std::string& value);
  void save_file(const std::string& path) const;
};

/// One per optimizer step: the loss components written to the training log.
struct StepRecord {
  std::int64_t step = 0;
  double gwcl = 0.0;
  double ce = 0.0;
  double total = 0.0;
  std::int64_t pair_count = 0;
};

struct TrainState {
  MlpParams params;
  OptimizerState optimizer;
  Rng rng{0};
  std::int64_t epoch = 0;
  std::vector<StepRecord> history;
  std::int64_t empty_pair_batches = 0;

  void save(const std::string& stem) const;
  static TrainState load(const std::string& stem);
};

/// Fresh state: initialized parameters, zero moments, seeded generator.
TrainState init_state(const TrainConfig& config, std::int64_t classes);

/// Supervised pre-training: CE-only updates over shuffled labeled pixels at
/// eta1 (batch size from config, 1 by default). No-op under skip_stage1.
/// A non-empty `checkpoint_stem` enables periodic checkpoints per
/// config.checkpoint_every.
void pretrain(const FeatureMatrix& features, const Split& split, const TrainConfig& config,
              TrainState& state, const std::string& checkpoint_stem = {});

/// The mini-batches of one main-stage epoch: every batch holds all labeled
/// pixels followed by a without-replacement chunk of the shuffled unlabeled
/// pool, so each unlabeled pixel appears exactly once per epoch.
std::vector<std::vector<std::int32_t>> compose_epoch_batches(const Split& split, Rng& rng,
                                                             std::int64_t batch_size);

/// Semi-supervised mini-batch training on the combined objective: per batch,
/// the graph block over its nodes becomes the positive pair set, CE covers
/// the labeled rows, and one optimizer step at eta2 follows. Optimizer
/// moments are reset when entering this stage. No-op under skip_stage2.
void train_main(const FeatureMatrix& features, const SparseGraph& graph, const Split& split,
                const TrainConfig& config, TrainState& state,
                const std::string& checkpoint_stem = {});

/// Rows of `features` restricted to the classifier's input columns.
Eigen::MatrixXd gather_rows(const FeatureMatrix& features,
                            const std::vector<std::int32_t>& nodes, std::int64_t input_cols);

void append_train_log(const std::string& path, const std::vector<StepRecord>& history);

}  // namespace gwcl
