#include "gwcl/trainer.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gwcl {

void TrainConfig::validate() const {
  if (beta < 1) throw std::invalid_argument("beta must be >= 1");
  if (!(sigma_m > 0.0) || !(sigma_n > 0.0)) {
    throw std::invalid_argument("sigma_m and sigma_n must be positive");
  }
  if (knn_k < 1) throw std::invalid_argument("K must be >= 1");
  if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
  if (!(eta1 > 0.0) || !(eta2 > 0.0)) throw std::invalid_argument("learning rates must be positive");
  if (pretrain_epochs < 0 || main_epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (pretrain_batch < 1 || main_batch < 1) throw std::invalid_argument("batch sizes must be >= 1");
  if (hidden < 1) throw std::invalid_argument("hidden width must be >= 1");
  if (quota < 1 || fallback < 1 || fallback > quota) {
    throw std::invalid_argument("need 1 <= fallback <= quota");
  }
  activation_from_name(activation);
  if (optimizer != "adam" && optimizer != "sgd") {
    throw std::invalid_argument("optimizer must be adam or sgd");
  }
}

void TrainConfig::apply_kv(const std::string& key, const std::string& value) {
  if (key == "beta") beta = std::stoll(value);
  else if (key == "sigma_m") sigma_m = std::stod(value);
  else if (key == "sigma_n") sigma_n = std::stod(value);
  else if (key == "knn_k") knn_k = std::stoll(value);
  else if (key == "lambda") lambda = std::stod(value);
  else if (key == "eta1") eta1 = std::stod(value);
  else if (key == "eta2") eta2 = std::stod(value);
  else if (key == "pretrain_epochs") pretrain_epochs = std::stoll(value);
  else if (key == "pretrain_batch") pretrain_batch = std::stoll(value);
  else if (key == "main_epochs") main_epochs = std::stoll(value);
  else if (key == "main_batch") main_batch = std::stoll(value);
  else if (key == "hidden") hidden = std::stoll(value);
  else if (key == "seed") seed = std::stoull(value);
  else if (key == "quota") quota = std::stoi(value);
  else if (key == "fallback") fallback = std::stoi(value);
  else if (key == "normalize_spectral") normalize_spectral = value == "1" || value == "true";
  else if (key == "checkpoint_every") checkpoint_every = std::stoll(value);
  else if (key == "activation") activation = value;
  else if (key == "optimizer") optimizer = value;
  else if (key == "skip_stage1") skip_stage1 = value == "1" || value == "true";
  else if (key == "skip_stage2") skip_stage2 = value == "1" || value == "true";
  else if (key == "disable_gwcl") disable_gwcl = value == "1" || value == "true";
  else if (key == "disable_ce") disable_ce = value == "1" || value == "true";
  else if (key == "no_spatial_input") no_spatial_input = value == "1" || value == "true";
  else if (key == "similarity") similarity = similarity_kind_from_name(value);
  else if (key == "knn_backend") knn_backend = knn_backend_from_name(value);
  else if (key == "symmetrize") symmetrize = symmetrize_mode_from_name(value);
  else if (key == "threads") threads = std::stoi(value);
  else throw std::invalid_argument("unknown config key: " + key);
}

TrainConfig TrainConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  TrainConfig c;
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto strip = [](std::string s) {
      const std::size_t b = s.find_first_not_of(" \t\r");
      const std::size_t e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    if (!key.empty()) c.apply_kv(key, value);
  }
  c.validate();
  return c;
}

void TrainConfig::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open config for writing: " + path);
  out.precision(17);
  out << "beta=" << beta << "\nsigma_m=" << sigma_m << "\nsigma_n=" << sigma_n
      << "\nknn_k=" << knn_k << "\nlambda=" << lambda << "\neta1=" << eta1
      << "\neta2=" << eta2 << "\npretrain_epochs=" << pretrain_epochs
      << "\npretrain_batch=" << pretrain_batch << "\nmain_epochs=" << main_epochs
      << "\nmain_batch=" << main_batch << "\nhidden=" << hidden << "\nseed=" << seed
      << "\nquota=" << quota << "\nfallback=" << fallback
      << "\nnormalize_spectral=" << (normalize_spectral ? 1 : 0)
      << "\nactivation=" << activation << "\noptimizer=" << optimizer
      << "\nskip_stage1=" << (skip_stage1 ? 1 : 0) << "\nskip_stage2=" << (skip_stage2 ? 1 : 0)
      << "\ndisable_gwcl=" << (disable_gwcl ? 1 : 0) << "\ndisable_ce=" << (disable_ce ? 1 : 0)
      << "\nno_spatial_input=" << (no_spatial_input ? 1 : 0)
      << "\nsimilarity=" << similarity_kind_name(similarity)
      << "\nknn_backend=" << (knn_backend == KnnBackend::brute ? "brute" : "kdtree")
      << "\nsymmetrize=" << (symmetrize == SymmetrizeMode::knn_union ? "union" : "mutual")
      << "\nthreads=" << threads << "\ncheckpoint_every=" << checkpoint_every << "\n";
}

TrainState init_state(const TrainConfig& config, std::int64_t classes) {
  config.validate();
  TrainState state;
  state.params = init_params(config.net_inputs(), config.hidden, classes, config.seed,
                             activation_from_name(config.activation));
  state.optimizer =
      OptimizerState::create(state.params, config.eta1, config.optimizer == "sgd");
  state.rng.reseed(config.seed ^ 0x5eedf00d5eedf00dULL);
  return state;
}

Eigen::MatrixXd gather_rows(const FeatureMatrix& features,
                            const std::vector<std::int32_t>& nodes, std::int64_t input_cols) {
  Eigen::MatrixXd batch(static_cast<Eigen::Index>(nodes.size()), input_cols);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double* src = features.row(nodes[i]);
    for (std::int64_t j = 0; j < input_cols; ++j) {
      batch(static_cast<Eigen::Index>(i), j) = src[j];
    }
  }
  return batch;
}

void pretrain(const FeatureMatrix& features, const Split& split, const TrainConfig& config,
              TrainState& state, const std::string& checkpoint_stem) {
  if (config.skip_stage1) return;
  if (split.labeled.empty()) throw std::invalid_argument("no labeled pixels to pre-train on");
  state.optimizer.reset(config.eta1);

  const std::int64_t d = config.net_inputs();
  std::vector<std::int32_t> order(split.labeled.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::int32_t>(i);

  for (std::int64_t epoch = 0; epoch < config.pretrain_epochs; ++epoch) {
    state.rng.shuffle(order);
    for (std::size_t pos = 0; pos < order.size(); pos += config.pretrain_batch) {
      const std::size_t end = std::min(order.size(), pos + config.pretrain_batch);
      std::vector<std::int32_t> nodes;
      std::vector<std::int32_t> rows, targets;
      nodes.reserve(end - pos);
      for (std::size_t i = pos; i < end; ++i) {
        const auto& lp = split.labeled[static_cast<std::size_t>(order[i])];
        rows.push_back(static_cast<std::int32_t>(nodes.size()));
        targets.push_back(lp.class_code - 1);
        nodes.push_back(lp.flat);
      }
      const ForwardTrace trace = forward(state.params, gather_rows(features, nodes, d));
      auto [ce, ce_grad] = ce_loss(trace.probs, rows, targets);
      if (!std::isfinite(ce)) {
        throw std::runtime_error("pre-training diverged at epoch " + std::to_string(epoch));
      }
      const Gradients grads = backward(state.params, trace, ce_grad);
      adam_step(state.params, grads, state.optimizer);
      state.history.push_back({state.optimizer.step, 0.0, ce, ce, 0});
    }
    ++state.epoch;
    if (!checkpoint_stem.empty() && config.checkpoint_every > 0 &&
        (epoch + 1) % config.checkpoint_every == 0) {
      state.save(checkpoint_stem);
    }
  }
  if (!state.params.all_finite()) throw std::runtime_error("pre-training produced non-finite parameters");
}

std::vector<std::vector<std::int32_t>> compose_epoch_batches(const Split& split, Rng& rng,
                                                             std::int64_t batch_size) {
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (batch_size > static_cast<std::int64_t>(split.unlabeled.size())) {
    batch_size = static_cast<std::int64_t>(split.unlabeled.size());
  }
  std::vector<std::int32_t> pool = split.unlabeled;
  rng.shuffle(pool);

  std::vector<std::vector<std::int32_t>> batches;
  if (pool.empty()) {
    std::vector<std::int32_t> batch;
    batch.reserve(split.labeled.size());
    for (const auto& lp : split.labeled) batch.push_back(lp.flat);
    batches.push_back(std::move(batch));
    return batches;
  }
  for (std::size_t pos = 0; pos < pool.size(); pos += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(pool.size(), pos + static_cast<std::size_t>(batch_size));
    std::vector<std::int32_t> batch;
    batch.reserve(split.labeled.size() + (end - pos));
    for (const auto& lp : split.labeled) batch.push_back(lp.flat);
    batch.insert(batch.end(), pool.begin() + static_cast<std::ptrdiff_t>(pos),
                 pool.begin() + static_cast<std::ptrdiff_t>(end));
    batches.push_back(std::move(batch));
  }
  return batches;
}

void train_main(const FeatureMatrix& features, const SparseGraph& graph, const Split& split,
                const TrainConfig& config, TrainState& state,
                const std::string& checkpoint_stem) {
  if (config.skip_stage2) return;
  if (graph.nodes != features.rows) {
    throw std::invalid_argument("graph node count does not match feature rows");
  }
  state.optimizer.reset(config.eta2);

  const std::int64_t d = config.net_inputs();
  const std::int64_t l = static_cast<std::int64_t>(split.labeled.size());
  std::vector<std::int32_t> labeled_rows(static_cast<std::size_t>(l));
  std::vector<std::int32_t> labeled_targets(static_cast<std::size_t>(l));
  for (std::int64_t i = 0; i < l; ++i) {
    labeled_rows[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(i);
    labeled_targets[static_cast<std::size_t>(i)] =
        split.labeled[static_cast<std::size_t>(i)].class_code - 1;
  }

  for (std::int64_t epoch = 0; epoch < config.main_epochs; ++epoch) {
    const auto batches = compose_epoch_batches(split, state.rng, config.main_batch);
    for (const auto& nodes : batches) {
      const ForwardTrace trace = forward(state.params, gather_rows(features, nodes, d));

      double gw = 0.0;
      Eigen::MatrixXd gw_grad = Eigen::MatrixXd::Zero(trace.probs.rows(), trace.probs.cols());
      std::int64_t pair_count = 0;
      if (!config.disable_gwcl) {
        const BatchBlock block = batch_submatrix(graph, nodes);
        const PairSet pairs = build_pair_set(block, config.similarity);
        pair_count = static_cast<std::int64_t>(pairs.size());
        if (pairs.empty()) {
          ++state.empty_pair_batches;
        } else {
          std::tie(gw, gw_grad) = gwcl_loss(trace.probs, pairs);
        }
      }

      double ce = 0.0;
      Eigen::MatrixXd ce_grad = Eigen::MatrixXd::Zero(trace.probs.rows(), trace.probs.cols());
      if (!config.disable_ce && l > 0) {
        std::tie(ce, ce_grad) = ce_loss(trace.probs, labeled_rows, labeled_targets);
      }

      auto [report, dz] =
          total_loss(gw, gw_grad, ce, ce_grad, config.disable_ce ? 0.0 : config.lambda,
                     pair_count, l);
      if (!std::isfinite(report.total)) {
        throw std::runtime_error("training diverged at epoch " + std::to_string(epoch));
      }
      const Gradients grads = backward(state.params, trace, dz);
      adam_step(state.params, grads, state.optimizer);
      state.history.push_back(
          {state.optimizer.step, report.gwcl, report.ce, report.total, report.pair_count});
    }
    ++state.epoch;
    if (!checkpoint_stem.empty() && config.checkpoint_every > 0 &&
        (epoch + 1) % config.checkpoint_every == 0) {
      state.save(checkpoint_stem);
    }
  }
  if (!state.params.all_finite()) throw std::runtime_error("training produced non-finite parameters");
}

void TrainState::save(const std::string& stem) const {
  save_checkpoint(stem, params, optimizer, epoch, rng.state());
}

TrainState TrainState::load(const std::string& stem) {
  TrainState state;
  std::uint64_t rng_state[4];
  load_checkpoint(stem, state.params, state.optimizer, state.epoch, rng_state);
  state.rng.set_state(rng_state);
  return state;
}

void append_train_log(const std::string& path, const std::vector<StepRecord>& history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open training log for writing: " + path);
  out << "step,l_gwcl,l_ce,total,pair_count\n";
  out.precision(17);
  for (const auto& rec : history) {
    out << rec.step << "," << rec.gwcl << "," << rec.ce << "," << rec.total << ","
        << rec.pair_count << "\n";
  }
}

}  // namespace gwcl
