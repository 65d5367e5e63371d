#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "gwcl/rng.hpp"

namespace gwcl {

enum class Activation { relu, tanh_ };
Activation activation_from_name(const std::string& name);
const char* activation_name(Activation a);

/// Two-layer fully connected classifier: d -> hidden -> c with a softmax
/// output. Batches are row vectors, so layer products are x * W + b.
struct MlpParams {
  Eigen::MatrixXd w1;       // d x hidden
  Eigen::RowVectorXd b1;    // hidden
  Eigen::MatrixXd w2;       // hidden x c
  Eigen::RowVectorXd b2;    // c
  Activation activation = Activation::relu;

  std::int64_t inputs() const { return w1.rows(); }
  std::int64_t hidden() const { return w1.cols(); }
  std::int64_t classes() const { return w2.cols(); }
  std::int64_t parameter_count() const {
    return w1.size() + b1.size() + w2.size() + b2.size();
  }
  bool all_finite() const;
};

/// Glorot-uniform weights (limit sqrt(6 / (fan_in + fan_out))), zero biases.
/// Deterministic per seed; matrices fill row-major.
MlpParams init_params(std::int64_t inputs, std::int64_t hidden, std::int64_t classes,
                      std::uint64_t seed, Activation activation = Activation::relu);

/// Everything backward() needs, retained from the forward pass.
struct ForwardTrace {
  Eigen::MatrixXd input;   // B x d
  Eigen::MatrixXd pre1;    // B x hidden, pre-activation
  Eigen::MatrixXd act1;    // B x hidden
  Eigen::MatrixXd logits;  // B x c
  Eigen::MatrixXd probs;   // B x c, rows sum to 1
};

/// Row-wise softmax(act(x W1 + b1) W2 + b2), stabilized by max subtraction.
ForwardTrace forward(const MlpParams& params, const Eigen::MatrixXd& batch);

struct Gradients {
  Eigen::MatrixXd w1;
  Eigen::RowVectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::RowVectorXd b2;
};

/// Exact gradients of any scalar loss given dL/dprobs, chained through the
/// softmax Jacobian and both layers.
Gradients backward(const MlpParams& params, const ForwardTrace& trace,
                   const Eigen::MatrixXd& dloss_dprobs);

/// Bias-corrected adaptive moment estimation; `sgd` flag switches to plain
/// gradient descent with the same learning rate.
struct OptimizerState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool sgd = false;
  std::int64_t step = 0;
  Eigen::MatrixXd m_w1, v_w1, m_w2, v_w2;
  Eigen::RowVectorXd m_b1, v_b1, m_b2, v_b2;

  static OptimizerState create(const MlpParams& params, double learning_rate,
                               bool sgd = false);
  /// Zeroes moments and the step counter, keeping hyperparameters.
  void reset(double learning_rate);
};

/// One optimizer update in place. Throws on non-finite gradients.
void adam_step(MlpParams& params, const Gradients& grads, OptimizerState& state);

/// Parameter + optimizer checkpoint; reload resumes bit-for-bit.
void save_checkpoint(const std::string& stem, const MlpParams& params,
                     const OptimizerState& state, std::int64_t epoch,
                     const std::uint64_t rng_state[4]);
void load_checkpoint(const std::string& stem, MlpParams& params, OptimizerState& state,
                     std::int64_t& epoch, std::uint64_t rng_state[4]);

}  // namespace gwcl
