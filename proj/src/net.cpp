#include "gwcl/net.hpp"

#include <cmath>
#include <stdexcept>

#include "gwcl/io.hpp"

namespace gwcl {

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh_;
  throw std::invalid_argument("unknown activation: " + name);
}

const char* activation_name(Activation a) {
  return a == Activation::relu ? "relu" : "tanh";
}

bool MlpParams::all_finite() const {
  return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite();
}

MlpParams init_params(std::int64_t inputs, std::int64_t hidden, std::int64_t classes,
                      std::uint64_t seed, Activation activation) {
  if (inputs < 1 || hidden < 1 || classes < 1) {
    throw std::invalid_argument("layer sizes must be >= 1");
  }
  MlpParams p;
  p.activation = activation;
  p.w1.resize(inputs, hidden);
  p.b1 = Eigen::RowVectorXd::Zero(hidden);
  p.w2.resize(hidden, classes);
  p.b2 = Eigen::RowVectorXd::Zero(classes);

  Rng rng(seed);
  const auto fill = [&rng](Eigen::MatrixXd& w) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-limit, limit);
    }
  };
  fill(p.w1);
  fill(p.w2);
  return p;
}

ForwardTrace forward(const MlpParams& params, const Eigen::MatrixXd& batch) {
  if (batch.cols() != params.inputs()) {
    throw std::invalid_argument("batch width " + std::to_string(batch.cols()) +
                                " != network input size " + std::to_string(params.inputs()));
  }
  if (!batch.allFinite()) throw std::invalid_argument("batch contains non-finite values");

  ForwardTrace t;
  t.input = batch;
  t.pre1 = (batch * params.w1).rowwise() + params.b1;
  if (params.activation == Activation::relu) {
    t.act1 = t.pre1.cwiseMax(0.0);
  } else {
    t.act1 = t.pre1.array().tanh().matrix();
  }
  t.logits = (t.act1 * params.w2).rowwise() + params.b2;

  t.probs.resize(t.logits.rows(), t.logits.cols());
  for (Eigen::Index r = 0; r < t.logits.rows(); ++r) {
    const double peak = t.logits.row(r).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index c = 0; c < t.logits.cols(); ++c) {
      const double e = std::exp(t.logits(r, c) - peak);
      t.probs(r, c) = e;
      sum += e;
    }
    t.probs.row(r) /= sum;
  }
  return t;
}

Gradients backward(const MlpParams& params, const ForwardTrace& trace,
                   const Eigen::MatrixXd& dloss_dprobs) {
  if (dloss_dprobs.rows() != trace.probs.rows() ||
      dloss_dprobs.cols() != trace.probs.cols()) {
    throw std::invalid_argument("dL/dz shape does not match the forward trace");
  }

  // Softmax Jacobian: dL/dlogit_k = z_k * (g_k - sum_j g_j z_j).
  Eigen::MatrixXd dlogits(trace.probs.rows(), trace.probs.cols());
  for (Eigen::Index r = 0; r < trace.probs.rows(); ++r) {
    const double dot = dloss_dprobs.row(r).dot(trace.probs.row(r));
    dlogits.row(r) =
        trace.probs.row(r).cwiseProduct(dloss_dprobs.row(r) -
                                        Eigen::RowVectorXd::Constant(trace.probs.cols(), dot));
  }

  Gradients g;
  g.w2 = trace.act1.transpose() * dlogits;
  g.b2 = dlogits.colwise().sum();
  Eigen::MatrixXd dact1 = dlogits * params.w2.transpose();
  Eigen::MatrixXd dpre1;
  if (params.activation == Activation::relu) {
    dpre1 = (trace.pre1.array() > 0.0).cast<double>() * dact1.array();
  } else {
    dpre1 = (1.0 - trace.act1.array().square()) * dact1.array();
  }
  g.w1 = trace.input.transpose() * dpre1;
  g.b1 = dpre1.colwise().sum();
  return g;
}

OptimizerState OptimizerState::create(const MlpParams& params, double learning_rate,
                                      bool sgd) {
  OptimizerState s;
  s.learning_rate = learning_rate;
  s.sgd = sgd;
  s.m_w1 = Eigen::MatrixXd::Zero(params.w1.rows(), params.w1.cols());
  s.v_w1 = s.m_w1;
  s.m_w2 = Eigen::MatrixXd::Zero(params.w2.rows(), params.w2.cols());
  s.v_w2 = s.m_w2;
  s.m_b1 = Eigen::RowVectorXd::Zero(params.b1.size());
  s.v_b1 = s.m_b1;
  s.m_b2 = Eigen::RowVectorXd::Zero(params.b2.size());
  s.v_b2 = s.m_b2;
  return s;
}

void OptimizerState::reset(double new_learning_rate) {
  learning_rate = new_learning_rate;
  step = 0;
  m_w1.setZero();
  v_w1.setZero();
  m_w2.setZero();
  v_w2.setZero();
  m_b1.setZero();
  v_b1.setZero();
  m_b2.setZero();
  v_b2.setZero();
}

namespace {

template <typename Mat>
void adam_update(Mat& param, const Mat& grad, Mat& m, Mat& v, const OptimizerState& s,
                 double bias1, double bias2) {
  if (!grad.allFinite()) {
    throw std::runtime_error("non-finite gradient encountered; aborting training");
  }
  if (s.sgd) {
    param.array() -= s.learning_rate * grad.array();
    return;
  }
  m.array() = s.beta1 * m.array() + (1.0 - s.beta1) * grad.array();
  v.array() = s.beta2 * v.array() + (1.0 - s.beta2) * grad.array().square();
  param.array() -=
      s.learning_rate * (m.array() / bias1) / ((v.array() / bias2).sqrt() + s.epsilon);
}

}  // namespace

void adam_step(MlpParams& params, const Gradients& grads, OptimizerState& state) {
  ++state.step;
  const double bias1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  adam_update(params.w1, grads.w1, state.m_w1, state.v_w1, state, bias1, bias2);
  adam_update(params.w2, grads.w2, state.m_w2, state.v_w2, state, bias1, bias2);
  adam_update(params.b1, grads.b1, state.m_b1, state.v_b1, state, bias1, bias2);
  adam_update(params.b2, grads.b2, state.m_b2, state.v_b2, state, bias1, bias2);
}

namespace {

std::vector<double> to_vec(const Eigen::MatrixXd& m) {
  std::vector<double> v(static_cast<std::size_t>(m.size()));
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) v[static_cast<std::size_t>(idx++)] = m(i, j);
  }
  return v;
}

Eigen::MatrixXd from_vec(const std::vector<double>& v, std::int64_t rows, std::int64_t cols) {
  Eigen::MatrixXd m(rows, cols);
  std::size_t idx = 0;
  for (std::int64_t i = 0; i < rows; ++i) {
    for (std::int64_t j = 0; j < cols; ++j) m(i, j) = v[idx++];
  }
  return m;
}

void add_matrix(ArrayBundle& b, const std::string& name, const Eigen::MatrixXd& m) {
  b.add(NamedArray::from_f64(name, to_vec(m), {m.rows(), m.cols()}));
}

Eigen::MatrixXd get_matrix(const ArrayBundle& b, const std::string& name) {
  const NamedArray& a = b.get(name);
  return from_vec(a.as_f64(), a.shape.at(0), a.shape.at(1));
}

}  // namespace

void save_checkpoint(const std::string& stem, const MlpParams& params,
                     const OptimizerState& state, std::int64_t epoch,
                     const std::uint64_t rng_state[4]) {
  ArrayBundle b;
  add_matrix(b, "w1", params.w1);
  add_matrix(b, "b1", params.b1);
  add_matrix(b, "w2", params.w2);
  add_matrix(b, "b2", params.b2);
  add_matrix(b, "m_w1", state.m_w1);
  add_matrix(b, "v_w1", state.v_w1);
  add_matrix(b, "m_b1", state.m_b1);
  add_matrix(b, "v_b1", state.v_b1);
  add_matrix(b, "m_w2", state.m_w2);
  add_matrix(b, "v_w2", state.v_w2);
  add_matrix(b, "m_b2", state.m_b2);
  add_matrix(b, "v_b2", state.v_b2);
  b.add(NamedArray::from_u64("rng_state",
                             {rng_state[0], rng_state[1], rng_state[2], rng_state[3]}, {4}));
  b.set_meta("kind", "checkpoint");
  b.set_meta("activation", activation_name(params.activation));
  b.set_meta("learning_rate", std::to_string(state.learning_rate));
  b.set_meta("sgd", state.sgd ? "1" : "0");
  b.set_meta("step", std::to_string(state.step));
  b.set_meta("epoch", std::to_string(epoch));
  b.save(stem);
}

void load_checkpoint(const std::string& stem, MlpParams& params, OptimizerState& state,
                     std::int64_t& epoch, std::uint64_t rng_state[4]) {
  const ArrayBundle b = ArrayBundle::load(stem);
  params.w1 = get_matrix(b, "w1");
  params.b1 = get_matrix(b, "b1");
  params.w2 = get_matrix(b, "w2");
  params.b2 = get_matrix(b, "b2");
  params.activation = activation_from_name(b.meta("activation"));
  state.m_w1 = get_matrix(b, "m_w1");
  state.v_w1 = get_matrix(b, "v_w1");
  state.m_b1 = get_matrix(b, "m_b1");
  state.v_b1 = get_matrix(b, "v_b1");
  state.m_w2 = get_matrix(b, "m_w2");
  state.v_w2 = get_matrix(b, "v_w2");
  state.m_b2 = get_matrix(b, "m_b2");
  state.v_b2 = get_matrix(b, "v_b2");
  state.learning_rate = std::stod(b.meta("learning_rate"));
  state.sgd = b.meta("sgd") == "1";
  state.step = std::stoll(b.meta("step"));
  epoch = std::stoll(b.meta("epoch"));
  const std::vector<std::uint64_t> rs = b.get("rng_state").as_u64();
  for (int i = 0; i < 4; ++i) rng_state[i] = rs[static_cast<std::size_t>(i)];
}

}  // namespace gwcl
