#include "gwcl/objective.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gwcl {

namespace {
constexpr double kLogFloor = 1e-12;
}

SimilarityKind similarity_kind_from_name(const std::string& name) {
  if (name == "gaussian") return SimilarityKind::gaussian;
  if (name == "indicator") return SimilarityKind::indicator;
  if (name == "graph") return SimilarityKind::graph;
  throw std::invalid_argument("unknown similarity kind: " + name);
}

const char* similarity_kind_name(SimilarityKind k) {
  switch (k) {
    case SimilarityKind::gaussian: return "gaussian";
    case SimilarityKind::indicator: return "indicator";
    case SimilarityKind::graph: return "graph";
  }
  return "?";
}

namespace {

double resolve_weight(double stored, SimilarityKind kind) {
  switch (kind) {
    case SimilarityKind::gaussian: return 1.0;
    case SimilarityKind::indicator: return stored > 0.0 ? 1.0 : 0.0;
    case SimilarityKind::graph: return stored;
  }
  return 0.0;
}

}  // namespace

double pair_similarity(const Eigen::RowVectorXd& z_i, const Eigen::RowVectorXd& z_j,
                       double weight, SimilarityKind kind) {
  if (z_i.size() != z_j.size()) throw std::invalid_argument("z vectors differ in length");
  if (weight < 0.0) throw std::invalid_argument("pair weight must be >= 0");
  const double w = resolve_weight(weight, kind);
  return std::exp(-w * (z_i - z_j).squaredNorm());
}

PairSet build_pair_set(const BatchBlock& block, SimilarityKind kind) {
  PairSet set;
  set.pairs.reserve(block.entries.size() / 2);
  for (const auto& e : block.entries) {
    if (e.p >= e.q) continue;  // symmetric block: count each unordered pair once
    const double w = resolve_weight(e.weight, kind);
    if (w > 0.0) set.pairs.push_back({e.p, e.q, w});
  }
  return set;
}

std::pair<double, Eigen::MatrixXd> gwcl_loss(const Eigen::MatrixXd& probs,
                                             const PairSet& pairs) {
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(probs.rows(), probs.cols());
  if (pairs.empty()) return {0.0, std::move(grad)};

  const double inv_count = 1.0 / static_cast<double>(pairs.size());
  double loss = 0.0;
  for (const auto& pr : pairs.pairs) {
    const Eigen::RowVectorXd diff = probs.row(pr.p) - probs.row(pr.q);
    loss += pr.weight * diff.squaredNorm();
    const Eigen::RowVectorXd g = (2.0 * pr.weight * inv_count) * diff;
    grad.row(pr.p) += g;
    grad.row(pr.q) -= g;
  }
  return {loss * inv_count, std::move(grad)};
}

std::pair<double, Eigen::MatrixXd> ce_loss(const Eigen::MatrixXd& probs,
                                           const std::vector<std::int32_t>& rows,
                                           const std::vector<std::int32_t>& targets) {
  if (rows.size() != targets.size()) {
    throw std::invalid_argument("rows and targets differ in length");
  }
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(probs.rows(), probs.cols());
  double loss = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::int32_t r = rows[i];
    const std::int32_t k = targets[i];
    if (r < 0 || r >= probs.rows() || k < 0 || k >= probs.cols()) {
      throw std::out_of_range("cross-entropy row or class out of range");
    }
    const double z = std::max(probs(r, k), kLogFloor);
    loss -= std::log(z);
    grad(r, k) -= 1.0 / z;
  }
  return {loss, std::move(grad)};
}

std::pair<LossReport, Eigen::MatrixXd> total_loss(double gwcl, const Eigen::MatrixXd& gwcl_grad,
                                                  double ce, const Eigen::MatrixXd& ce_grad,
                                                  double lambda, std::int64_t pair_count,
                                                  std::int64_t labeled_count) {
  if (lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
  if (gwcl_grad.rows() != ce_grad.rows() || gwcl_grad.cols() != ce_grad.cols()) {
    throw std::invalid_argument("loss gradients must cover the same batch");
  }
  LossReport report;
  report.gwcl = gwcl;
  report.ce = ce;
  report.total = gwcl + lambda * ce;
  report.pair_count = pair_count;
  report.labeled_count = labeled_count;
  report.lambda = lambda;
  Eigen::MatrixXd grad = gwcl_grad + lambda * ce_grad;
  return {report, std::move(grad)};
}

}  // namespace gwcl
