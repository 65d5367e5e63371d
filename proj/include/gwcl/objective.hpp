#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "gwcl/graph.hpp"

namespace gwcl {

/// How a pair's weight enters the similarity / loss:
///   gaussian  - unit weight regardless of edge strength
///   indicator - edge presence binarized to 1
///   graph     - the stored edge weight s_ij
enum class SimilarityKind { gaussian, indicator, graph };
SimilarityKind similarity_kind_from_name(const std::string& name);
const char* similarity_kind_name(SimilarityKind k);

/// Pair-wise similarity exp(-w * ||z_i - z_j||^2) with w resolved per kind.
double pair_similarity(const Eigen::RowVectorXd& z_i, const Eigen::RowVectorXd& z_j,
                       double weight, SimilarityKind kind);

/// Unordered positive pairs (p < q) from a batch similarity block, with the
/// kind-resolved weights. Entries with zero stored weight never appear.
struct PairSet {
  struct Pair {
    std::int32_t p, q;  // local batch indices, p < q
    double weight;      // > 0
  };
  std::vector<Pair> pairs;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

PairSet build_pair_set(const BatchBlock& block, SimilarityKind kind = SimilarityKind::graph);

/// Per-batch loss bookkeeping; total = gwcl + lambda * ce.
struct LossReport {
  double gwcl = 0.0;
  double ce = 0.0;
  double total = 0.0;
  std::int64_t pair_count = 0;
  std::int64_t labeled_count = 0;
  double lambda = 0.0;
};

/// Graph-weighted contrastive loss: mean over pairs of w * ||z_p - z_q||^2,
/// with its gradient in z. An empty pair set yields zero loss and gradient
/// (callers count those batches).
std::pair<double, Eigen::MatrixXd> gwcl_loss(const Eigen::MatrixXd& probs,
                                             const PairSet& pairs);

/// Summed cross entropy -sum_i log z[i, target_i] over the given rows, with
/// the gradient scattered into a full batch-shaped matrix. Probabilities are
/// floored at 1e-12 inside the log and the division.
std::pair<double, Eigen::MatrixXd> ce_loss(const Eigen::MatrixXd& probs,
                                           const std::vector<std::int32_t>& rows,
                                           const std::vector<std::int32_t>& targets);

/// Combines the two terms: report + dL/dz = d(gwcl)/dz + lambda * d(ce)/dz.
std::pair<LossReport, Eigen::MatrixXd> total_loss(double gwcl, const Eigen::MatrixXd& gwcl_grad,
                                                  double ce, const Eigen::MatrixXd& ce_grad,
                                                  double lambda, std::int64_t pair_count,
                                                  std::int64_t labeled_count);

}  // namespace gwcl
