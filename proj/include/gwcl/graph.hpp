#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gwcl/features.hpp"

namespace gwcl {

/// Diagonal Mahalanobis metric Sigma = diag([1_beta; sigma_m; sigma_n]) over
/// d = beta + 2 feature dimensions.
class MetricSpec {
 public:
  MetricSpec(std::int64_t beta, double sigma_m, double sigma_n);

  std::int64_t beta() const { return beta_; }
  std::int64_t dims() const { return beta_ + 2; }
  double sigma_m() const { return sigma_m_; }
  double sigma_n() const { return sigma_n_; }

  /// 1 / Sigma_kk per dimension.
  const std::vector<double>& inverse_diag() const { return inv_diag_; }
  /// 1 / sqrt(Sigma_kk) per dimension, for the scaled-space backends.
  const std::vector<double>& inverse_sqrt_diag() const { return inv_sqrt_; }

 private:
  std::int64_t beta_;
  double sigma_m_, sigma_n_;
  std::vector<double> inv_diag_, inv_sqrt_;
};

/// Quadratic form (x_i - x_j)^T Sigma^-1 (x_i - x_j); zero iff rows equal.
double mahalanobis_sq(std::span<const double> x_i, std::span<const double> x_j,
                      const MetricSpec& metric);

enum class KnnBackend { brute, kdtree };
enum class SymmetrizeMode { knn_union, mutual };

KnnBackend knn_backend_from_name(const std::string& name);
SymmetrizeMode symmetrize_mode_from_name(const std::string& name);

/// K nearest neighbors of every node, row-major P x K. Neighbors are ordered
/// by (distance, index) ascending; ties at the K-th distance resolve to the
/// smaller index. Both backends are exact and produce identical lists.
struct NeighborLists {
  std::int64_t nodes = 0;
  std::int64_t k = 0;
  std::vector<std::int32_t> ids;      // P*K
  std::vector<double> dist_sq;        // P*K, Mahalanobis quadratic form

  std::span<const std::int32_t> row(std::int64_t i) const {
    return {ids.data() + i * k, static_cast<std::size_t>(k)};
  }
};

NeighborLists knn_neighbors(const FeatureMatrix& features, const MetricSpec& metric,
                            std::int64_t k, KnnBackend backend = KnnBackend::brute,
                            int threads = 0);

/// K-NN similarity graph in CSR form: s_ij = exp(-mahalanobis_sq / 2) on the
/// symmetrized neighbor pattern. No self-loops; column indices sorted per
/// row; weights in (0, 1].
struct SparseGraph {
  std::int64_t nodes = 0;
  std::vector<std::int64_t> row_offsets;  // P + 1
  std::vector<std::int32_t> cols;
  std::vector<double> weights;
  bool symmetric = false;

  std::int64_t nnz() const { return static_cast<std::int64_t>(cols.size()); }
  std::int64_t degree(std::int64_t i) const { return row_offsets[i + 1] - row_offsets[i]; }
  std::span<const std::int32_t> row_cols(std::int64_t i) const {
    return {cols.data() + row_offsets[i],
            static_cast<std::size_t>(row_offsets[i + 1] - row_offsets[i])};
  }
  std::span<const double> row_weights(std::int64_t i) const {
    return {weights.data() + row_offsets[i],
            static_cast<std::size_t>(row_offsets[i + 1] - row_offsets[i])};
  }
  /// Stored weight of (i, j), or 0 when the edge is absent.
  double weight_of(std::int64_t i, std::int32_t j) const;

  void save(const std::string& stem) const;  // bit-exact round trip
  static SparseGraph load(const std::string& stem);
};

SparseGraph build_similarity(const FeatureMatrix& features, const MetricSpec& metric,
                             std::int64_t k,
                             SymmetrizeMode mode = SymmetrizeMode::knn_union,
                             KnnBackend backend = KnnBackend::brute, int threads = 0);

/// Edge pattern of a graph with all weights implicitly 1.
struct AdjacencyIndicator {
  std::int64_t nodes = 0;
  std::vector<std::int64_t> row_offsets;
  std::vector<std::int32_t> cols;

  std::int64_t nnz() const { return static_cast<std::int64_t>(cols.size()); }
};

AdjacencyIndicator to_indicator(const SparseGraph& graph);

/// |B| x |B| block of the graph over `nodes`, as local-index triplets.
/// Every stored entry with both endpoints in the batch appears once.
struct BatchBlock {
  struct Entry {
    std::int32_t p, q;  // local indices into `nodes`
    double weight;
  };
  std::int64_t size = 0;
  std::vector<Entry> entries;

  std::vector<double> to_dense() const;
};

/// Throws on out-of-range or duplicate node indices.
BatchBlock batch_submatrix(const SparseGraph& graph, std::span<const std::int32_t> nodes);

}  // namespace gwcl
