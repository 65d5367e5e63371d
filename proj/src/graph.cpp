#include "gwcl/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

#include "gwcl/parallel.hpp"

namespace gwcl {

namespace {

/// Candidate ordering: smaller distance wins, then smaller index.
struct Candidate {
  double dist;
  std::int32_t id;
};

inline bool better(const Candidate& a, const Candidate& b) {
  return a.dist < b.dist || (a.dist == b.dist && a.id < b.id);
}

/// Fixed-capacity worst-on-top heap of the best K candidates seen so far.
class TopK {
 public:
  explicit TopK(std::int64_t k) : k_(k) { heap_.reserve(static_cast<std::size_t>(k)); }

  bool full() const { return static_cast<std::int64_t>(heap_.size()) == k_; }
  /// Upper bound for early rejection: +inf until the heap is full.
  double worst_dist() const {
    return full() ? heap_.front().dist : std::numeric_limits<double>::infinity();
  }
  const Candidate& worst() const { return heap_.front(); }

  void offer(const Candidate& c) {
    if (!full()) {
      heap_.push_back(c);
      std::push_heap(heap_.begin(), heap_.end(), better);
    } else if (better(c, heap_.front())) {
      std::pop_heap(heap_.begin(), heap_.end(), better);
      heap_.back() = c;
      std::push_heap(heap_.begin(), heap_.end(), better);
    }
  }

  /// Drains into (distance, index)-ascending order.
  std::vector<Candidate> sorted() {
    std::sort(heap_.begin(), heap_.end(), better);
    return std::move(heap_);
  }

 private:
  std::int64_t k_;
  std::vector<Candidate> heap_;
};

/// Squared Euclidean distance in the Sigma^-1/2-scaled space, bailing out
/// once the partial sum exceeds `bound` (partial sums only grow).
inline double scaled_dist_sq(const double* a, const double* b, std::int64_t d, double bound) {
  double acc = 0.0;
  for (std::int64_t i = 0; i < d; ++i) {
    const double diff = a[i] - b[i];
    acc += diff * diff;
    if (acc > bound) return acc;
  }
  return acc;
}

std::vector<double> scale_features(const FeatureMatrix& features, const MetricSpec& metric) {
  const auto& inv_sqrt = metric.inverse_sqrt_diag();
  const std::int64_t d = metric.dims();
  std::vector<double> scaled(features.data.size());
  for (std::int64_t i = 0; i < features.rows; ++i) {
    const double* src = features.row(i);
    double* dst = scaled.data() + i * d;
    for (std::int64_t j = 0; j < d; ++j) dst[j] = src[j] * inv_sqrt[static_cast<std::size_t>(j)];
  }
  return scaled;
}

void brute_search(const std::vector<double>& scaled, std::int64_t p, std::int64_t d,
                  std::int64_t k, int threads, NeighborLists& out) {
  parallel_chunks(p, threads, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t q = begin; q < end; ++q) {
      const double* query = scaled.data() + q * d;
      TopK top(k);
      for (std::int64_t j = 0; j < p; ++j) {
        if (j == q) continue;
        // Early-exit distances exceed the current worst, so offer() drops them.
        const double dist = scaled_dist_sq(query, scaled.data() + j * d, d, top.worst_dist());
        top.offer({dist, static_cast<std::int32_t>(j)});
      }
      auto best = top.sorted();
      for (std::int64_t m = 0; m < k; ++m) {
        out.ids[q * k + m] = best[static_cast<std::size_t>(m)].id;
        out.dist_sq[q * k + m] = best[static_cast<std::size_t>(m)].dist;
      }
    }
  });
}

/// Exact kd-tree over the scaled points. Distances are evaluated with the
/// same kernel as the brute backend, so results match it exactly.
class KdTree {
 public:
  KdTree(const std::vector<double>& scaled, std::int64_t p, std::int64_t d)
      : points_(scaled), p_(p), d_(d) {
    order_.resize(static_cast<std::size_t>(p));
    for (std::int64_t i = 0; i < p; ++i) order_[static_cast<std::size_t>(i)] = i;
    nodes_.reserve(static_cast<std::size_t>(2 * p / kLeafSize + 2));
    root_ = build(0, p);
  }

  void query(std::int64_t q, TopK& top) const { search(root_, q, top); }

 private:
  static constexpr std::int64_t kLeafSize = 16;
  // Explore the far half-space unless its plane distance provably exceeds
  // the current worst; the (1 - 1e-12) factor keeps rounding of the full
  // distance sum from ever causing a false prune.
  static constexpr double kPruneSlack = 1.0 - 1e-12;

  struct Node {
    std::int64_t begin = 0, end = 0;        // leaf range in order_
    std::int32_t left = -1, right = -1;     // children, -1 for leaf
    std::int32_t split_dim = 0;
    double split_value = 0.0;
  };

  double coord(std::int64_t idx, std::int64_t dim) const { return points_[idx * d_ + dim]; }

  std::int32_t build(std::int64_t begin, std::int64_t end) {
    Node node;
    node.begin = begin;
    node.end = end;
    const std::int32_t id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(node);
    if (end - begin <= kLeafSize) return id;

    // Split on the widest dimension at the median.
    std::int64_t dim = 0;
    double widest = -1.0;
    for (std::int64_t j = 0; j < d_; ++j) {
      double lo = coord(order_[static_cast<std::size_t>(begin)], j);
      double hi = lo;
      for (std::int64_t i = begin + 1; i < end; ++i) {
        const double v = coord(order_[static_cast<std::size_t>(i)], j);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (hi - lo > widest) {
        widest = hi - lo;
        dim = j;
      }
    }
    if (widest <= 0.0) return id;  // all points coincide

    const std::int64_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::int64_t a, std::int64_t b) { return coord(a, dim) < coord(b, dim); });
    nodes_[static_cast<std::size_t>(id)].split_dim = static_cast<std::int32_t>(dim);
    nodes_[static_cast<std::size_t>(id)].split_value =
        coord(order_[static_cast<std::size_t>(mid)], dim);
    const std::int32_t left = build(begin, mid);
    const std::int32_t right = build(mid, end);
    nodes_[static_cast<std::size_t>(id)].left = left;
    nodes_[static_cast<std::size_t>(id)].right = right;
    return id;
  }

  void search(std::int32_t node_id, std::int64_t q, TopK& top) const {
    const Node& node = nodes_[static_cast<std::size_t>(node_id)];
    const double* query = points_.data() + q * d_;
    if (node.left < 0) {
      for (std::int64_t i = node.begin; i < node.end; ++i) {
        const std::int64_t j = order_[static_cast<std::size_t>(i)];
        if (j == q) continue;
        const double dist = scaled_dist_sq(query, points_.data() + j * d_, d_, top.worst_dist());
        top.offer({dist, static_cast<std::int32_t>(j)});
      }
      return;
    }
    const double diff = query[node.split_dim] - node.split_value;
    const std::int32_t near = diff < 0.0 ? node.left : node.right;
    const std::int32_t far = diff < 0.0 ? node.right : node.left;
    search(near, q, top);
    if (diff * diff * kPruneSlack <= top.worst_dist()) search(far, q, top);
  }

  const std::vector<double>& points_;
  std::int64_t p_, d_;
  std::vector<std::int64_t> order_;
  std::vector<Node> nodes_;
  std::int32_t root_ = 0;
};

}  // namespace

MetricSpec::MetricSpec(std::int64_t beta, double sigma_m, double sigma_n)
    : beta_(beta), sigma_m_(sigma_m), sigma_n_(sigma_n) {
  if (beta < 0) throw std::invalid_argument("beta must be >= 0");
  if (!(sigma_m > 0.0) || !(sigma_n > 0.0)) {
    throw std::invalid_argument("sigma_m and sigma_n must be positive");
  }
  inv_diag_.assign(static_cast<std::size_t>(beta + 2), 1.0);
  inv_diag_[static_cast<std::size_t>(beta)] = 1.0 / sigma_m;
  inv_diag_[static_cast<std::size_t>(beta + 1)] = 1.0 / sigma_n;
  inv_sqrt_.resize(inv_diag_.size());
  for (std::size_t i = 0; i < inv_diag_.size(); ++i) inv_sqrt_[i] = std::sqrt(inv_diag_[i]);
}

double mahalanobis_sq(std::span<const double> x_i, std::span<const double> x_j,
                      const MetricSpec& metric) {
  if (x_i.size() != x_j.size() ||
      static_cast<std::int64_t>(x_i.size()) != metric.dims()) {
    throw std::invalid_argument("feature rows must have beta + 2 entries");
  }
  const auto& inv = metric.inverse_diag();
  double acc = 0.0;
  for (std::size_t k = 0; k < x_i.size(); ++k) {
    const double diff = x_i[k] - x_j[k];
    acc += diff * diff * inv[k];
  }
  return acc;
}

KnnBackend knn_backend_from_name(const std::string& name) {
  if (name == "brute") return KnnBackend::brute;
  if (name == "kdtree") return KnnBackend::kdtree;
  throw std::invalid_argument("unknown knn backend: " + name);
}

SymmetrizeMode symmetrize_mode_from_name(const std::string& name) {
  if (name == "union") return SymmetrizeMode::knn_union;
  if (name == "mutual") return SymmetrizeMode::mutual;
  throw std::invalid_argument("unknown symmetrize mode: " + name);
}

NeighborLists knn_neighbors(const FeatureMatrix& features, const MetricSpec& metric,
                            std::int64_t k, KnnBackend backend, int threads) {
  const std::int64_t p = features.rows;
  if (k < 1 || k >= p) {
    throw std::invalid_argument("need 1 <= K < P (K=" + std::to_string(k) +
                                ", P=" + std::to_string(p) + ")");
  }
  if (features.cols != metric.dims()) {
    throw std::invalid_argument("feature width does not match metric dimensions");
  }
  const std::vector<double> scaled = scale_features(features, metric);
  NeighborLists out;
  out.nodes = p;
  out.k = k;
  out.ids.resize(static_cast<std::size_t>(p * k));
  out.dist_sq.resize(static_cast<std::size_t>(p * k));

  if (backend == KnnBackend::brute) {
    brute_search(scaled, p, features.cols, k, threads, out);
    return out;
  }

  const KdTree tree(scaled, p, features.cols);
  parallel_chunks(p, threads, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t q = begin; q < end; ++q) {
      TopK top(k);
      tree.query(q, top);
      auto best = top.sorted();
      if (static_cast<std::int64_t>(best.size()) != k) {
        throw std::logic_error("kd-tree returned fewer than K neighbors");
      }
      for (std::int64_t m = 0; m < k; ++m) {
        out.ids[q * k + m] = best[static_cast<std::size_t>(m)].id;
        out.dist_sq[q * k + m] = best[static_cast<std::size_t>(m)].dist;
      }
    }
  });
  return out;
}

double SparseGraph::weight_of(std::int64_t i, std::int32_t j) const {
  const auto cols_span = row_cols(i);
  const auto it = std::lower_bound(cols_span.begin(), cols_span.end(), j);
  if (it == cols_span.end() || *it != j) return 0.0;
  return weights[static_cast<std::size_t>(row_offsets[i] + (it - cols_span.begin()))];
}

SparseGraph build_similarity(const FeatureMatrix& features, const MetricSpec& metric,
                             std::int64_t k, SymmetrizeMode mode, KnnBackend backend,
                             int threads) {
  const NeighborLists nn = knn_neighbors(features, metric, k, backend, threads);
  const std::int64_t p = nn.nodes;

  // Unordered pairs keyed (min << 32 | max); directed duplicates carry
  // identical distances, so deduplication is exact.
  std::vector<std::pair<std::uint64_t, double>> pairs;
  pairs.reserve(static_cast<std::size_t>(p * k));
  for (std::int64_t q = 0; q < p; ++q) {
    for (std::int64_t m = 0; m < k; ++m) {
      const std::int64_t j = nn.ids[q * k + m];
      const std::uint64_t lo = static_cast<std::uint64_t>(std::min(q, j));
      const std::uint64_t hi = static_cast<std::uint64_t>(std::max(q, j));
      pairs.emplace_back((lo << 32) | hi, nn.dist_sq[q * k + m]);
    }
  }
  std::sort(pairs.begin(), pairs.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<std::pair<std::uint64_t, double>> kept;
  kept.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size();) {
    std::size_t j = i;
    while (j < pairs.size() && pairs[j].first == pairs[i].first) ++j;
    const bool both_directions = (j - i) > 1;
    if (mode == SymmetrizeMode::knn_union || both_directions) kept.push_back(pairs[i]);
    i = j;
  }

  SparseGraph g;
  g.nodes = p;
  g.symmetric = true;
  std::vector<std::int64_t> degree(static_cast<std::size_t>(p), 0);
  for (const auto& [key, dist] : kept) {
    ++degree[static_cast<std::size_t>(key >> 32)];
    ++degree[static_cast<std::size_t>(key & 0xffffffffULL)];
  }
  g.row_offsets.assign(static_cast<std::size_t>(p) + 1, 0);
  for (std::int64_t i = 0; i < p; ++i) {
    g.row_offsets[static_cast<std::size_t>(i) + 1] =
        g.row_offsets[static_cast<std::size_t>(i)] + degree[static_cast<std::size_t>(i)];
  }
  g.cols.resize(static_cast<std::size_t>(g.row_offsets.back()));
  g.weights.resize(g.cols.size());

  // Weights underflowing exp() are clamped to the smallest normal double so
  // stored edges stay strictly positive.
  constexpr double kMinWeight = std::numeric_limits<double>::min();
  std::vector<std::int64_t> cursor(g.row_offsets.begin(), g.row_offsets.end() - 1);
  // `kept` is sorted by (min, max): per-row columns arrive ascending for the
  // min side; the max side needs a final per-row sort.
  for (const auto& [key, dist] : kept) {
    const auto a = static_cast<std::int64_t>(key >> 32);
    const auto b = static_cast<std::int64_t>(key & 0xffffffffULL);
    const double w = std::max(std::exp(-0.5 * dist), kMinWeight);
    g.cols[static_cast<std::size_t>(cursor[static_cast<std::size_t>(a)])] =
        static_cast<std::int32_t>(b);
    g.weights[static_cast<std::size_t>(cursor[static_cast<std::size_t>(a)]++)] = w;
    g.cols[static_cast<std::size_t>(cursor[static_cast<std::size_t>(b)])] =
        static_cast<std::int32_t>(a);
    g.weights[static_cast<std::size_t>(cursor[static_cast<std::size_t>(b)]++)] = w;
  }
  for (std::int64_t i = 0; i < p; ++i) {
    const std::int64_t begin = g.row_offsets[static_cast<std::size_t>(i)];
    const std::int64_t end = g.row_offsets[static_cast<std::size_t>(i) + 1];
    std::vector<std::pair<std::int32_t, double>> row;
    row.reserve(static_cast<std::size_t>(end - begin));
    bool sorted = true;
    for (std::int64_t e = begin; e < end; ++e) {
      if (e > begin && g.cols[static_cast<std::size_t>(e)] < g.cols[static_cast<std::size_t>(e - 1)]) {
        sorted = false;
      }
      row.emplace_back(g.cols[static_cast<std::size_t>(e)], g.weights[static_cast<std::size_t>(e)]);
    }
    if (sorted) continue;
    std::sort(row.begin(), row.end());
    for (std::int64_t e = begin; e < end; ++e) {
      g.cols[static_cast<std::size_t>(e)] = row[static_cast<std::size_t>(e - begin)].first;
      g.weights[static_cast<std::size_t>(e)] = row[static_cast<std::size_t>(e - begin)].second;
    }
  }
  return g;
}

AdjacencyIndicator to_indicator(const SparseGraph& graph) {
  AdjacencyIndicator a;
  a.nodes = graph.nodes;
  a.row_offsets = graph.row_offsets;
  a.cols = graph.cols;
  return a;
}

std::vector<double> BatchBlock::to_dense() const {
  std::vector<double> dense(static_cast<std::size_t>(size * size), 0.0);
  for (const auto& e : entries) {
    dense[static_cast<std::size_t>(e.p) * static_cast<std::size_t>(size) +
          static_cast<std::size_t>(e.q)] = e.weight;
  }
  return dense;
}

BatchBlock batch_submatrix(const SparseGraph& graph, std::span<const std::int32_t> nodes) {
  BatchBlock block;
  block.size = static_cast<std::int64_t>(nodes.size());
  std::unordered_map<std::int32_t, std::int32_t> local;
  local.reserve(nodes.size() * 2);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::int32_t g = nodes[i];
    if (g < 0 || g >= graph.nodes) {
      throw std::out_of_range("batch node " + std::to_string(g) + " out of range");
    }
    if (!local.emplace(g, static_cast<std::int32_t>(i)).second) {
      throw std::invalid_argument("duplicate node " + std::to_string(g) + " in batch");
    }
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::int64_t g = nodes[i];
    const auto cols_span = graph.row_cols(g);
    const auto weights_span = graph.row_weights(g);
    for (std::size_t e = 0; e < cols_span.size(); ++e) {
      const auto it = local.find(cols_span[e]);
      if (it == local.end()) continue;
      block.entries.push_back(
          {static_cast<std::int32_t>(i), it->second, weights_span[e]});
    }
  }
  return block;
}

void SparseGraph::save(const std::string& stem) const {
  ArrayBundle b;
  b.add(NamedArray::from_i64("row_offsets", row_offsets,
                             {static_cast<std::int64_t>(row_offsets.size())}));
  b.add(NamedArray::from_i32("cols", cols, {static_cast<std::int64_t>(cols.size())}));
  b.add(NamedArray::from_f64("weights", weights, {static_cast<std::int64_t>(weights.size())}));
  b.set_meta("kind", "similarity-graph");
  b.set_meta("nodes", std::to_string(nodes));
  b.set_meta("symmetric", symmetric ? "1" : "0");
  b.save(stem);
}

SparseGraph SparseGraph::load(const std::string& stem) {
  const ArrayBundle b = ArrayBundle::load(stem);
  SparseGraph g;
  g.row_offsets = b.get("row_offsets").as_i64();
  g.cols = b.get("cols").as_i32();
  g.weights = b.get("weights").as_f64();
  g.nodes = std::stoll(b.meta("nodes"));
  g.symmetric = b.meta("symmetric") == "1";
  if (g.row_offsets.size() != static_cast<std::size_t>(g.nodes) + 1 ||
      g.cols.size() != g.weights.size() ||
      (g.nodes >= 0 && g.row_offsets.back() != static_cast<std::int64_t>(g.cols.size()))) {
    throw std::runtime_error("inconsistent graph file: " + stem);
  }
  return g;
}

}  // namespace gwcl
