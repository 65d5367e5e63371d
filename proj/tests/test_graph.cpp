#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "gwcl/graph.hpp"
#include "test_support.hpp"

using namespace gwcl;

namespace {

FeatureMatrix random_features(std::int64_t rows, std::int64_t beta, std::uint64_t seed,
                              bool with_duplicates = false) {
  FeatureMatrix fm;
  fm.rows = rows;
  fm.cols = beta + 2;
  fm.data.resize(static_cast<std::size_t>(rows * fm.cols));
  Rng rng(seed);
  for (auto& v : fm.data) v = rng.next_double();
  if (with_duplicates) {
    // Clone a few rows verbatim to force exact distance ties.
    for (std::int64_t i = 1; i < rows; i += 7) {
      for (std::int64_t j = 0; j < fm.cols; ++j) {
        fm.data[static_cast<std::size_t>(i * fm.cols + j)] =
            fm.data[static_cast<std::size_t>((i - 1) * fm.cols + j)];
      }
    }
  }
  return fm;
}

std::span<const double> row_span(const FeatureMatrix& fm, std::int64_t i) {
  return {fm.row(i), static_cast<std::size_t>(fm.cols)};
}

/// O(P^2) reference K-NN: full sort by (distance, index) per query.
std::vector<std::vector<std::int32_t>> brute_oracle(const FeatureMatrix& fm,
                                                    const MetricSpec& metric, std::int64_t k) {
  std::vector<std::vector<std::int32_t>> out(static_cast<std::size_t>(fm.rows));
  for (std::int64_t q = 0; q < fm.rows; ++q) {
    std::vector<std::pair<double, std::int32_t>> all;
    for (std::int64_t j = 0; j < fm.rows; ++j) {
      if (j == q) continue;
      all.emplace_back(mahalanobis_sq(row_span(fm, q), row_span(fm, j), metric),
                       static_cast<std::int32_t>(j));
    }
    std::sort(all.begin(), all.end());
    for (std::int64_t m = 0; m < k; ++m) out[static_cast<std::size_t>(q)].push_back(all[m].second);
  }
  return out;
}

}  // namespace

TEST_CASE("mahalanobis quadratic form: worked examples") {
  const MetricSpec unit(1, 1.0, 1.0);
  const std::vector<double> zero{0.0, 0.0, 0.0};
  CHECK(mahalanobis_sq(zero, zero, unit) == 0.0);
  CHECK(mahalanobis_sq(zero, std::vector<double>{1.0, 0.0, 0.0}, unit) == 1.0);

  // Indian Pines sigmas: 0.2^2/0.04 + 0.1^2/0.001 = 1 + 10 = 11.
  const MetricSpec ip(1, 0.04, 0.001);
  const double d2 = mahalanobis_sq(zero, std::vector<double>{0.0, 0.2, 0.1}, ip);
  CHECK(d2 == doctest::Approx(11.0).epsilon(1e-12));
  CHECK(std::exp(-0.5 * d2) == doctest::Approx(0.004086771438464067).epsilon(1e-9));
}

TEST_CASE("metric spec validation") {
  CHECK_THROWS(MetricSpec(2, 0.0, 1.0));
  CHECK_THROWS(MetricSpec(2, 1.0, -2.0));
  CHECK_THROWS(mahalanobis_sq(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0, 2.0},
                              MetricSpec(1, 1.0, 1.0)));
}

TEST_CASE("3 collinear points, K=1: neighbors by inspection") {
  FeatureMatrix fm;
  fm.rows = 3;
  fm.cols = 3;
  fm.data = {0, 0.5, 0.5, 1, 0.5, 0.5, 10, 0.5, 0.5};
  const MetricSpec metric(1, 1.0, 1.0);
  const NeighborLists nn = knn_neighbors(fm, metric, 1);
  CHECK(nn.ids[0] == 1);
  CHECK(nn.ids[1] == 0);
  CHECK(nn.ids[2] == 1);
}

TEST_CASE("exact K-NN equals the O(P^2) oracle on 500 random 22-D points, K=10") {
  const FeatureMatrix fm = random_features(500, 20, 61);
  const MetricSpec metric(20, 0.04, 0.001);
  const auto oracle = brute_oracle(fm, metric, 10);
  for (KnnBackend backend : {KnnBackend::brute, KnnBackend::kdtree}) {
    const NeighborLists nn = knn_neighbors(fm, metric, 10, backend, 2);
    for (std::int64_t q = 0; q < fm.rows; ++q) {
      std::vector<std::int32_t> got(nn.row(q).begin(), nn.row(q).end());
      CHECK(got == oracle[static_cast<std::size_t>(q)]);
    }
  }
}

TEST_CASE("kd-tree matches brute on duplicate-heavy data (exact ties)") {
  const FeatureMatrix fm = random_features(300, 6, 71, true);
  const MetricSpec metric(6, 0.5, 0.5);
  const NeighborLists brute = knn_neighbors(fm, metric, 5, KnnBackend::brute);
  const NeighborLists kd = knn_neighbors(fm, metric, 5, KnnBackend::kdtree);
  CHECK(brute.ids == kd.ids);
  CHECK(brute.dist_sq == kd.dist_sq);
}

TEST_CASE("K bounds are enforced") {
  const FeatureMatrix fm = random_features(10, 2, 5);
  const MetricSpec metric(2, 1.0, 1.0);
  CHECK_THROWS(knn_neighbors(fm, metric, 0));
  CHECK_THROWS(knn_neighbors(fm, metric, 10));
  CHECK_NOTHROW(knn_neighbors(fm, metric, 9));
}

TEST_CASE("CSR graph equals dense brute-force construction entrywise (P <= 2000)") {
  const FeatureMatrix fm = random_features(400, 10, 83);
  const MetricSpec metric(10, 0.2, 0.05);
  const std::int64_t k = 8;
  const SparseGraph g = build_similarity(fm, metric, k);

  // Dense oracle: directed K-NN from the sort-based oracle, union-symmetrized.
  const auto oracle = brute_oracle(fm, metric, k);
  std::vector<double> dense(static_cast<std::size_t>(fm.rows * fm.rows), 0.0);
  for (std::int64_t q = 0; q < fm.rows; ++q) {
    for (std::int32_t j : oracle[static_cast<std::size_t>(q)]) {
      const double w =
          std::exp(-0.5 * mahalanobis_sq(row_span(fm, q), row_span(fm, j), metric));
      dense[static_cast<std::size_t>(q * fm.rows + j)] = w;
      dense[static_cast<std::size_t>(static_cast<std::int64_t>(j) * fm.rows + q)] = w;
    }
  }
  std::int64_t nnz_dense = 0;
  for (double v : dense) nnz_dense += v > 0.0 ? 1 : 0;
  CHECK(g.nnz() == nnz_dense);
  for (std::int64_t i = 0; i < fm.rows; ++i) {
    const auto cols = g.row_cols(i);
    const auto w = g.row_weights(i);
    for (std::size_t e = 0; e < cols.size(); ++e) {
      const double expect = dense[static_cast<std::size_t>(i * fm.rows + cols[e])];
      CHECK(std::abs(w[e] - expect) <= 1e-12);
    }
  }
}

TEST_CASE("graph invariants: weights, symmetry, degrees, sorted columns, no self-loops") {
  const FeatureMatrix fm = random_features(250, 8, 97);
  const MetricSpec metric(8, 0.1, 0.1);
  const std::int64_t k = 7;
  const SparseGraph g = build_similarity(fm, metric, k);
  CHECK(g.symmetric);

  for (std::int64_t i = 0; i < g.nodes; ++i) {
    const auto cols = g.row_cols(i);
    const auto w = g.row_weights(i);
    CHECK(g.degree(i) >= k);
    CHECK(g.degree(i) <= 2 * k);
    for (std::size_t e = 0; e < cols.size(); ++e) {
      CHECK(cols[e] != i);
      CHECK(w[e] > 0.0);
      CHECK(w[e] <= 1.0);
      if (e > 0) CHECK(cols[e] > cols[e - 1]);
      // Symmetry: mirrored entry exists with the identical weight.
      CHECK(g.weight_of(cols[e], static_cast<std::int32_t>(i)) == w[e]);
    }
  }

  // Pre-symmetrization out-degree is exactly K for every node.
  const NeighborLists nn = knn_neighbors(fm, metric, k);
  for (std::int64_t q = 0; q < nn.nodes; ++q) {
    std::set<std::int32_t> unique(nn.row(q).begin(), nn.row(q).end());
    CHECK(static_cast<std::int64_t>(unique.size()) == k);
    CHECK(unique.count(static_cast<std::int32_t>(q)) == 0);
  }
}

TEST_CASE("mutual mode keeps only bidirectional neighbor pairs") {
  const FeatureMatrix fm = random_features(120, 5, 103);
  const MetricSpec metric(5, 0.3, 0.3);
  const std::int64_t k = 4;
  const SparseGraph uni = build_similarity(fm, metric, k, SymmetrizeMode::knn_union);
  const SparseGraph mut = build_similarity(fm, metric, k, SymmetrizeMode::mutual);
  CHECK(mut.nnz() <= uni.nnz());
  CHECK(mut.nnz() > 0);

  const NeighborLists nn = knn_neighbors(fm, metric, k);
  auto is_neighbor = [&](std::int64_t q, std::int32_t j) {
    const auto row = nn.row(q);
    return std::find(row.begin(), row.end(), j) != row.end();
  };
  for (std::int64_t i = 0; i < mut.nodes; ++i) {
    for (std::int32_t j : mut.row_cols(i)) {
      CHECK(is_neighbor(i, j));
      CHECK(is_neighbor(j, static_cast<std::int32_t>(i)));
    }
  }
  // Union contains every directed relation.
  for (std::int64_t q = 0; q < nn.nodes; ++q) {
    for (std::int32_t j : nn.row(q)) CHECK(uni.weight_of(q, j) > 0.0);
  }
}

TEST_CASE("coincident pair among neighbors carries weight exactly 1") {
  FeatureMatrix fm = random_features(30, 3, 107);
  for (std::int64_t j = 0; j < fm.cols; ++j) {
    fm.data[static_cast<std::size_t>(1 * fm.cols + j)] = fm.data[static_cast<std::size_t>(j)];
  }
  const MetricSpec metric(3, 1.0, 1.0);
  const SparseGraph g = build_similarity(fm, metric, 3);
  CHECK(g.weight_of(0, 1) == 1.0);
}

TEST_CASE("sigma_m monotonicity: larger sigma_m increases s_ij when m-coordinates differ") {
  FeatureMatrix fm;
  fm.rows = 2;
  fm.cols = 3;
  fm.data = {0.2, 0.1, 0.5, 0.2, 0.7, 0.5};  // differ only in the m column
  double prev = 0.0;
  for (double sigma : {0.01, 0.04, 0.2, 1.0, 5.0}) {
    const MetricSpec metric(1, sigma, 1.0);
    const double s =
        std::exp(-0.5 * mahalanobis_sq(row_span(fm, 0), row_span(fm, 1), metric));
    CHECK(s > prev);
    prev = s;
  }
}

TEST_CASE("to_indicator preserves the pattern with unit weights") {
  const FeatureMatrix fm = random_features(80, 4, 109);
  const MetricSpec metric(4, 0.2, 0.2);
  const SparseGraph g = build_similarity(fm, metric, 5);
  const AdjacencyIndicator a = to_indicator(g);
  CHECK(a.nnz() == g.nnz());
  CHECK(a.cols == g.cols);
  CHECK(a.row_offsets == g.row_offsets);

  SparseGraph empty;
  empty.nodes = 0;
  empty.row_offsets = {0};
  CHECK(to_indicator(empty).nnz() == 0);
}

TEST_CASE("batch submatrix equals dense slicing oracle") {
  const FeatureMatrix fm = random_features(500, 10, 113);
  const MetricSpec metric(10, 0.04, 0.04);
  const SparseGraph g = build_similarity(fm, metric, 10);

  Rng rng(5);
  std::vector<std::int32_t> nodes;
  std::set<std::int32_t> used;
  while (nodes.size() < 64) {
    const auto v = static_cast<std::int32_t>(rng.below(500));
    if (used.insert(v).second) nodes.push_back(v);
  }
  const BatchBlock block = batch_submatrix(g, nodes);
  const std::vector<double> dense = block.to_dense();
  for (std::size_t p = 0; p < nodes.size(); ++p) {
    for (std::size_t q = 0; q < nodes.size(); ++q) {
      CHECK(dense[p * nodes.size() + q] == g.weight_of(nodes[p], nodes[q]));
    }
  }
}

TEST_CASE("batch submatrix edge cases") {
  const FeatureMatrix fm = random_features(40, 3, 127);
  const MetricSpec metric(3, 0.5, 0.5);
  const SparseGraph g = build_similarity(fm, metric, 4);

  // Singleton batch: 1x1 zero block (no self-loops).
  const std::vector<std::int32_t> single{7};
  CHECK(batch_submatrix(g, single).entries.empty());

  // Two connected nodes: off-diagonals equal the stored weight.
  const std::int32_t a = 0;
  const std::int32_t b = g.row_cols(0)[0];
  const std::vector<std::int32_t> pair{a, b};
  const BatchBlock block = batch_submatrix(g, pair);
  REQUIRE(block.entries.size() == 2);
  const std::vector<double> dense = block.to_dense();
  CHECK(dense[1] == g.weight_of(a, b));
  CHECK(dense[2] == g.weight_of(a, b));

  CHECK_THROWS(batch_submatrix(g, std::vector<std::int32_t>{1, 1}));
  CHECK_THROWS(batch_submatrix(g, std::vector<std::int32_t>{-1}));
  CHECK_THROWS(batch_submatrix(g, std::vector<std::int32_t>{40}));
}

TEST_CASE("graph persists bit-exactly") {
  gwcl::testing::TempDir dir("graph");
  const FeatureMatrix fm = random_features(100, 6, 131);
  const MetricSpec metric(6, 0.1, 0.02);
  const SparseGraph g = build_similarity(fm, metric, 6);
  g.save(dir.str("graph"));
  const SparseGraph back = SparseGraph::load(dir.str("graph"));
  CHECK(back.nodes == g.nodes);
  CHECK(back.row_offsets == g.row_offsets);
  CHECK(back.cols == g.cols);
  CHECK(back.weights == g.weights);
  CHECK(back.symmetric == g.symmetric);
}

TEST_CASE("threaded construction matches single-threaded") {
  const FeatureMatrix fm = random_features(350, 8, 151);
  const MetricSpec metric(8, 0.04, 0.001);
  const SparseGraph a = build_similarity(fm, metric, 10, SymmetrizeMode::knn_union,
                                         KnnBackend::brute, 1);
  const SparseGraph b = build_similarity(fm, metric, 10, SymmetrizeMode::knn_union,
                                         KnnBackend::brute, 4);
  CHECK(a.cols == b.cols);
  CHECK(a.weights == b.weights);
}
