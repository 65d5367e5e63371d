#include "gwcl/features.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include "gwcl/parallel.hpp"

namespace gwcl {

namespace {

ColumnStats column_stats(const std::vector<double>& data, std::int64_t rows,
                         std::int64_t cols, std::int64_t col) {
  ColumnStats s;
  s.min = std::numeric_limits<double>::infinity();
  s.max = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (std::int64_t i = 0; i < rows; ++i) {
    const double v = data[i * cols + col];
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
    sum += v;
  }
  s.mean = sum / static_cast<double>(rows);
  double ss = 0.0;
  for (std::int64_t i = 0; i < rows; ++i) {
    const double d = data[i * cols + col] - s.mean;
    ss += d * d;
  }
  s.stddev = std::sqrt(ss / static_cast<double>(rows));
  return s;
}

}  // namespace

PcaModel fit_reduce(const HsiCube& cube, const PixelMap& map, std::int64_t beta) {
  const std::int64_t alpha = cube.bands;
  const std::int64_t p = map.valid_count();
  if (beta < 1 || beta > alpha) {
    throw std::invalid_argument("need 1 <= beta <= alpha");
  }
  if (p < beta) {
    throw std::invalid_argument("need at least beta valid pixels to fit the reducer");
  }

  // Per-band mean/stddev over valid pixels.
  PcaModel model;
  model.bands = alpha;
  model.components = beta;
  model.mean.resize(static_cast<std::size_t>(alpha));
  model.scale.resize(static_cast<std::size_t>(alpha));
  Eigen::MatrixXd x(p, alpha);  // standardized valid pixels
  for (std::int64_t b = 0; b < alpha; ++b) {
    double sum = 0.0;
    for (std::int64_t i = 0; i < p; ++i) {
      sum += cube.at(b, map.row_of(i), map.col_of(i));
    }
    const double mean = sum / static_cast<double>(p);
    double ss = 0.0;
    for (std::int64_t i = 0; i < p; ++i) {
      const double d = cube.at(b, map.row_of(i), map.col_of(i)) - mean;
      ss += d * d;
    }
    const double stddev = std::sqrt(ss / static_cast<double>(p));
    const double scale = stddev > 0.0 ? 1.0 / stddev : 0.0;  // constant band drops out
    model.mean[static_cast<std::size_t>(b)] = mean;
    model.scale[static_cast<std::size_t>(b)] = scale;
    for (std::int64_t i = 0; i < p; ++i) {
      x(i, b) = (cube.at(b, map.row_of(i), map.col_of(i)) - mean) * scale;
    }
  }

  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(p);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");

  // Eigen returns ascending eigenvalues; take the trailing beta, reversed.
  const Eigen::VectorXd evals = eig.eigenvalues();
  const Eigen::MatrixXd evecs = eig.eigenvectors();
  const double total = std::max(evals.sum(), 0.0);
  const double rank_tol = std::max(evals(alpha - 1), 0.0) * 1e-10 * static_cast<double>(alpha);
  std::int64_t rank = 0;
  for (std::int64_t i = 0; i < alpha; ++i) {
    if (evals(i) > rank_tol) ++rank;
  }
  if (beta > rank) {
    throw std::runtime_error("covariance rank " + std::to_string(rank) +
                             " is smaller than requested beta " + std::to_string(beta));
  }

  model.projection.resize(static_cast<std::size_t>(alpha * beta));
  model.explained.resize(static_cast<std::size_t>(beta));
  for (std::int64_t k = 0; k < beta; ++k) {
    const std::int64_t src = alpha - 1 - k;
    // Sign convention: largest-magnitude coefficient positive.
    std::int64_t arg = 0;
    for (std::int64_t b = 1; b < alpha; ++b) {
      if (std::abs(evecs(b, src)) > std::abs(evecs(arg, src))) arg = b;
    }
    const double sign = evecs(arg, src) < 0.0 ? -1.0 : 1.0;
    for (std::int64_t b = 0; b < alpha; ++b) {
      model.projection[static_cast<std::size_t>(b * beta + k)] = sign * evecs(b, src);
    }
    model.explained[static_cast<std::size_t>(k)] =
        total > 0.0 ? std::max(evals(src), 0.0) / total : 0.0;
  }
  return model;
}

std::vector<double> project(const HsiCube& cube, const PixelMap& map, const PcaModel& model,
                            int threads) {
  if (model.bands != cube.bands) {
    throw std::invalid_argument("model fitted on " + std::to_string(model.bands) +
                                " bands, cube has " + std::to_string(cube.bands));
  }
  const std::int64_t p = map.valid_count();
  const std::int64_t beta = model.components;
  std::vector<double> scores(static_cast<std::size_t>(p * beta), 0.0);
  parallel_chunks(p, threads, [&](std::int64_t begin, std::int64_t end) {
    std::vector<double> z(static_cast<std::size_t>(model.bands));
    for (std::int64_t i = begin; i < end; ++i) {
      for (std::int64_t b = 0; b < model.bands; ++b) {
        z[static_cast<std::size_t>(b)] =
            (cube.at(b, map.row_of(i), map.col_of(i)) - model.mean[static_cast<std::size_t>(b)]) *
            model.scale[static_cast<std::size_t>(b)];
      }
      for (std::int64_t k = 0; k < beta; ++k) {
        double acc = 0.0;
        for (std::int64_t b = 0; b < model.bands; ++b) {
          acc += z[static_cast<std::size_t>(b)] *
                 model.projection[static_cast<std::size_t>(b * beta + k)];
        }
        scores[static_cast<std::size_t>(i * beta + k)] = acc;
      }
    }
  });
  return scores;
}

FeatureMatrix assemble_features(const HsiCube& cube, const PixelMap& map,
                                const PcaModel& model, bool normalize_spectral, int threads) {
  const std::int64_t p = map.valid_count();
  const std::int64_t beta = model.components;
  const std::int64_t d = beta + 2;
  std::vector<double> scores = project(cube, map, model, threads);

  FeatureMatrix fm;
  fm.rows = p;
  fm.cols = d;
  fm.data.resize(static_cast<std::size_t>(p * d));

  if (normalize_spectral) {
    for (std::int64_t k = 0; k < beta; ++k) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (std::int64_t i = 0; i < p; ++i) {
        const double v = scores[static_cast<std::size_t>(i * beta + k)];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      const double span = hi - lo;
      for (std::int64_t i = 0; i < p; ++i) {
        double& v = scores[static_cast<std::size_t>(i * beta + k)];
        v = span > 0.0 ? (v - lo) / span : 0.5;
      }
    }
  }

  // Coordinate extents over the valid set.
  std::int64_t m_lo = map.grid_height(), m_hi = -1, n_lo = map.grid_width(), n_hi = -1;
  for (std::int64_t i = 0; i < p; ++i) {
    m_lo = std::min<std::int64_t>(m_lo, map.row_of(i));
    m_hi = std::max<std::int64_t>(m_hi, map.row_of(i));
    n_lo = std::min<std::int64_t>(n_lo, map.col_of(i));
    n_hi = std::max<std::int64_t>(n_hi, map.col_of(i));
  }
  const bool m_flat = m_hi <= m_lo;
  const bool n_flat = n_hi <= n_lo;
  if (m_flat || n_flat) {
    std::cerr << "gwcl: warning: degenerate coordinate axis, normalizing to 0.5\n";
  }
  const double m_span = m_flat ? 1.0 : static_cast<double>(m_hi - m_lo);
  const double n_span = n_flat ? 1.0 : static_cast<double>(n_hi - n_lo);

  for (std::int64_t i = 0; i < p; ++i) {
    double* out = fm.row(i);
    for (std::int64_t k = 0; k < beta; ++k) out[k] = scores[static_cast<std::size_t>(i * beta + k)];
    out[beta] = m_flat ? 0.5 : static_cast<double>(map.row_of(i) - m_lo) / m_span;
    out[beta + 1] = n_flat ? 0.5 : static_cast<double>(map.col_of(i) - n_lo) / n_span;
  }

  fm.stats.resize(static_cast<std::size_t>(d));
  for (std::int64_t j = 0; j < d; ++j) {
    fm.stats[static_cast<std::size_t>(j)] = column_stats(fm.data, p, d, j);
  }
  for (const double v : fm.data) {
    if (!std::isfinite(v)) throw std::runtime_error("feature matrix contains non-finite values");
  }
  return fm;
}

void FeatureMatrix::save(const std::string& stem) const {
  ArrayBundle b;
  b.add(NamedArray::from_f64("data", data, {rows, cols}));
  std::vector<double> st;
  st.reserve(stats.size() * 4);
  for (const auto& s : stats) {
    st.push_back(s.min);
    st.push_back(s.max);
    st.push_back(s.mean);
    st.push_back(s.stddev);
  }
  b.add(NamedArray::from_f64("stats", st, {static_cast<std::int64_t>(stats.size()), 4}));
  b.set_meta("kind", "features");
  b.save(stem);
}

FeatureMatrix FeatureMatrix::load(const std::string& stem) {
  const ArrayBundle b = ArrayBundle::load(stem);
  const NamedArray& data = b.get("data");
  FeatureMatrix fm;
  fm.rows = data.shape.at(0);
  fm.cols = data.shape.at(1);
  fm.data = data.as_f64();
  const std::vector<double> st = b.get("stats").as_f64();
  fm.stats.resize(st.size() / 4);
  for (std::size_t i = 0; i < fm.stats.size(); ++i) {
    fm.stats[i] = {st[4 * i], st[4 * i + 1], st[4 * i + 2], st[4 * i + 3]};
  }
  return fm;
}

void PcaModel::save(const std::string& stem) const {
  ArrayBundle b;
  b.add(NamedArray::from_f64("mean", mean, {bands}));
  b.add(NamedArray::from_f64("scale", scale, {bands}));
  b.add(NamedArray::from_f64("projection", projection, {bands, components}));
  b.add(NamedArray::from_f64("explained", explained, {components}));
  b.set_meta("kind", "pca-model");
  b.save(stem);
}

PcaModel PcaModel::load(const std::string& stem) {
  const ArrayBundle b = ArrayBundle::load(stem);
  PcaModel m;
  m.mean = b.get("mean").as_f64();
  m.scale = b.get("scale").as_f64();
  m.projection = b.get("projection").as_f64();
  m.explained = b.get("explained").as_f64();
  m.bands = b.get("projection").shape.at(0);
  m.components = b.get("projection").shape.at(1);
  return m;
}

}  // namespace gwcl
