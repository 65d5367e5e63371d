#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gwcl/hsi_data.hpp"

namespace gwcl {

struct ColumnStats {
  double min = 0.0, max = 0.0, mean = 0.0, stddev = 0.0;
};

/// P x (beta + 2) row-major feature matrix: beta spectral components followed
/// by the min-max normalized row and column coordinates. Row order matches
/// the PixelMap flat ordering.
struct FeatureMatrix {
  std::int64_t rows = 0;
  std::int64_t cols = 0;  // beta + 2
  std::vector<double> data;
  std::vector<ColumnStats> stats;

  const double* row(std::int64_t i) const { return data.data() + i * cols; }
  double* row(std::int64_t i) { return data.data() + i * cols; }
  double at(std::int64_t i, std::int64_t j) const { return data[i * cols + j]; }

  void save(const std::string& stem) const;
  static FeatureMatrix load(const std::string& stem);
};

/// Spectral reducer: per-band standardization followed by projection onto the
/// leading principal components of the standardized data.
struct PcaModel {
  std::vector<double> mean;       // alpha
  std::vector<double> scale;      // alpha, multiplicative (1/stddev)
  std::vector<double> projection; // alpha x beta, row-major
  std::vector<double> explained;  // beta, fractions of total variance
  std::int64_t bands = 0;         // alpha
  std::int64_t components = 0;    // beta

  void save(const std::string& stem) const;
  static PcaModel load(const std::string& stem);
};

/// Fits the reducer on the valid pixels of `cube`. Requires
/// 1 <= beta <= alpha, at least beta valid pixels, and a standardized
/// covariance of rank >= beta.
PcaModel fit_reduce(const HsiCube& cube, const PixelMap& map, std::int64_t beta);

/// Projects valid pixels through `model` (threads parallelize over rows).
/// Output is P x beta row-major scores in decreasing-variance column order.
std::vector<double> project(const HsiCube& cube, const PixelMap& map, const PcaModel& model,
                            int threads = 0);

/// Assembles x = [h'; m; n]: projected spectra plus min-max normalized grid
/// coordinates. With `normalize_spectral` (the default) each spectral column
/// is also min-max normalized to [0, 1], putting all dimensions on the
/// coordinate scale. A constant coordinate axis maps to 0.5.
FeatureMatrix assemble_features(const HsiCube& cube, const PixelMap& map,
                                const PcaModel& model, bool normalize_spectral = true,
                                int threads = 0);

}  // namespace gwcl
