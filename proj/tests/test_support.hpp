#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "gwcl/hsi_data.hpp"
#include "gwcl/rng.hpp"

namespace gwcl::testing {

/// Unique scratch directory under the system temp root, removed on
/// destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("gwcl_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string str(const std::string& name = {}) const {
    return name.empty() ? path_.string() : (path_ / name).string();
  }

 private:
  std::filesystem::path path_;
};

/// Synthetic raster: `classes` Gaussian spectral blobs laid out in vertical
/// strips (class k occupies columns [k*W/c, (k+1)*W/c)). `separation` is the
/// distance between adjacent class means in units of the per-band noise.
struct SyntheticScene {
  HsiCube cube;
  LabelRaster labels;
};

inline SyntheticScene make_strip_scene(std::int64_t height, std::int64_t width,
                                       std::int64_t bands, int classes, double separation,
                                       std::uint64_t seed, double noise = 1.0) {
  SyntheticScene s;
  s.cube.height = height;
  s.cube.width = width;
  s.cube.bands = bands;
  s.cube.values.assign(static_cast<std::size_t>(height * width * bands), 0.0);
  std::vector<std::uint16_t> codes(static_cast<std::size_t>(height * width), 0);

  Rng rng(seed);
  // Class means: shifted along every band so spectra are separable.
  std::vector<std::vector<double>> means(static_cast<std::size_t>(classes));
  for (int k = 0; k < classes; ++k) {
    means[static_cast<std::size_t>(k)].resize(static_cast<std::size_t>(bands));
    for (std::int64_t b = 0; b < bands; ++b) {
      means[static_cast<std::size_t>(k)][static_cast<std::size_t>(b)] =
          separation * noise * k + rng.uniform(-0.1, 0.1);
    }
  }
  for (std::int64_t m = 0; m < height; ++m) {
    for (std::int64_t n = 0; n < width; ++n) {
      const int k = std::min<int>(classes - 1,
                                  static_cast<int>(n * classes / width));
      codes[static_cast<std::size_t>(m * width + n)] = static_cast<std::uint16_t>(k + 1);
      for (std::int64_t b = 0; b < bands; ++b) {
        s.cube.values[static_cast<std::size_t>((b * height + m) * width + n)] =
            means[static_cast<std::size_t>(k)][static_cast<std::size_t>(b)] +
            noise * rng.next_gaussian();
      }
    }
  }
  s.labels = make_label_raster(height, width, std::move(codes));
  return s;
}

/// Quadrant layout for the harder overlap fixture: class = 2*(m >= H/2) +
/// (n >= W/2) + 1, spectra drawn from partially overlapping Gaussians.
inline SyntheticScene make_quadrant_scene(std::int64_t height, std::int64_t width,
                                          std::int64_t bands, double separation,
                                          std::uint64_t seed, double noise = 1.0) {
  SyntheticScene s;
  s.cube.height = height;
  s.cube.width = width;
  s.cube.bands = bands;
  s.cube.values.assign(static_cast<std::size_t>(height * width * bands), 0.0);
  std::vector<std::uint16_t> codes(static_cast<std::size_t>(height * width), 0);

  Rng rng(seed);
  std::vector<std::vector<double>> means(4);
  for (int k = 0; k < 4; ++k) {
    means[static_cast<std::size_t>(k)].resize(static_cast<std::size_t>(bands));
    for (std::int64_t b = 0; b < bands; ++b) {
      // Distinct direction per class, modest separation.
      means[static_cast<std::size_t>(k)][static_cast<std::size_t>(b)] =
          separation * noise * ((b + k) % 4 == 0 ? 1.0 : (k % 2 == 0 ? 0.3 : -0.3)) * (k + 1) /
          4.0;
    }
  }
  for (std::int64_t m = 0; m < height; ++m) {
    for (std::int64_t n = 0; n < width; ++n) {
      const int k = 2 * (m >= height / 2 ? 1 : 0) + (n >= width / 2 ? 1 : 0);
      codes[static_cast<std::size_t>(m * width + n)] = static_cast<std::uint16_t>(k + 1);
      for (std::int64_t b = 0; b < bands; ++b) {
        s.cube.values[static_cast<std::size_t>((b * height + m) * width + n)] =
            means[static_cast<std::size_t>(k)][static_cast<std::size_t>(b)] +
            noise * rng.next_gaussian();
      }
    }
  }
  s.labels = make_label_raster(height, width, std::move(codes));
  return s;
}

/// Cyclic Jacobi eigensolver for symmetric matrices; test-only oracle kept
/// independent of the library's Eigen-based path. Returns eigenvalues in
/// descending order.
inline std::vector<double> jacobi_eigenvalues(std::vector<double> a, std::int64_t n,
                                              int sweeps = 64) {
  auto at = [&](std::int64_t i, std::int64_t j) -> double& { return a[i * n + j]; };
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    double off = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::int64_t j = i + 1; j < n; ++j) off += at(i, j) * at(i, j);
    }
    if (off < 1e-26) break;
    for (std::int64_t p = 0; p < n; ++p) {
      for (std::int64_t q = p + 1; q < n; ++q) {
        if (std::abs(at(p, q)) < 1e-300) continue;
        const double theta = (at(q, q) - at(p, p)) / (2.0 * at(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::int64_t k = 0; k < n; ++k) {
          const double akp = at(k, p), akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (std::int64_t k = 0; k < n; ++k) {
          const double apk = at(p, k), aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> evals(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) evals[static_cast<std::size_t>(i)] = at(i, i);
  std::sort(evals.begin(), evals.end(), std::greater<>());
  return evals;
}

}  // namespace gwcl::testing
