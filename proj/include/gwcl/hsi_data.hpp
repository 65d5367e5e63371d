#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gwcl/io.hpp"

namespace gwcl {

/// An M x N x alpha reflectance raster. Values are stored band-sequential
/// (all of band 0, then band 1, ...), row-major within a band, widened to
/// double on load. `nodata_mask`, when non-empty, flags M*N pixels to drop
/// from the valid set in addition to label code 0.
struct HsiCube {
  std::int64_t height = 0;  // M
  std::int64_t width = 0;   // N
  std::int64_t bands = 0;   // alpha
  std::vector<double> values;
  std::vector<std::uint8_t> nodata_mask;

  double at(std::int64_t band, std::int64_t row, std::int64_t col) const {
    return values[(band * height + row) * width + col];
  }
  std::int64_t pixel_count() const { return height * width; }

  /// Validates dimensions, buffer length and finiteness; throws on violation.
  void validate() const;
};

/// Per-pixel class codes aligned with an HsiCube: 0 = background, 1..c = classes.
struct LabelRaster {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::vector<std::uint16_t> codes;  // row-major, M*N entries
  int class_count = 0;               // c

  std::uint16_t at(std::int64_t row, std::int64_t col) const {
    return codes[row * width + col];
  }

  /// Population of each class code 1..c.
  std::vector<std::int64_t> class_populations() const;
};

/// Bijection between flat indices over the valid (non-background) pixel set
/// and grid coordinates. Flat order is row-major grid order.
class PixelMap {
 public:
  PixelMap() = default;
  PixelMap(const LabelRaster& labels, const HsiCube* cube = nullptr);

  std::int64_t valid_count() const { return static_cast<std::int64_t>(rows_.size()); }
  std::int64_t row_of(std::int64_t flat) const { return rows_[flat]; }
  std::int64_t col_of(std::int64_t flat) const { return cols_[flat]; }

  /// Flat index of grid cell (row, col); -1 when the cell is background.
  std::int64_t to_flat(std::int64_t row, std::int64_t col) const {
    return grid_to_flat_[row * width_ + col];
  }

  std::int64_t grid_height() const { return height_; }
  std::int64_t grid_width() const { return width_; }

 private:
  std::int64_t height_ = 0, width_ = 0;
  std::vector<std::int32_t> rows_, cols_;
  std::vector<std::int64_t> grid_to_flat_;
};

/// Train/test/unlabeled partition of the valid pixel set. Flat indices refer
/// to the PixelMap ordering of the LabelRaster the split was drawn from.
struct Split {
  struct LabeledPixel {
    std::int32_t flat = 0;
    std::uint16_t class_code = 0;
  };

  std::vector<LabeledPixel> labeled;
  std::vector<LabeledPixel> test;
  std::vector<std::int32_t> unlabeled;  // == every valid pixel, by flat index
  std::uint64_t seed = 0;
  int per_class_quota = 0;
  int fallback_quota = 0;

  void save(const std::string& path, const PixelMap& map) const;
  static Split load(const std::string& path);
};

/// Loads `<stem>.raw` + `<stem>.hdr.txt` (or a `.raw` path) as a cube.
/// The sidecar must declare height, width, bands, dtype (f32|f64|u16) and
/// byteorder (little).
HsiCube load_cube(const std::string& path);
void save_cube(const std::string& stem, const HsiCube& cube, Dtype dtype = Dtype::f64);

/// Loads a single-band u16 raster in the same container format. Class codes
/// are remapped to a dense 1..c range if the source uses sparse codes; the
/// mapping is reported through `code_remap` when provided.
LabelRaster load_labels(const std::string& path,
                        std::vector<std::uint16_t>* code_remap = nullptr);
void save_labels(const std::string& stem, const LabelRaster& labels);

/// Builds labels directly from in-memory codes, applying the same
/// validation and dense remapping as load_labels.
LabelRaster make_label_raster(std::int64_t height, std::int64_t width,
                              std::vector<std::uint16_t> codes,
                              std::vector<std::uint16_t>* code_remap = nullptr);

/// Per-class stratified sampling: classes with population >= quota contribute
/// `quota` labeled pixels, smaller classes contribute `fallback`. Sampling is
/// without replacement and fully determined by `seed`. Throws when any class
/// would be left without a test pixel.
Split make_split(const LabelRaster& labels, int quota, int fallback, std::uint64_t seed);

}  // namespace gwcl
