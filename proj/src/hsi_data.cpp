#include "gwcl/hsi_data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "gwcl/rng.hpp"

namespace gwcl {

namespace {

/// Strips a trailing ".raw" so both `foo` and `foo.raw` address the pair
/// `foo.raw` + `foo.hdr.txt`.
std::string stem_of(const std::string& path) {
  if (path.size() > 4 && path.compare(path.size() - 4, 4, ".raw") == 0) {
    return path.substr(0, path.size() - 4);
  }
  return path;
}

SidecarHeader load_raster_header(const std::string& stem, std::int64_t expected_bands) {
  const SidecarHeader h = SidecarHeader::load(stem + ".hdr.txt");
  const std::string order = h.get_or("byteorder", "little");
  if (order != "little") {
    throw std::runtime_error("unsupported byteorder '" + order + "' in " + stem);
  }
  if (expected_bands > 0 && h.get_int("bands") != expected_bands) {
    throw std::runtime_error("expected bands:" + std::to_string(expected_bands) + " in " + stem);
  }
  return h;
}

}  // namespace

void HsiCube::validate() const {
  if (height < 1 || width < 1 || bands < 1) {
    throw std::invalid_argument("cube dimensions must be >= 1");
  }
  const std::int64_t expected = height * width * bands;
  if (static_cast<std::int64_t>(values.size()) != expected) {
    throw std::invalid_argument("cube value buffer length " + std::to_string(values.size()) +
                                " != M*N*alpha = " + std::to_string(expected));
  }
  if (!nodata_mask.empty() &&
      static_cast<std::int64_t>(nodata_mask.size()) != height * width) {
    throw std::invalid_argument("nodata mask length != M*N");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("cube contains non-finite values");
  }
}

std::vector<std::int64_t> LabelRaster::class_populations() const {
  std::vector<std::int64_t> pop(static_cast<std::size_t>(class_count), 0);
  for (std::uint16_t code : codes) {
    if (code > 0) ++pop[code - 1];
  }
  return pop;
}

PixelMap::PixelMap(const LabelRaster& labels, const HsiCube* cube) {
  height_ = labels.height;
  width_ = labels.width;
  grid_to_flat_.assign(static_cast<std::size_t>(height_ * width_), -1);
  for (std::int64_t m = 0; m < height_; ++m) {
    for (std::int64_t n = 0; n < width_; ++n) {
      const std::int64_t cell = m * width_ + n;
      if (labels.codes[cell] == 0) continue;
      if (cube != nullptr && !cube->nodata_mask.empty() && cube->nodata_mask[cell]) continue;
      grid_to_flat_[cell] = static_cast<std::int64_t>(rows_.size());
      rows_.push_back(static_cast<std::int32_t>(m));
      cols_.push_back(static_cast<std::int32_t>(n));
    }
  }
}

HsiCube load_cube(const std::string& path) {
  const std::string stem = stem_of(path);
  const SidecarHeader h = load_raster_header(stem, 0);
  HsiCube cube;
  cube.height = h.get_int("height");
  cube.width = h.get_int("width");
  cube.bands = h.get_int("bands");
  if (cube.height < 1 || cube.width < 1 || cube.bands < 1) {
    throw std::runtime_error("invalid dimensions in " + stem + ".hdr.txt");
  }
  const Dtype dtype = dtype_from_name(h.get("dtype"));
  cube.values = read_raw_as_double(stem + ".raw", dtype,
                                   cube.height * cube.width * cube.bands);
  cube.validate();
  return cube;
}

void save_cube(const std::string& stem, const HsiCube& cube, Dtype dtype) {
  cube.validate();
  SidecarHeader h;
  h.set_int("height", cube.height);
  h.set_int("width", cube.width);
  h.set_int("bands", cube.bands);
  h.set("dtype", dtype_name(dtype));
  h.set("byteorder", "little");
  h.save(stem + ".hdr.txt");

  const std::size_t n = cube.values.size();
  std::vector<std::uint8_t> bytes(n * dtype_size(dtype));
  switch (dtype) {
    case Dtype::f64:
      for (std::size_t i = 0; i < n; ++i) {
        le_store_u64(bytes.data() + 8 * i, std::bit_cast<std::uint64_t>(cube.values[i]));
      }
      break;
    case Dtype::f32:
      for (std::size_t i = 0; i < n; ++i) {
        le_store_u32(bytes.data() + 4 * i,
                     std::bit_cast<std::uint32_t>(static_cast<float>(cube.values[i])));
      }
      break;
    case Dtype::u16:
      for (std::size_t i = 0; i < n; ++i) {
        le_store_u16(bytes.data() + 2 * i, static_cast<std::uint16_t>(cube.values[i]));
      }
      break;
    default:
      throw std::invalid_argument("cube payloads must be f32, f64 or u16");
  }
  write_file_bytes(stem + ".raw", bytes.data(), bytes.size());
}

LabelRaster make_label_raster(std::int64_t height, std::int64_t width,
                              std::vector<std::uint16_t> codes,
                              std::vector<std::uint16_t>* code_remap) {
  if (height < 1 || width < 1) throw std::invalid_argument("label dimensions must be >= 1");
  if (static_cast<std::int64_t>(codes.size()) != height * width) {
    throw std::invalid_argument("label buffer length != M*N");
  }
  std::uint16_t max_code = 0;
  for (std::uint16_t c : codes) max_code = std::max(max_code, c);

  std::vector<std::int64_t> pop(static_cast<std::size_t>(max_code) + 1, 0);
  for (std::uint16_t c : codes) ++pop[c];

  // Dense remap: present codes keep their relative order.
  std::vector<std::uint16_t> remap(pop.size(), 0);
  std::uint16_t next = 1;
  bool sparse = false;
  for (std::uint16_t c = 1; c < pop.size(); ++c) {
    if (pop[c] > 0) {
      remap[c] = next++;
      if (remap[c] != c) sparse = true;
    } else {
      sparse = true;
    }
  }
  if (sparse) {
    for (auto& c : codes) c = remap[c];
  } else if (code_remap != nullptr) {
    remap.clear();
  }
  if (code_remap != nullptr && sparse) *code_remap = remap;

  LabelRaster labels;
  labels.height = height;
  labels.width = width;
  labels.codes = std::move(codes);
  labels.class_count = next - 1;
  return labels;
}

LabelRaster load_labels(const std::string& path, std::vector<std::uint16_t>* code_remap) {
  const std::string stem = stem_of(path);
  const SidecarHeader h = load_raster_header(stem, 1);
  const std::int64_t height = h.get_int("height");
  const std::int64_t width = h.get_int("width");
  const Dtype dtype = dtype_from_name(h.get("dtype"));
  if (dtype != Dtype::u16) {
    throw std::runtime_error("label rasters must use dtype u16: " + stem);
  }
  const std::vector<double> raw = read_raw_as_double(stem + ".raw", dtype, height * width);
  std::vector<std::uint16_t> codes(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) codes[i] = static_cast<std::uint16_t>(raw[i]);
  return make_label_raster(height, width, std::move(codes), code_remap);
}

void save_labels(const std::string& stem, const LabelRaster& labels) {
  SidecarHeader h;
  h.set_int("height", labels.height);
  h.set_int("width", labels.width);
  h.set_int("bands", 1);
  h.set("dtype", "u16");
  h.set("byteorder", "little");
  h.save(stem + ".hdr.txt");
  std::vector<std::uint8_t> bytes(labels.codes.size() * 2);
  for (std::size_t i = 0; i < labels.codes.size(); ++i) {
    le_store_u16(bytes.data() + 2 * i, labels.codes[i]);
  }
  write_file_bytes(stem + ".raw", bytes.data(), bytes.size());
}

Split make_split(const LabelRaster& labels, int quota, int fallback, std::uint64_t seed) {
  if (quota < 1 || fallback < 1 || fallback > quota) {
    throw std::invalid_argument("need 1 <= fallback <= quota");
  }
  const PixelMap map(labels);
  const int c = labels.class_count;

  // Valid pixels of each class, in flat order.
  std::vector<std::vector<std::int32_t>> members(static_cast<std::size_t>(c));
  for (std::int64_t flat = 0; flat < map.valid_count(); ++flat) {
    const std::uint16_t code = labels.at(map.row_of(flat), map.col_of(flat));
    members[code - 1].push_back(static_cast<std::int32_t>(flat));
  }

  Split split;
  split.seed = seed;
  split.per_class_quota = quota;
  split.fallback_quota = fallback;
  Rng rng(seed);
  for (int k = 0; k < c; ++k) {
    auto& pool = members[static_cast<std::size_t>(k)];
    const std::int64_t pop = static_cast<std::int64_t>(pool.size());
    const int want = pop >= quota ? quota : fallback;
    if (pop <= want) {
      throw std::runtime_error("class " + std::to_string(k + 1) + " has " + std::to_string(pop) +
                               " pixels; cannot take " + std::to_string(want) +
                               " labeled and leave a non-empty test set");
    }
    // Partial Fisher-Yates: the first `want` slots become the labeled draw.
    for (int i = 0; i < want; ++i) {
      const std::int64_t j =
          i + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(pop - i)));
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    std::sort(pool.begin(), pool.begin() + want);
    std::sort(pool.begin() + want, pool.end());
    const auto code = static_cast<std::uint16_t>(k + 1);
    for (int i = 0; i < want; ++i) split.labeled.push_back({pool[i], code});
    for (std::int64_t i = want; i < pop; ++i) split.test.push_back({pool[i], code});
  }
  std::sort(split.labeled.begin(), split.labeled.end(),
            [](const auto& a, const auto& b) { return a.flat < b.flat; });
  std::sort(split.test.begin(), split.test.end(),
            [](const auto& a, const auto& b) { return a.flat < b.flat; });

  // Unlabeled pool = valid pixels the trainer may not see labels for,
  // i.e. everything outside the labeled draw.
  split.unlabeled.reserve(split.test.size());
  for (const auto& p : split.test) split.unlabeled.push_back(p.flat);
  return split;
}

void Split::save(const std::string& path, const PixelMap& map) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open split file for writing: " + path);
  out << "# index,row,col,class,role\n";
  out << "# seed=" << seed << " quota=" << per_class_quota << " fallback=" << fallback_quota
      << "\n";
  for (const auto& p : labeled) {
    out << p.flat << "," << map.row_of(p.flat) << "," << map.col_of(p.flat) << ","
        << p.class_code << ",train\n";
  }
  for (const auto& p : test) {
    out << p.flat << "," << map.row_of(p.flat) << "," << map.col_of(p.flat) << ","
        << p.class_code << ",test\n";
  }
}

Split Split::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open split file: " + path);
  Split split;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream meta(line.substr(1));
      std::string tok;
      while (meta >> tok) {
        if (tok.rfind("seed=", 0) == 0) split.seed = std::stoull(tok.substr(5));
        if (tok.rfind("quota=", 0) == 0) split.per_class_quota = std::stoi(tok.substr(6));
        if (tok.rfind("fallback=", 0) == 0) split.fallback_quota = std::stoi(tok.substr(9));
      }
      continue;
    }
    std::istringstream row(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(row, field, ',')) fields.push_back(field);
    if (fields.size() != 5) throw std::runtime_error("malformed split line: " + line);
    LabeledPixel p;
    p.flat = static_cast<std::int32_t>(std::stol(fields[0]));
    p.class_code = static_cast<std::uint16_t>(std::stoul(fields[3]));
    if (fields[4] == "train") {
      split.labeled.push_back(p);
    } else if (fields[4] == "test") {
      split.test.push_back(p);
    } else {
      throw std::runtime_error("unknown split role: " + fields[4]);
    }
  }
  split.unlabeled.reserve(split.test.size());
  for (const auto& p : split.test) split.unlabeled.push_back(p.flat);
  return split;
}

}  // namespace gwcl
