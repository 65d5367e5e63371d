#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "gwcl/hsi_data.hpp"
#include "test_support.hpp"

using namespace gwcl;
using gwcl::testing::TempDir;

namespace {

HsiCube tiny_cube(std::int64_t h, std::int64_t w, std::int64_t b, double fill = 0.0) {
  HsiCube c;
  c.height = h;
  c.width = w;
  c.bands = b;
  c.values.assign(static_cast<std::size_t>(h * w * b), fill);
  return c;
}

/// Label raster whose class populations match the Indian Pines ground truth.
LabelRaster indian_pines_shaped_labels() {
  const std::vector<std::int64_t> populations = {46,   1428, 830, 237, 483, 730, 28,  478,
                                                 20,   972,  2455, 593, 205, 1265, 386, 93};
  std::int64_t total = 0;
  for (auto p : populations) total += p;
  const std::int64_t side = 145;
  std::vector<std::uint16_t> codes(static_cast<std::size_t>(side * side), 0);
  std::size_t cell = 0;
  for (std::size_t k = 0; k < populations.size(); ++k) {
    for (std::int64_t i = 0; i < populations[k]; ++i) {
      codes[cell++] = static_cast<std::uint16_t>(k + 1);
    }
  }
  REQUIRE(total <= side * side);
  return make_label_raster(side, side, std::move(codes));
}

}  // namespace

TEST_CASE("cube save/load round trip preserves values and dims") {
  TempDir dir("cube");
  HsiCube cube = tiny_cube(3, 4, 2);
  for (std::size_t i = 0; i < cube.values.size(); ++i) cube.values[i] = 0.25 * double(i) - 1.5;
  save_cube(dir.str("c"), cube);
  const HsiCube back = load_cube(dir.str("c"));
  CHECK(back.height == 3);
  CHECK(back.width == 4);
  CHECK(back.bands == 2);
  CHECK(back.values == cube.values);
}

TEST_CASE("cube load supports f32 and u16 payloads") {
  TempDir dir("dtype");
  HsiCube cube = tiny_cube(2, 2, 1);
  cube.values = {0.0, 1.0, 2.0, 3.0};
  save_cube(dir.str("f32"), cube, Dtype::f32);
  CHECK(load_cube(dir.str("f32")).values == cube.values);
  save_cube(dir.str("u16"), cube, Dtype::u16);
  CHECK(load_cube(dir.str("u16")).values == cube.values);
}

TEST_CASE("degenerate minimal cube 2x2x1 of zeros") {
  TempDir dir("zeros");
  save_cube(dir.str("z"), tiny_cube(2, 2, 1));
  const HsiCube back = load_cube(dir.str("z"));
  CHECK(back.values.size() == 4);
  for (double v : back.values) CHECK(v == 0.0);
}

TEST_CASE("payload size mismatch is rejected") {
  TempDir dir("mismatch");
  save_cube(dir.str("c"), tiny_cube(2, 2, 2));
  // Corrupt the header to claim an extra band.
  SidecarHeader h = SidecarHeader::load(dir.str("c.hdr.txt"));
  h.set_int("bands", 3);
  h.save(dir.str("c.hdr.txt"));
  CHECK_THROWS(load_cube(dir.str("c")));
}

TEST_CASE("non-finite values are rejected") {
  HsiCube cube = tiny_cube(2, 2, 1);
  cube.values[2] = std::nan("");
  CHECK_THROWS(cube.validate());
  cube.values[2] = std::numeric_limits<double>::infinity();
  CHECK_THROWS(cube.validate());
}

TEST_CASE("unsupported dtype is rejected") {
  TempDir dir("dtype2");
  save_cube(dir.str("c"), tiny_cube(2, 2, 1));
  SidecarHeader h = SidecarHeader::load(dir.str("c.hdr.txt"));
  h.set("dtype", "i32");
  h.save(dir.str("c.hdr.txt"));
  CHECK_THROWS(load_cube(dir.str("c")));
}

TEST_CASE("labels: all-zero raster has zero classes and empty valid set") {
  const LabelRaster labels = make_label_raster(4, 4, std::vector<std::uint16_t>(16, 0));
  CHECK(labels.class_count == 0);
  const PixelMap map(labels);
  CHECK(map.valid_count() == 0);
}

TEST_CASE("labels: sparse codes are remapped to dense 1..c with mapping reported") {
  std::vector<std::uint16_t> codes = {0, 2, 2, 5, 5, 5, 9, 9};
  std::vector<std::uint16_t> remap;
  const LabelRaster labels = make_label_raster(2, 4, std::move(codes), &remap);
  CHECK(labels.class_count == 3);
  CHECK(labels.codes == std::vector<std::uint16_t>{0, 1, 1, 2, 2, 2, 3, 3});
  REQUIRE(remap.size() == 10);
  CHECK(remap[2] == 1);
  CHECK(remap[5] == 2);
  CHECK(remap[9] == 3);
}

TEST_CASE("labels: save/load round trip") {
  TempDir dir("labels");
  const LabelRaster labels = make_label_raster(2, 3, {0, 1, 2, 2, 1, 0});
  save_labels(dir.str("gt"), labels);
  const LabelRaster back = load_labels(dir.str("gt"));
  CHECK(back.codes == labels.codes);
  CHECK(back.class_count == 2);
}

TEST_CASE("flat index round trip over the valid set") {
  const LabelRaster labels = make_label_raster(5, 7, [] {
    std::vector<std::uint16_t> codes(35, 0);
    for (std::size_t i = 0; i < codes.size(); i += 3) codes[i] = 1;
    for (std::size_t i = 1; i < codes.size(); i += 5) codes[i] = 2;
    return codes;
  }());
  const PixelMap map(labels);
  REQUIRE(map.valid_count() > 0);
  for (std::int64_t flat = 0; flat < map.valid_count(); ++flat) {
    CHECK(map.to_flat(map.row_of(flat), map.col_of(flat)) == flat);
  }
  // Background cells map to -1.
  std::int64_t holes = 0;
  for (std::int64_t m = 0; m < 5; ++m) {
    for (std::int64_t n = 0; n < 7; ++n) {
      if (labels.at(m, n) == 0) {
        CHECK(map.to_flat(m, n) == -1);
        ++holes;
      }
    }
  }
  CHECK(holes + map.valid_count() == 35);
}

TEST_CASE("split: quota rule on Indian Pines shaped populations") {
  const LabelRaster labels = indian_pines_shaped_labels();
  REQUIRE(labels.class_count == 16);
  const Split split = make_split(labels, 30, 15, 7);

  // Classes 7 and 9 (populations 28 and 20) fall back to 15; others take 30.
  std::vector<int> labeled_per_class(17, 0);
  for (const auto& p : split.labeled) ++labeled_per_class[p.class_code];
  for (int k = 1; k <= 16; ++k) {
    if (k == 7 || k == 9) {
      CHECK(labeled_per_class[k] == 15);
    } else {
      CHECK(labeled_per_class[k] == 30);
    }
  }
  // Table totals: 14*30 + 2*15 labeled.
  CHECK(split.labeled.size() == 14 * 30 + 2 * 15);
  CHECK(split.labeled.size() == 450);

  // Class 2 population 1428 -> 30 train / 1398 test; class 9 -> 15 / 5.
  std::vector<int> test_per_class(17, 0);
  for (const auto& p : split.test) ++test_per_class[p.class_code];
  CHECK(test_per_class[2] == 1398);
  CHECK(test_per_class[9] == 5);
}

TEST_CASE("split: labeled and test partition the valid set") {
  const auto scene = gwcl::testing::make_strip_scene(12, 12, 3, 3, 4.0, 11);
  const Split split = make_split(scene.labels, 10, 5, 3);
  const PixelMap map(scene.labels);
  std::set<std::int32_t> seen;
  for (const auto& p : split.labeled) CHECK(seen.insert(p.flat).second);
  for (const auto& p : split.test) CHECK(seen.insert(p.flat).second);
  CHECK(static_cast<std::int64_t>(seen.size()) == map.valid_count());
  // Unlabeled pool is exactly the non-labeled part.
  CHECK(split.unlabeled.size() == split.test.size());
}

TEST_CASE("split: fallback rule, 16-pixel class with quota 30 gives 15 train 1 test") {
  std::vector<std::uint16_t> codes(4 * 8, 0);
  for (std::size_t i = 0; i < 16; ++i) codes[i] = 1;
  const LabelRaster labels = make_label_raster(4, 8, std::move(codes));
  const Split split = make_split(labels, 30, 15, 99);
  CHECK(split.labeled.size() == 15);
  CHECK(split.test.size() == 1);
}

TEST_CASE("split: class too small to leave a test pixel is an error") {
  std::vector<std::uint16_t> codes(16, 0);
  for (std::size_t i = 0; i < 15; ++i) codes[i] = 1;  // population == fallback
  const LabelRaster small = make_label_raster(4, 4, std::move(codes));
  CHECK_THROWS(make_split(small, 30, 15, 1));

  std::vector<std::uint16_t> exact(36, 0);
  for (std::size_t i = 0; i < 30; ++i) exact[i] = 1;  // population == quota
  const LabelRaster border = make_label_raster(6, 6, std::move(exact));
  CHECK_THROWS(make_split(border, 30, 15, 1));
}

TEST_CASE("split determinism: same seed twice gives identical index lists") {
  const auto scene = gwcl::testing::make_strip_scene(20, 20, 4, 4, 3.0, 5);
  for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 987654321ULL}) {
    const Split a = make_split(scene.labels, 8, 4, seed);
    const Split b = make_split(scene.labels, 8, 4, seed);
    REQUIRE(a.labeled.size() == b.labeled.size());
    for (std::size_t i = 0; i < a.labeled.size(); ++i) {
      CHECK(a.labeled[i].flat == b.labeled[i].flat);
      CHECK(a.labeled[i].class_code == b.labeled[i].class_code);
    }
    CHECK(a.unlabeled == b.unlabeled);
  }
  // Different seeds give different draws (overwhelmingly likely).
  const Split a = make_split(scene.labels, 8, 4, 1);
  const Split b = make_split(scene.labels, 8, 4, 2);
  bool same = a.labeled.size() == b.labeled.size();
  if (same) {
    same = std::equal(a.labeled.begin(), a.labeled.end(), b.labeled.begin(),
                      [](const auto& x, const auto& y) { return x.flat == y.flat; });
  }
  CHECK_FALSE(same);
}

TEST_CASE("split export and reload") {
  TempDir dir("split");
  const auto scene = gwcl::testing::make_strip_scene(10, 10, 3, 2, 4.0, 21);
  const Split split = make_split(scene.labels, 6, 3, 17);
  const PixelMap map(scene.labels);
  split.save(dir.str("split.txt"), map);
  const Split back = Split::load(dir.str("split.txt"));
  CHECK(back.labeled.size() == split.labeled.size());
  CHECK(back.test.size() == split.test.size());
  CHECK(back.seed == 17);
  for (std::size_t i = 0; i < split.labeled.size(); ++i) {
    CHECK(back.labeled[i].flat == split.labeled[i].flat);
    CHECK(back.labeled[i].class_code == split.labeled[i].class_code);
  }
}

TEST_CASE("rng: portable sequences and shuffle determinism") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  std::vector<int> v1{1, 2, 3, 4, 5, 6, 7, 8}, v2 = v1;
  Rng c(9), d(9);
  c.shuffle(v1);
  d.shuffle(v2);
  CHECK(v1 == v2);
  // below(n) stays in range.
  Rng e(4);
  for (int i = 0; i < 1000; ++i) CHECK(e.below(7) < 7);
}

TEST_CASE("array bundle round trips bit-exactly") {
  TempDir dir("bundle");
  ArrayBundle b;
  b.add(NamedArray::from_f64("x", {1.0, -2.5, 3.25e-300, 1e300}, {4}));
  b.add(NamedArray::from_i32("i", {-1, 0, 2147483647}, {3}));
  b.add(NamedArray::from_i64("o", {0, 9223372036854775807LL}, {2}));
  b.set_meta("kind", "test");
  b.save(dir.str("bundle"));
  const ArrayBundle back = ArrayBundle::load(dir.str("bundle"));
  CHECK(back.get("x").as_f64() == std::vector<double>{1.0, -2.5, 3.25e-300, 1e300});
  CHECK(back.get("i").as_i32() == std::vector<std::int32_t>{-1, 0, 2147483647});
  CHECK(back.get("o").as_i64() == std::vector<std::int64_t>{0, 9223372036854775807LL});
  CHECK(back.meta("kind") == "test");
  CHECK(back.get("x").bytes == b.get("x").bytes);
}
