#include "gwcl/png.hpp"

#include <zlib.h>

#include <cstring>
#include <stdexcept>

#include "gwcl/io.hpp"

namespace gwcl {

namespace {

void append_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& payload) {
  append_u32_be(out, static_cast<std::uint32_t>(payload.size()));
  const std::size_t crc_begin = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  const uLong crc = crc32(0L, out.data() + crc_begin, static_cast<uInt>(out.size() - crc_begin));
  append_u32_be(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

void write_png_rgb(const std::string& path, std::int64_t height, std::int64_t width,
                   const std::vector<std::uint8_t>& rgb) {
  if (height < 1 || width < 1) throw std::invalid_argument("png dimensions must be >= 1");
  if (rgb.size() != static_cast<std::size_t>(height * width * 3)) {
    throw std::invalid_argument("rgb buffer size != height*width*3");
  }

  // Filter byte 0 in front of each scanline.
  const std::size_t stride = static_cast<std::size_t>(width) * 3;
  std::vector<std::uint8_t> raw;
  raw.reserve(static_cast<std::size_t>(height) * (stride + 1));
  for (std::int64_t r = 0; r < height; ++r) {
    raw.push_back(0);
    const std::uint8_t* line = rgb.data() + static_cast<std::size_t>(r) * stride;
    raw.insert(raw.end(), line, line + stride);
  }

  uLongf compressed_size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> compressed(compressed_size);
  if (compress2(compressed.data(), &compressed_size, raw.data(),
                static_cast<uLong>(raw.size()), 9) != Z_OK) {
    throw std::runtime_error("deflate failed while writing " + path);
  }
  compressed.resize(compressed_size);

  std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  std::vector<std::uint8_t> ihdr;
  append_u32_be(ihdr, static_cast<std::uint32_t>(width));
  append_u32_be(ihdr, static_cast<std::uint32_t>(height));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // color type: truecolor
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // interlace
  append_chunk(out, "IHDR", ihdr);
  append_chunk(out, "IDAT", compressed);
  append_chunk(out, "IEND", {});
  write_file_bytes(path, out.data(), out.size());
}

}  // namespace gwcl
