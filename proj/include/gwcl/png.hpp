#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gwcl {

/// Writes an 8-bit RGB PNG. `rgb` is row-major, 3 bytes per pixel. The
/// encoder uses a fixed deflate setting, so output bytes are deterministic
/// for identical input.
void write_png_rgb(const std::string& path, std::int64_t height, std::int64_t width,
                   const std::vector<std::uint8_t>& rgb);

}  // namespace gwcl
