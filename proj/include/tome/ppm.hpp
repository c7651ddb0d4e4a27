#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "tome/errors.hpp"

namespace tome {

/// 8-bit RGB raster, row-major, interleaved channels.
struct PpmImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // 3 * width * height

  std::uint8_t& at(int y, int x, int c) {
    return rgb[static_cast<std::size_t>((y * width + x) * 3 + c)];
  }
  std::uint8_t at(int y, int x, int c) const {
    return rgb[static_cast<std::size_t>((y * width + x) * 3 + c)];
  }
};

/// Reads a binary PPM (P6, maxval 255). Header comments are allowed.
/// Throws ParseError with the byte offset on malformed input.
PpmImage read_ppm(const std::filesystem::path& path);

/// Writes a binary PPM (P6, maxval 255).
void write_ppm(const PpmImage& image, const std::filesystem::path& path);

}  // namespace tome
