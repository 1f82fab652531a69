#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "corrkit/geometry.hpp"
#include "corrkit/interchange.hpp"

namespace corrkit {

// 8-bit grayscale image, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  bool empty() const { return width <= 0 || height <= 0 || pixels.empty(); }
  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  ImageBounds bounds() const { return {width, height}; }
};

// Binary PGM (P5, maxval <= 255). Bit-exact round trip.
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);
// Reads only the header.
ImageBounds read_pgm_size(const std::filesystem::path& path);

// Depth grid: 16-byte header ("ZEBD", width, height as u32 LE, 4 reserved
// bytes) followed by width*height little-endian float32 values.
DepthMap read_depth(const std::filesystem::path& path);
void write_depth(const std::filesystem::path& path, const DepthMap& depth);

}  // namespace corrkit
