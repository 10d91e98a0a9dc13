#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "typojack/common.hpp"

namespace typojack::imaging {

/// 8-bit RGBA raster, row-major, tightly packed (stride = width * 4).
struct Rgba8Image {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> pixels;

  Rgba8Image() = default;
  Rgba8Image(std::uint32_t w, std::uint32_t h);

  static Rgba8Image filled(std::uint32_t w, std::uint32_t h,
                           std::array<std::uint8_t, 4> rgba);

  bool same_size(const Rgba8Image& other) const {
    return width == other.width && height == other.height;
  }

  std::size_t offset(std::uint32_t x, std::uint32_t y) const {
    return (static_cast<std::size_t>(y) * width + x) * 4;
  }

  const std::uint8_t* at(std::uint32_t x, std::uint32_t y) const {
    return pixels.data() + offset(x, y);
  }
  std::uint8_t* at(std::uint32_t x, std::uint32_t y) {
    return pixels.data() + offset(x, y);
  }

  void set(std::uint32_t x, std::uint32_t y, std::array<std::uint8_t, 4> rgba);

  // Stable across runs; keyed only by dimensions and pixel bytes.
  std::uint64_t content_hash() const;

  void validate() const;
};

/// Rec.601 luma in [0, 255]; alpha is ignored.
inline double luminance(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return 0.299 * r + 0.587 * g + 0.114 * b;
}

Rgba8Image load_png(const std::string& path);
void save_png(const Rgba8Image& image, const std::string& path);

std::vector<std::uint8_t> encode_png(const Rgba8Image& image);
Rgba8Image decode_png(const std::uint8_t* data, std::size_t size);

}  // namespace typojack::imaging
