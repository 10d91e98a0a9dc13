#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "typojack/image.hpp"

namespace typojack::typography {

/// One point in the typographic search space. Ranges are fixed; validate()
/// enforces them against the target image dimensions.
struct TypoParams {
  int x = 0;            // [0, image width]
  int y = 0;            // [0, image height]
  int font_size = 10;   // [10, 150] px
  std::array<int, 3> color = {0, 0, 0};  // each [0, 255]
  int line_count = 1;   // [1, 10]
  int contrast = 5;     // [0, 10]; 5 reproduces the requested color exactly
  int transparency = 255;  // [0, 255]; 0 = fully invisible

  void validate(std::uint32_t image_w, std::uint32_t image_h) const;
};

struct PixelRect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool contains(const PixelRect& inner) const {
    return inner.x >= x && inner.y >= y && inner.x + inner.w <= x + w &&
           inner.y + inner.h <= y + h;
  }
  bool empty() const { return w <= 0 || h <= 0; }
};

/// Monochrome glyph raster. `left`/`top` position the bitmap relative to the
/// pen: image_x = pen_x + left, image_y = baseline_row + top.
struct GlyphBitmap {
  int width = 0;
  int height = 0;
  int left = 0;
  int top = 0;
  std::vector<std::uint8_t> coverage;  // 0 or 1 per pixel

  bool empty() const { return width == 0 || height == 0; }
};

/// TrueType glyph outlines and metrics. Immutable after load; the raster
/// cache is internally synchronized, so one face can be shared across threads.
class FontFace {
 public:
  ~FontFace();
  FontFace(const FontFace&) = delete;
  FontFace& operator=(const FontFace&) = delete;

  static std::shared_ptr<const FontFace> load(const std::string& path);

  int units_per_em() const;
  int ascent() const;    // font units, positive up
  int descent() const;   // font units, typically negative
  int line_gap() const;

  std::uint16_t glyph_index(char32_t codepoint) const;
  int advance_width(std::uint16_t glyph) const;  // font units

  const GlyphBitmap& raster(std::uint16_t glyph, int pixel_size) const;

 private:
  FontFace();
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct PlacedGlyph {
  std::uint16_t glyph = 0;
  int x = 0;          // pen position, pixels
  int baseline = 0;   // baseline row, pixels
};

struct TextLayout {
  std::vector<std::string> lines;
  std::vector<PixelRect> glyph_boxes;   // ink box per visible glyph
  PixelRect block_box;                  // union of glyph boxes
  std::vector<PlacedGlyph> placements;  // one per visible glyph
  int font_px = 0;                      // effective size after shrink-to-fit
};

/// Coverage map produced by insert_prompt: per-pixel glyph coverage in [0,1],
/// 0 where the image was untouched. Carries the render facts the deterministic
/// caption model needs (effective font size, opacity, drawn lines).
struct CoverageMask {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<float> coverage;
  int font_px = 0;
  int transparency = 0;
  std::vector<std::string> lines;

  float at(std::uint32_t x, std::uint32_t y) const {
    return coverage[static_cast<std::size_t>(y) * width + x];
  }
  bool any() const;
};

/// Wraps the prompt into min(line_count, word count) lines (greedy balanced,
/// words never split), anchors the block at (x, y), clamps it into the image,
/// and shrinks the font in 2 px steps (floor 10) when the block cannot fit.
TextLayout layout_text(const std::string& prompt, const TypoParams& params,
                       std::uint32_t image_w, std::uint32_t image_h,
                       const FontFace& font);

struct InsertResult {
  imaging::Rgba8Image altered;
  CoverageMask mask;
  TextLayout layout;
};

/// Renders the prompt onto a copy of the image. Per covered pixel:
///   out = base + c * (transparency/255) * (glyph_color' - base), rounded
/// half-up, where glyph_color' offsets the requested color around the mean of
/// the original pixels under the block (neutral at contrast 5).
InsertResult insert_prompt(const imaging::Rgba8Image& image,
                           const std::string& prompt, const TypoParams& params,
                           const FontFace& font);

}  // namespace typojack::typography
