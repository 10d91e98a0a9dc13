#include <algorithm>
#include <cmath>
#include <numeric>

#include "typojack/typography.hpp"

namespace typojack::typography {

namespace {

std::vector<char32_t> decode_utf8(const std::string& text) {
  std::vector<char32_t> out;
  std::size_t i = 0;
  while (i < text.size()) {
    unsigned char c = text[i];
    char32_t cp = 0;
    int extra = 0;
    if (c < 0x80) {
      cp = c;
    } else if ((c & 0xE0) == 0xC0) {
      cp = c & 0x1F;
      extra = 1;
    } else if ((c & 0xF0) == 0xE0) {
      cp = c & 0x0F;
      extra = 2;
    } else if ((c & 0xF8) == 0xF0) {
      cp = c & 0x07;
      extra = 3;
    } else {
      cp = 0xFFFD;
    }
    ++i;
    for (int k = 0; k < extra && i < text.size(); ++k, ++i) {
      cp = (cp << 6) | (text[i] & 0x3F);
    }
    out.push_back(cp);
  }
  return out;
}

std::vector<std::string> split_words(const std::string& prompt) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : prompt) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      if (!cur.empty()) {
        words.push_back(cur);
        cur.clear();
      }
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) words.push_back(cur);
  return words;
}

// Left-to-right greedy fill with character cap; returns the line count.
std::size_t greedy_line_count(const std::vector<std::string>& words,
                              std::size_t cap) {
  std::size_t lines = 1;
  std::size_t cur = words[0].size();
  for (std::size_t i = 1; i < words.size(); ++i) {
    if (cur + 1 + words[i].size() <= cap) {
      cur += 1 + words[i].size();
    } else {
      ++lines;
      cur = words[i].size();
    }
  }
  return lines;
}

// Greedy balanced wrap into exactly n lines: binary-search the smallest cap
// the greedy fill can honor with <= n lines, then fill while reserving one
// word for each line still to come.
std::vector<std::string> wrap_words(const std::vector<std::string>& words,
                                    std::size_t n) {
  std::size_t longest = 0;
  std::size_t total = words.empty() ? 0 : words.size() - 1;
  for (const std::string& w : words) {
    longest = std::max(longest, w.size());
    total += w.size();
  }

  std::size_t lo = longest, hi = total;
  while (lo < hi) {
    std::size_t mid = (lo + hi) / 2;
    if (greedy_line_count(words, mid) <= n) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  const std::size_t cap = lo;

  std::vector<std::string> lines;
  std::size_t idx = 0;
  for (std::size_t li = 0; li < n; ++li) {
    std::size_t reserve = n - 1 - li;  // words owed to later lines
    std::string line = words[idx++];
    while (idx < words.size() && words.size() - idx > reserve) {
      bool last_line = li + 1 == n;
      if (!last_line && line.size() + 1 + words[idx].size() > cap) break;
      line += ' ';
      line += words[idx++];
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

struct BlockLayout {
  std::vector<PlacedGlyph> placements;  // block-local coordinates
  std::vector<PixelRect> boxes;
  PixelRect ink;  // block-local union
};

BlockLayout place_block(const std::vector<std::string>& lines, int font_px,
                        const FontFace& font) {
  const double scale = static_cast<double>(font_px) / font.units_per_em();
  const double ascent_px = font.ascent() * scale;
  const double line_adv =
      (font.ascent() - font.descent() + font.line_gap()) * scale;

  BlockLayout out;
  bool have_ink = false;
  int ix0 = 0, iy0 = 0, ix1 = 0, iy1 = 0;

  for (std::size_t li = 0; li < lines.size(); ++li) {
    double pen_x = 0.0;
    const int baseline =
        static_cast<int>(std::lround(ascent_px + li * line_adv));
    for (char32_t cp : decode_utf8(lines[li])) {
      std::uint16_t g = font.glyph_index(cp);
      const GlyphBitmap& bmp = font.raster(g, font_px);
      const int pen_ix = static_cast<int>(std::lround(pen_x));
      if (!bmp.empty()) {
        PixelRect box{pen_ix + bmp.left, baseline + bmp.top, bmp.width,
                      bmp.height};
        out.placements.push_back({g, pen_ix, baseline});
        out.boxes.push_back(box);
        if (!have_ink) {
          ix0 = box.x;
          iy0 = box.y;
          ix1 = box.x + box.w;
          iy1 = box.y + box.h;
          have_ink = true;
        } else {
          ix0 = std::min(ix0, box.x);
          iy0 = std::min(iy0, box.y);
          ix1 = std::max(ix1, box.x + box.w);
          iy1 = std::max(iy1, box.y + box.h);
        }
      }
      pen_x += font.advance_width(g) * scale;
    }
  }

  if (!have_ink) {
    raise(Errc::unrenderable, "prompt produced no visible glyphs");
  }
  out.ink = {ix0, iy0, ix1 - ix0, iy1 - iy0};
  return out;
}

}  // namespace

void TypoParams::validate(std::uint32_t image_w, std::uint32_t image_h) const {
  auto check = [](bool ok, const char* what) {
    if (!ok) raise(Errc::out_of_bounds, std::string("parameter out of range: ") + what);
  };
  check(x >= 0 && x <= static_cast<int>(image_w), "x");
  check(y >= 0 && y <= static_cast<int>(image_h), "y");
  check(font_size >= 10 && font_size <= 150, "font_size");
  for (int c : color) check(c >= 0 && c <= 255, "color");
  check(line_count >= 1 && line_count <= 10, "line_count");
  check(contrast >= 0 && contrast <= 10, "contrast");
  check(transparency >= 0 && transparency <= 255, "transparency");
}

bool CoverageMask::any() const {
  for (float c : coverage) {
    if (c > 0.0f) return true;
  }
  return false;
}

TextLayout layout_text(const std::string& prompt, const TypoParams& params,
                       std::uint32_t image_w, std::uint32_t image_h,
                       const FontFace& font) {
  params.validate(image_w, image_h);
  std::vector<std::string> words = split_words(prompt);
  if (words.empty()) {
    raise(Errc::empty_prompt, "prompt is blank");
  }

  const std::size_t n_lines =
      std::min<std::size_t>(params.line_count, words.size());
  std::vector<std::string> lines = wrap_words(words, n_lines);

  const int iw = static_cast<int>(image_w);
  const int ih = static_cast<int>(image_h);

  int fs = params.font_size;
  BlockLayout block;
  while (true) {
    block = place_block(lines, fs, font);
    if (block.ink.w <= iw && block.ink.h <= ih) break;
    if (fs <= 10) {
      raise(Errc::unrenderable,
            "text block cannot fit in the image at minimum font size");
    }
    fs = std::max(10, fs - 2);
  }

  const int dest_x = std::clamp(params.x, 0, iw - block.ink.w);
  const int dest_y = std::clamp(params.y, 0, ih - block.ink.h);
  const int dx = dest_x - block.ink.x;
  const int dy = dest_y - block.ink.y;

  TextLayout layout;
  layout.lines = std::move(lines);
  layout.font_px = fs;
  layout.block_box = {dest_x, dest_y, block.ink.w, block.ink.h};
  layout.placements.reserve(block.placements.size());
  layout.glyph_boxes.reserve(block.boxes.size());
  for (std::size_t i = 0; i < block.placements.size(); ++i) {
    PlacedGlyph p = block.placements[i];
    p.x += dx;
    p.baseline += dy;
    layout.placements.push_back(p);
    PixelRect b = block.boxes[i];
    b.x += dx;
    b.y += dy;
    layout.glyph_boxes.push_back(b);
  }
  return layout;
}

InsertResult insert_prompt(const imaging::Rgba8Image& image,
                           const std::string& prompt, const TypoParams& params,
                           const FontFace& font) {
  image.validate();
  TextLayout layout = layout_text(prompt, params, image.width, image.height, font);

  InsertResult result;
  result.altered = image;
  result.mask.width = image.width;
  result.mask.height = image.height;
  result.mask.coverage.assign(
      static_cast<std::size_t>(image.width) * image.height, 0.0f);
  result.mask.font_px = layout.font_px;
  result.mask.transparency = params.transparency;
  result.mask.lines = layout.lines;
  result.layout = std::move(layout);

  if (params.transparency == 0) {
    return result;  // fully invisible: identity image, empty mask
  }

  // Mean of the original pixels under the block drives the contrast offset.
  const PixelRect& bb = result.layout.block_box;
  double mean[3] = {0, 0, 0};
  std::size_t count = 0;
  for (int yy = bb.y; yy < bb.y + bb.h; ++yy) {
    for (int xx = bb.x; xx < bb.x + bb.w; ++xx) {
      const std::uint8_t* p = image.at(xx, yy);
      mean[0] += p[0];
      mean[1] += p[1];
      mean[2] += p[2];
      ++count;
    }
  }
  for (double& m : mean) m /= static_cast<double>(count);

  const double k = params.contrast / 5.0;
  double glyph_color[3];
  for (int ch = 0; ch < 3; ++ch) {
    glyph_color[ch] =
        std::clamp(mean[ch] + (params.color[ch] - mean[ch]) * k, 0.0, 255.0);
  }

  const double alpha = params.transparency / 255.0;
  for (std::size_t gi = 0; gi < result.layout.placements.size(); ++gi) {
    const PlacedGlyph& pg = result.layout.placements[gi];
    const GlyphBitmap& bmp = font.raster(pg.glyph, result.layout.font_px);
    for (int row = 0; row < bmp.height; ++row) {
      const int yy = pg.baseline + bmp.top + row;
      if (yy < 0 || yy >= static_cast<int>(image.height)) continue;
      for (int col = 0; col < bmp.width; ++col) {
        if (!bmp.coverage[static_cast<std::size_t>(row) * bmp.width + col]) {
          continue;
        }
        const int xx = pg.x + bmp.left + col;
        if (xx < 0 || xx >= static_cast<int>(image.width)) continue;
        const double c = 1.0;
        // Blend against the original pixel so overlapping glyphs compose
        // idempotently.
        const std::uint8_t* base = image.at(xx, yy);
        std::uint8_t* out = result.altered.at(xx, yy);
        for (int ch = 0; ch < 3; ++ch) {
          double v = base[ch] + c * alpha * (glyph_color[ch] - base[ch]);
          out[ch] = static_cast<std::uint8_t>(
              std::clamp(std::floor(v + 0.5), 0.0, 255.0));
        }
        float& m =
            result.mask.coverage[static_cast<std::size_t>(yy) * image.width + xx];
        m = std::max(m, static_cast<float>(c));
      }
    }
  }
  return result;
}

}  // namespace typojack::typography
