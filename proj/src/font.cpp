#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "typojack/typography.hpp"

// Minimal TrueType reader: glyf/loca outlines, cmap format 4, hmtx advances.
// Rendering is monochrome (pixel-center sampling, nonzero winding) so masks
// and downstream losses are exactly reproducible.

namespace typojack::typography {

namespace {

struct Reader {
  const std::uint8_t* data;
  std::size_t size;

  std::uint8_t u8(std::size_t off) const {
    if (off >= size) raise(Errc::decode_error, "font table out of range");
    return data[off];
  }
  std::uint16_t u16(std::size_t off) const {
    return static_cast<std::uint16_t>(u8(off) << 8 | u8(off + 1));
  }
  std::int16_t i16(std::size_t off) const {
    return static_cast<std::int16_t>(u16(off));
  }
  std::uint32_t u32(std::size_t off) const {
    return (static_cast<std::uint32_t>(u16(off)) << 16) | u16(off + 2);
  }
};

struct OutlinePoint {
  double x = 0;
  double y = 0;
  bool on_curve = true;
};

using Contour = std::vector<OutlinePoint>;

struct Segment {
  double x0, y0, x1, y1;
};

double f2dot14(std::int16_t v) { return v / 16384.0; }

}  // namespace

struct FontFace::Impl {
  std::vector<std::uint8_t> bytes;
  Reader r{nullptr, 0};

  std::size_t glyf_off = 0, glyf_len = 0;
  std::size_t loca_off = 0;
  std::size_t hmtx_off = 0;
  std::size_t cmap_sub_off = 0;  // format-4 subtable
  bool long_loca = false;
  int upm = 1000;
  int ascent_ = 0, descent_ = 0, line_gap_ = 0;
  std::uint16_t num_glyphs = 0;
  std::uint16_t num_hmetrics = 0;

  mutable std::mutex cache_mutex;
  mutable std::unordered_map<std::uint64_t, GlyphBitmap> cache;

  void parse();
  std::size_t glyph_offset(std::uint16_t glyph, std::size_t* next) const;
  void load_outline(std::uint16_t glyph, std::vector<Contour>& out, int depth,
                    double a, double b, double c, double d, double dx,
                    double dy) const;
  GlyphBitmap rasterize(std::uint16_t glyph, int pixel_size) const;
};

void FontFace::Impl::parse() {
  r = Reader{bytes.data(), bytes.size()};
  std::uint32_t sfnt = r.u32(0);
  if (sfnt != 0x00010000 && sfnt != 0x74727565) {
    raise(Errc::decode_error, "not a TrueType font (glyf outlines required)");
  }
  std::uint16_t num_tables = r.u16(4);
  std::size_t head = 0, maxp = 0, hhea = 0, cmap = 0;
  for (std::uint16_t i = 0; i < num_tables; ++i) {
    std::size_t rec = 12 + i * 16;
    char tag[5] = {0};
    std::memcpy(tag, bytes.data() + rec, 4);
    std::uint32_t off = r.u32(rec + 8);
    std::uint32_t len = r.u32(rec + 12);
    std::string t(tag);
    if (t == "head") head = off;
    else if (t == "maxp") maxp = off;
    else if (t == "hhea") hhea = off;
    else if (t == "hmtx") hmtx_off = off;
    else if (t == "cmap") cmap = off;
    else if (t == "loca") loca_off = off;
    else if (t == "glyf") { glyf_off = off; glyf_len = len; }
  }
  if (!head || !maxp || !hhea || !hmtx_off || !cmap || !loca_off || !glyf_off) {
    raise(Errc::decode_error, "font missing a required table");
  }

  upm = r.u16(head + 18);
  if (upm == 0) raise(Errc::decode_error, "font unitsPerEm is zero");
  long_loca = r.i16(head + 50) != 0;

  num_glyphs = r.u16(maxp + 4);
  ascent_ = r.i16(hhea + 4);
  descent_ = r.i16(hhea + 6);
  line_gap_ = r.i16(hhea + 8);
  num_hmetrics = r.u16(hhea + 34);

  // Prefer a Windows BMP (3,1) format-4 subtable, fall back to Unicode (0,*).
  std::uint16_t n_sub = r.u16(cmap + 2);
  std::size_t best = 0;
  for (std::uint16_t i = 0; i < n_sub; ++i) {
    std::size_t rec = cmap + 4 + i * 8;
    std::uint16_t platform = r.u16(rec);
    std::uint32_t off = r.u32(rec + 4);
    if (r.u16(cmap + off) != 4) continue;
    if (platform == 3 && r.u16(rec + 2) == 1) {
      best = cmap + off;
      break;
    }
    if (platform == 0 && best == 0) best = cmap + off;
  }
  if (best == 0) raise(Errc::decode_error, "font has no format-4 cmap");
  cmap_sub_off = best;
}

std::size_t FontFace::Impl::glyph_offset(std::uint16_t glyph,
                                         std::size_t* next) const {
  if (glyph >= num_glyphs) raise(Errc::decode_error, "glyph id out of range");
  std::size_t a, b;
  if (long_loca) {
    a = r.u32(loca_off + glyph * 4);
    b = r.u32(loca_off + glyph * 4 + 4);
  } else {
    a = static_cast<std::size_t>(r.u16(loca_off + glyph * 2)) * 2;
    b = static_cast<std::size_t>(r.u16(loca_off + glyph * 2 + 2)) * 2;
  }
  *next = b;
  return a;
}

void FontFace::Impl::load_outline(std::uint16_t glyph,
                                  std::vector<Contour>& out, int depth,
                                  double a, double b, double c, double d,
                                  double dx, double dy) const {
  if (depth > 5) return;  // malformed recursion guard
  std::size_t end;
  std::size_t off = glyph_offset(glyph, &end);
  if (off == end) return;  // no outline (e.g. space)
  std::size_t g = glyf_off + off;
  int n_contours = r.i16(g);

  if (n_contours >= 0) {
    std::vector<std::uint16_t> ends(n_contours);
    std::size_t p = g + 10;
    for (int i = 0; i < n_contours; ++i) {
      ends[i] = r.u16(p);
      p += 2;
    }
    std::uint16_t n_points = n_contours ? ends.back() + 1 : 0;
    std::uint16_t instr_len = r.u16(p);
    p += 2 + instr_len;

    std::vector<std::uint8_t> flags;
    flags.reserve(n_points);
    while (flags.size() < n_points) {
      std::uint8_t f = r.u8(p++);
      flags.push_back(f);
      if (f & 0x08) {
        std::uint8_t rep = r.u8(p++);
        for (std::uint8_t k = 0; k < rep; ++k) flags.push_back(f);
      }
    }

    std::vector<int> xs(n_points), ys(n_points);
    int v = 0;
    for (std::uint16_t i = 0; i < n_points; ++i) {
      std::uint8_t f = flags[i];
      if (f & 0x02) {
        int delta = r.u8(p++);
        v += (f & 0x10) ? delta : -delta;
      } else if (!(f & 0x10)) {
        v += r.i16(p);
        p += 2;
      }
      xs[i] = v;
    }
    v = 0;
    for (std::uint16_t i = 0; i < n_points; ++i) {
      std::uint8_t f = flags[i];
      if (f & 0x04) {
        int delta = r.u8(p++);
        v += (f & 0x20) ? delta : -delta;
      } else if (!(f & 0x20)) {
        v += r.i16(p);
        p += 2;
      }
      ys[i] = v;
    }

    std::uint16_t start = 0;
    for (int ci = 0; ci < n_contours; ++ci) {
      Contour contour;
      for (std::uint16_t i = start; i <= ends[ci]; ++i) {
        double ux = xs[i], uy = ys[i];
        contour.push_back({a * ux + c * uy + dx, b * ux + d * uy + dy,
                           (flags[i] & 0x01) != 0});
      }
      if (contour.size() >= 2) out.push_back(std::move(contour));
      start = ends[ci] + 1;
    }
    return;
  }

  // Composite glyph: accumulate transformed components.
  std::size_t p = g + 10;
  while (true) {
    std::uint16_t flags = r.u16(p);
    std::uint16_t comp = r.u16(p + 2);
    p += 4;
    double cdx = 0, cdy = 0;
    if (flags & 0x0001) {
      if (flags & 0x0002) {
        cdx = r.i16(p);
        cdy = r.i16(p + 2);
      }
      p += 4;
    } else {
      if (flags & 0x0002) {
        cdx = static_cast<std::int8_t>(r.u8(p));
        cdy = static_cast<std::int8_t>(r.u8(p + 1));
      }
      p += 2;
    }
    double ca = 1, cb = 0, cc = 0, cd = 1;
    if (flags & 0x0008) {
      ca = cd = f2dot14(r.i16(p));
      p += 2;
    } else if (flags & 0x0040) {
      ca = f2dot14(r.i16(p));
      cd = f2dot14(r.i16(p + 2));
      p += 4;
    } else if (flags & 0x0080) {
      ca = f2dot14(r.i16(p));
      cb = f2dot14(r.i16(p + 2));
      cc = f2dot14(r.i16(p + 4));
      cd = f2dot14(r.i16(p + 6));
      p += 8;
    }
    // Compose child transform with the incoming one.
    double na = a * ca + c * cb;
    double nb = b * ca + d * cb;
    double nc = a * cc + c * cd;
    double nd = b * cc + d * cd;
    double ndx = a * cdx + c * cdy + dx;
    double ndy = b * cdx + d * cdy + dy;
    load_outline(comp, out, depth + 1, na, nb, nc, nd, ndx, ndy);
    if (!(flags & 0x0020)) break;
  }
}

namespace {

// Expand TrueType on/off-curve points into flattened line segments in device
// space (y down). Quadratics are split by control-net length.
void flatten_contour(const Contour& contour, double scale,
                     std::vector<Segment>& segs) {
  const std::size_t n = contour.size();
  if (n < 2) return;

  auto device = [&](const OutlinePoint& p) {
    return std::pair<double, double>{p.x * scale, -p.y * scale};
  };
  auto midpoint = [](const OutlinePoint& p, const OutlinePoint& q) {
    return OutlinePoint{(p.x + q.x) / 2, (p.y + q.y) / 2, true};
  };

  // Normalized ring of points starting at an on-curve point.
  std::vector<OutlinePoint> ring;
  std::size_t first_on = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (contour[i].on_curve) {
      first_on = i;
      break;
    }
  }
  if (first_on == n) {
    ring.push_back(midpoint(contour[0], contour[n - 1]));
    for (std::size_t i = 0; i < n; ++i) ring.push_back(contour[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      ring.push_back(contour[(first_on + i) % n]);
    }
  }
  ring.push_back(ring[0]);  // close

  auto emit_line = [&](const OutlinePoint& p, const OutlinePoint& q) {
    auto [x0, y0] = device(p);
    auto [x1, y1] = device(q);
    if (y0 != y1) segs.push_back({x0, y0, x1, y1});
  };
  auto emit_quad = [&](const OutlinePoint& p, const OutlinePoint& ctrl,
                       const OutlinePoint& q) {
    auto [x0, y0] = device(p);
    auto [cx, cy] = device(ctrl);
    auto [x1, y1] = device(q);
    double len = std::hypot(cx - x0, cy - y0) + std::hypot(x1 - cx, y1 - cy);
    int steps = std::clamp(static_cast<int>(std::ceil(len / 3.0)), 1, 32);
    double px = x0, py = y0;
    for (int s = 1; s <= steps; ++s) {
      double t = static_cast<double>(s) / steps;
      double u = 1.0 - t;
      double nx = u * u * x0 + 2 * u * t * cx + t * t * x1;
      double ny = u * u * y0 + 2 * u * t * cy + t * t * y1;
      if (py != ny) segs.push_back({px, py, nx, ny});
      px = nx;
      py = ny;
    }
  };

  std::size_t i = 0;
  while (i + 1 < ring.size()) {
    const OutlinePoint& cur = ring[i];
    const OutlinePoint& next = ring[i + 1];
    if (next.on_curve) {
      emit_line(cur, next);
      i += 1;
      continue;
    }
    // `next` is a control point; the segment ends at the following on-curve
    // point or at the implied midpoint of two consecutive controls.
    if (i + 2 < ring.size()) {
      const OutlinePoint& after = ring[i + 2];
      if (after.on_curve) {
        emit_quad(cur, next, after);
        i += 2;
      } else {
        OutlinePoint implied = midpoint(next, after);
        emit_quad(cur, next, implied);
        ring[i + 1] = implied;  // continue from the implied on-curve point
        i += 1;
      }
    } else {
      emit_line(cur, next);
      i += 1;
    }
  }
}

}  // namespace

GlyphBitmap FontFace::Impl::rasterize(std::uint16_t glyph,
                                      int pixel_size) const {
  std::vector<Contour> contours;
  load_outline(glyph, contours, 0, 1, 0, 0, 1, 0, 0);

  GlyphBitmap bmp;
  if (contours.empty()) return bmp;

  double scale = static_cast<double>(pixel_size) / upm;
  std::vector<Segment> segs;
  for (const Contour& c : contours) flatten_contour(c, scale, segs);
  if (segs.empty()) return bmp;

  double minx = segs[0].x0, maxx = segs[0].x0;
  double miny = segs[0].y0, maxy = segs[0].y0;
  for (const Segment& s : segs) {
    minx = std::min({minx, s.x0, s.x1});
    maxx = std::max({maxx, s.x0, s.x1});
    miny = std::min({miny, s.y0, s.y1});
    maxy = std::max({maxy, s.y0, s.y1});
  }

  int x0 = static_cast<int>(std::floor(minx));
  int y0 = static_cast<int>(std::floor(miny));
  int w = static_cast<int>(std::ceil(maxx)) - x0 + 1;
  int h = static_cast<int>(std::ceil(maxy)) - y0 + 1;
  if (w <= 0 || h <= 0) return bmp;

  bmp.left = x0;
  bmp.top = y0;
  bmp.width = w;
  bmp.height = h;
  bmp.coverage.assign(static_cast<std::size_t>(w) * h, 0);

  std::vector<std::pair<double, int>> crossings;
  for (int row = 0; row < h; ++row) {
    double sy = y0 + row + 0.5;
    crossings.clear();
    for (const Segment& s : segs) {
      double lo = std::min(s.y0, s.y1);
      double hi = std::max(s.y0, s.y1);
      if (sy < lo || sy >= hi) continue;
      double t = (sy - s.y0) / (s.y1 - s.y0);
      double x = s.x0 + t * (s.x1 - s.x0);
      crossings.emplace_back(x, s.y1 > s.y0 ? 1 : -1);
    }
    if (crossings.empty()) continue;
    std::sort(crossings.begin(), crossings.end());
    int winding = 0;
    for (std::size_t k = 0; k + 1 <= crossings.size(); ++k) {
      winding += crossings[k].second;
      if (winding == 0 || k + 1 >= crossings.size()) continue;
      double span_a = crossings[k].first;
      double span_b = crossings[k + 1].first;
      int px_first = static_cast<int>(std::ceil(span_a - 0.5));
      int px_last = static_cast<int>(std::ceil(span_b - 0.5)) - 1;
      px_first = std::max(px_first, x0);
      px_last = std::min(px_last, x0 + w - 1);
      for (int px = px_first; px <= px_last; ++px) {
        bmp.coverage[static_cast<std::size_t>(row) * w + (px - x0)] = 1;
      }
    }
  }

  // Trim to the actually covered pixels so glyph boxes are tight.
  int tx0 = w, ty0 = h, tx1 = -1, ty1 = -1;
  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < w; ++col) {
      if (bmp.coverage[static_cast<std::size_t>(row) * w + col]) {
        tx0 = std::min(tx0, col);
        ty0 = std::min(ty0, row);
        tx1 = std::max(tx1, col);
        ty1 = std::max(ty1, row);
      }
    }
  }
  if (tx1 < 0) return GlyphBitmap{};  // everything thinner than a pixel

  GlyphBitmap tight;
  tight.left = x0 + tx0;
  tight.top = y0 + ty0;
  tight.width = tx1 - tx0 + 1;
  tight.height = ty1 - ty0 + 1;
  tight.coverage.assign(static_cast<std::size_t>(tight.width) * tight.height, 0);
  for (int row = 0; row < tight.height; ++row) {
    for (int col = 0; col < tight.width; ++col) {
      tight.coverage[static_cast<std::size_t>(row) * tight.width + col] =
          bmp.coverage[static_cast<std::size_t>(row + ty0) * w + (col + tx0)];
    }
  }
  return tight;
}

FontFace::FontFace() : impl_(std::make_unique<Impl>()) {}
FontFace::~FontFace() = default;

std::shared_ptr<const FontFace> FontFace::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::io_error, "cannot open font '" + path + "'");
  auto face = std::shared_ptr<FontFace>(new FontFace());
  face->impl_->bytes.assign(std::istreambuf_iterator<char>(in),
                            std::istreambuf_iterator<char>());
  if (face->impl_->bytes.size() < 12) {
    raise(Errc::decode_error, "font file too small");
  }
  face->impl_->parse();
  return face;
}

int FontFace::units_per_em() const { return impl_->upm; }
int FontFace::ascent() const { return impl_->ascent_; }
int FontFace::descent() const { return impl_->descent_; }
int FontFace::line_gap() const { return impl_->line_gap_; }

std::uint16_t FontFace::glyph_index(char32_t codepoint) const {
  const Reader& r = impl_->r;
  std::size_t sub = impl_->cmap_sub_off;
  if (codepoint > 0xFFFF) return 0;
  std::uint16_t seg_count = r.u16(sub + 6) / 2;
  std::size_t end_codes = sub + 14;
  std::size_t start_codes = end_codes + seg_count * 2 + 2;
  std::size_t id_deltas = start_codes + seg_count * 2;
  std::size_t id_ranges = id_deltas + seg_count * 2;

  for (std::uint16_t i = 0; i < seg_count; ++i) {
    std::uint16_t end = r.u16(end_codes + i * 2);
    if (codepoint > end) continue;
    std::uint16_t start = r.u16(start_codes + i * 2);
    if (codepoint < start) return 0;
    std::uint16_t delta = r.u16(id_deltas + i * 2);
    std::uint16_t range_off = r.u16(id_ranges + i * 2);
    if (range_off == 0) {
      return static_cast<std::uint16_t>((codepoint + delta) & 0xFFFF);
    }
    std::size_t addr =
        id_ranges + i * 2 + range_off + (codepoint - start) * 2;
    std::uint16_t g = r.u16(addr);
    if (g == 0) return 0;
    return static_cast<std::uint16_t>((g + delta) & 0xFFFF);
  }
  return 0;
}

int FontFace::advance_width(std::uint16_t glyph) const {
  const Impl& im = *impl_;
  if (im.num_hmetrics == 0) return im.upm / 2;
  std::uint16_t idx = std::min<std::uint16_t>(glyph, im.num_hmetrics - 1);
  return im.r.u16(im.hmtx_off + idx * 4);
}

const GlyphBitmap& FontFace::raster(std::uint16_t glyph,
                                    int pixel_size) const {
  std::uint64_t key =
      (static_cast<std::uint64_t>(glyph) << 32) | static_cast<std::uint32_t>(pixel_size);
  std::lock_guard<std::mutex> lock(impl_->cache_mutex);
  auto it = impl_->cache.find(key);
  if (it != impl_->cache.end()) return it->second;
  GlyphBitmap bmp = impl_->rasterize(glyph, pixel_size);
  return impl_->cache.emplace(key, std::move(bmp)).first->second;
}

}  // namespace typojack::typography
