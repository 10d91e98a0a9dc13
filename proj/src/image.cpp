#include "typojack/image.hpp"

#include <png.h>

#include <cerrno>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <memory>

namespace typojack::imaging {

Rgba8Image::Rgba8Image(std::uint32_t w, std::uint32_t h)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 4, 0) {
  if (w == 0 || h == 0) {
    raise(Errc::invalid_argument, "image dimensions must be positive");
  }
}

Rgba8Image Rgba8Image::filled(std::uint32_t w, std::uint32_t h,
                              std::array<std::uint8_t, 4> rgba) {
  Rgba8Image img(w, h);
  for (std::size_t i = 0; i < img.pixels.size(); i += 4) {
    img.pixels[i + 0] = rgba[0];
    img.pixels[i + 1] = rgba[1];
    img.pixels[i + 2] = rgba[2];
    img.pixels[i + 3] = rgba[3];
  }
  return img;
}

void Rgba8Image::set(std::uint32_t x, std::uint32_t y,
                     std::array<std::uint8_t, 4> rgba) {
  std::uint8_t* p = at(x, y);
  p[0] = rgba[0];
  p[1] = rgba[1];
  p[2] = rgba[2];
  p[3] = rgba[3];
}

std::uint64_t Rgba8Image::content_hash() const {
  std::uint64_t h = fnv1a64(&width, sizeof(width));
  h = mix_seed(h, fnv1a64(&height, sizeof(height)));
  return mix_seed(h, fnv1a64(pixels.data(), pixels.size()));
}

void Rgba8Image::validate() const {
  if (width == 0 || height == 0) {
    raise(Errc::invalid_argument, "image dimensions must be positive");
  }
  if (pixels.size() != static_cast<std::size_t>(width) * height * 4) {
    raise(Errc::invalid_argument, "pixel buffer length != width*height*4");
  }
}

namespace {

struct MemReader {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t pos;
};

void mem_read(png_structp png, png_bytep out, png_size_t count) {
  auto* r = static_cast<MemReader*>(png_get_io_ptr(png));
  if (r->pos + count > r->size) {
    png_error(png, "truncated stream");
  }
  std::memcpy(out, r->data + r->pos, count);
  r->pos += count;
}

void mem_write(png_structp png, png_bytep data, png_size_t count) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + count);
}

void mem_flush(png_structp) {}

}  // namespace

Rgba8Image decode_png(const std::uint8_t* data, std::size_t size) {
  if (size < 8 || png_sig_cmp(data, 0, 8) != 0) {
    raise(Errc::decode_error, "not a PNG stream");
  }
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) raise(Errc::decode_error, "png reader allocation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    raise(Errc::decode_error, "png info allocation failed");
  }

  Rgba8Image img;
  std::vector<png_bytep> rows;
  MemReader reader{data, size, 0};

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    raise(Errc::decode_error, "corrupt or unsupported PNG");
  }

  png_set_read_fn(png, &reader, mem_read);
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);

  // Normalize everything to 8-bit RGBA.
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_GRAY ||
      color == PNG_COLOR_TYPE_PALETTE) {
    png_set_filler(png, 0xFF, PNG_FILLER_AFTER);
  }
  png_read_update_info(png, info);

  img.width = w;
  img.height = h;
  img.pixels.resize(static_cast<std::size_t>(w) * h * 4);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) {
    rows[y] = img.pixels.data() + static_cast<std::size_t>(y) * w * 4;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

std::vector<std::uint8_t> encode_png(const Rgba8Image& image) {
  image.validate();
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) raise(Errc::io_error, "png writer allocation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    raise(Errc::io_error, "png info allocation failed");
  }

  std::vector<std::uint8_t> out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    raise(Errc::io_error, "png encoding failed");
  }

  png_set_write_fn(png, &out, mem_write, mem_flush);
  png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGBA,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::uint32_t y = 0; y < image.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(
                           image.pixels.data() +
                           static_cast<std::size_t>(y) * image.width * 4));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

Rgba8Image load_png(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) {
    raise(Errc::io_error, "cannot open '" + path + "': " + std::strerror(errno));
  }
  std::vector<std::uint8_t> bytes;
  std::uint8_t buf[65536];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), f)) > 0) {
    bytes.insert(bytes.end(), buf, buf + n);
  }
  bool read_error = std::ferror(f) != 0;
  std::fclose(f);
  if (read_error) raise(Errc::io_error, "read failed for '" + path + "'");
  return decode_png(bytes.data(), bytes.size());
}

void save_png(const Rgba8Image& image, const std::string& path) {
  std::vector<std::uint8_t> bytes = encode_png(image);
  std::filesystem::path parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(parent, ec);
  }
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) {
    raise(Errc::io_error, "cannot write '" + path + "': " + std::strerror(errno));
  }
  std::size_t written = std::fwrite(bytes.data(), 1, bytes.size(), f);
  std::fclose(f);
  if (written != bytes.size()) {
    raise(Errc::io_error, "short write for '" + path + "'");
  }
}

}  // namespace typojack::imaging
