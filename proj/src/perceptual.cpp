#include <cmath>
#include <vector>

#define CPPHTTPLIB_OPENSSL_SUPPORT_DISABLED
#include <httplib.h>
#include <json.hpp>

#include "typojack/b64.hpp"
#include "typojack/perceptual.hpp"

namespace typojack::perceptual {

namespace {

struct LumaPlane {
  std::size_t w = 0;
  std::size_t h = 0;
  std::vector<double> v;  // [0, 255]
};

LumaPlane to_luma(const imaging::Rgba8Image& img) {
  LumaPlane plane;
  plane.w = img.width;
  plane.h = img.height;
  plane.v.resize(plane.w * plane.h);
  for (std::size_t i = 0; i < plane.v.size(); ++i) {
    const std::uint8_t* p = img.pixels.data() + i * 4;
    plane.v[i] = imaging::luminance(p[0], p[1], p[2]);
  }
  return plane;
}

// 2x2 box downsample; odd edges average the available pixels.
LumaPlane half(const LumaPlane& in) {
  LumaPlane out;
  out.w = (in.w + 1) / 2;
  out.h = (in.h + 1) / 2;
  out.v.resize(out.w * out.h);
  for (std::size_t y = 0; y < out.h; ++y) {
    for (std::size_t x = 0; x < out.w; ++x) {
      double sum = 0;
      int n = 0;
      for (std::size_t dy = 0; dy < 2; ++dy) {
        for (std::size_t dx = 0; dx < 2; ++dx) {
          std::size_t sx = 2 * x + dx;
          std::size_t sy = 2 * y + dy;
          if (sx < in.w && sy < in.h) {
            sum += in.v[sy * in.w + sx];
            ++n;
          }
        }
      }
      out.v[y * out.w + x] = sum / n;
    }
  }
  return out;
}

// Mean over 8x8 tiles of (|d mean| + |d std|) / 255; partial edge tiles use
// their actual pixel counts.
double tile_stat_diff(const LumaPlane& a, const LumaPlane& b) {
  const std::size_t tiles_x = (a.w + 7) / 8;
  const std::size_t tiles_y = (a.h + 7) / 8;
  double acc = 0;
  for (std::size_t ty = 0; ty < tiles_y; ++ty) {
    for (std::size_t tx = 0; tx < tiles_x; ++tx) {
      double sum_a = 0, sum_b = 0, sq_a = 0, sq_b = 0;
      int n = 0;
      for (std::size_t y = ty * 8; y < std::min(a.h, ty * 8 + 8); ++y) {
        for (std::size_t x = tx * 8; x < std::min(a.w, tx * 8 + 8); ++x) {
          double va = a.v[y * a.w + x];
          double vb = b.v[y * b.w + x];
          sum_a += va;
          sum_b += vb;
          sq_a += va * va;
          sq_b += vb * vb;
          ++n;
        }
      }
      double mean_a = sum_a / n, mean_b = sum_b / n;
      double var_a = std::max(0.0, sq_a / n - mean_a * mean_a);
      double var_b = std::max(0.0, sq_b / n - mean_b * mean_b);
      acc += (std::abs(mean_a - mean_b) +
              std::abs(std::sqrt(var_a) - std::sqrt(var_b))) /
             255.0;
    }
  }
  return acc / (tiles_x * tiles_y);
}

}  // namespace

double MultiscaleTileDistance::distance(const imaging::Rgba8Image& a,
                                        const imaging::Rgba8Image& b) const {
  LumaPlane pa = to_luma(a);
  LumaPlane pb = to_luma(b);
  double acc = 0;
  constexpr int kLevels = 3;
  for (int level = 0; level < kLevels; ++level) {
    acc += tile_stat_diff(pa, pb);
    if (level + 1 < kLevels) {
      pa = half(pa);
      pb = half(pb);
    }
  }
  return std::clamp(acc / kLevels, 0.0, 1.0);
}

RemoteLpipsDistance::RemoteLpipsDistance(const std::string& endpoint,
                                         double timeout_s)
    : port_(80), timeout_s_(timeout_s) {
  std::string rest = endpoint;
  if (rest.rfind("http://", 0) == 0) rest = rest.substr(7);
  std::size_t slash = rest.find('/');
  std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : rest.substr(slash);
  std::size_t colon = hostport.find(':');
  if (colon == std::string::npos) {
    host_ = hostport;
  } else {
    host_ = hostport.substr(0, colon);
    port_ = std::stoi(hostport.substr(colon + 1));
  }
  if (host_.empty()) {
    raise(Errc::config_error, "lpips endpoint '" + endpoint + "' has no host");
  }
}

double RemoteLpipsDistance::distance(const imaging::Rgba8Image& a,
                                     const imaging::Rgba8Image& b) const {
  nlohmann::json body = {
      {"image_a", b64_encode(imaging::encode_png(a))},
      {"image_b", b64_encode(imaging::encode_png(b))},
  };
  httplib::Client client(host_, port_);
  client.set_connection_timeout(static_cast<time_t>(timeout_s_), 0);
  client.set_read_timeout(static_cast<time_t>(timeout_s_), 0);
  auto res = client.Post(path_, body.dump(), "application/json");
  if (!res) {
    raise(Errc::remote_unavailable,
          "lpips endpoint unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    raise(Errc::remote_unavailable,
          "lpips endpoint returned status " + std::to_string(res->status));
  }
  nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
  if (reply.is_discarded() || !reply.contains("distance") ||
      !reply["distance"].is_number()) {
    raise(Errc::remote_unavailable, "lpips reply missing numeric 'distance'");
  }
  double d = reply["distance"].get<double>();
  if (!(d >= 0.0)) {
    raise(Errc::remote_unavailable, "lpips reply distance is negative");
  }
  return d;
}

double perceptual_distance(const imaging::Rgba8Image& a,
                           const imaging::Rgba8Image& b,
                           const DistanceProvider& provider) {
  if (!a.same_size(b)) {
    raise(Errc::dimension_mismatch, "images differ in size");
  }
  return provider.distance(a, b);
}

}  // namespace typojack::perceptual
