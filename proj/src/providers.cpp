#include <algorithm>
#include <cmath>
#include <random>

#include "typojack/providers.hpp"

namespace typojack::providers {

RequestGate::RequestGate(int max_in_flight) : max_(std::max(1, max_in_flight)) {}

void RequestGate::acquire() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [&] { return in_flight_ < max_; });
  ++in_flight_;
}

void RequestGate::release() {
  {
    std::lock_guard lock(mutex_);
    --in_flight_;
  }
  cv_.notify_one();
}

double synthetic_legibility(const imaging::Rgba8Image& image,
                            const typography::CoverageMask& mask) {
  if (mask.width != image.width || mask.height != image.height) {
    raise(Errc::dimension_mismatch, "mask and image dimensions differ");
  }
  const int w = static_cast<int>(image.width);
  const int h = static_cast<int>(image.height);

  // Ring = pixels within Chebyshev distance 3 of the text, minus the text.
  std::vector<std::uint8_t> is_text(static_cast<std::size_t>(w) * h, 0);
  std::vector<std::uint8_t> ring(static_cast<std::size_t>(w) * h, 0);
  bool any_text = false;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (mask.at(x, y) > 0.0f) {
        is_text[static_cast<std::size_t>(y) * w + x] = 1;
        any_text = true;
      }
    }
  }
  if (!any_text) return 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!is_text[static_cast<std::size_t>(y) * w + x]) continue;
      for (int dy = -3; dy <= 3; ++dy) {
        for (int dx = -3; dx <= 3; ++dx) {
          int nx = x + dx;
          int ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          ring[static_cast<std::size_t>(ny) * w + nx] = 1;
        }
      }
    }
  }

  double ring_sum = 0;
  std::size_t ring_count = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (ring[i] && !is_text[i]) {
        const std::uint8_t* p = image.at(x, y);
        ring_sum += imaging::luminance(p[0], p[1], p[2]);
        ++ring_count;
      }
    }
  }
  if (ring_count == 0) return 0.0;  // text covers the whole image
  const double ring_mean = ring_sum / static_cast<double>(ring_count);

  double diff_sum = 0;
  std::size_t text_count = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!is_text[static_cast<std::size_t>(y) * w + x]) continue;
      const std::uint8_t* p = image.at(x, y);
      diff_sum += std::abs(imaging::luminance(p[0], p[1], p[2]) - ring_mean);
      ++text_count;
    }
  }
  const double contrast_term = diff_sum / static_cast<double>(text_count) / 255.0;
  const double size_term = std::min(1.0, mask.font_px / 24.0);
  const double opacity_term = mask.transparency / 255.0;
  return std::clamp(contrast_term * size_term * opacity_term, 0.0, 1.0);
}

std::string synthetic_caption(const imaging::Rgba8Image& image,
                              const typography::CoverageMask& mask,
                              const std::vector<std::string>& injected_lines,
                              std::uint64_t seed) {
  if (mask.width != image.width || mask.height != image.height) {
    raise(Errc::dimension_mismatch, "mask and image dimensions differ");
  }
  if (!mask.any()) return kSceneStub;

  const double legibility = synthetic_legibility(image, mask);

  std::string injected;
  for (const std::string& line : injected_lines) {
    if (!injected.empty()) injected += ' ';
    injected += line;
  }

  std::mt19937_64 rng(mix_seed(seed, image.content_hash()));
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::string corrupted = injected;
  for (char& c : corrupted) {
    if (uniform(rng) < 1.0 - legibility) c = '#';
  }
  return std::string(kSceneTextPrefix) + corrupted;
}

std::string SyntheticCaptioner::caption(const CaptionRequest& request) {
  metrics_.requests.fetch_add(1);
  if (request.image == nullptr) {
    raise(Errc::invalid_argument, "caption request carries no image");
  }
  if (request.mask == nullptr) {
    return kSceneStub;  // nothing rendered, nothing to read
  }
  return synthetic_caption(*request.image, *request.mask, request.mask->lines,
                           mix_seed(seed_, request.salt));
}

semantics::EmbeddingVector TrigramEmbedder::embed(const std::string& text) {
  metrics_.requests.fetch_add(1);
  if (text.empty()) {
    raise(Errc::invalid_argument, "cannot embed empty text");
  }
  std::string wrapped;
  wrapped.reserve(text.size() + 2);
  wrapped.push_back('\x02');
  wrapped += text;
  wrapped.push_back('\x03');

  semantics::EmbeddingVector v;
  v.values.assign(kDim, 0.0);
  for (std::size_t i = 0; i + 3 <= wrapped.size(); ++i) {
    std::uint64_t h = fnv1a64(wrapped.data() + i, 3);
    v.values[h % kDim] += 1.0;
  }
  double norm = v.norm();
  for (double& x : v.values) x /= norm;
  return v;
}

}  // namespace typojack::providers
