#pragma once

#include <memory>
#include <string>

#include "typojack/image.hpp"

namespace typojack::perceptual {

/// Perceptual distance between two same-sized images. distance(I, I) == 0 and
/// distance >= 0 for every implementation; the default implementation stays
/// in [0, 1]. Implementations must be safe to call from concurrent threads.
class DistanceProvider {
 public:
  virtual ~DistanceProvider() = default;
  virtual double distance(const imaging::Rgba8Image& a,
                          const imaging::Rgba8Image& b) const = 0;
  virtual std::string name() const = 0;
};

/// Deterministic default: luminance pyramid (3 dyadic levels), per level the
/// mean absolute difference of 8x8 tile statistics (mean and standard
/// deviation), normalized by 255; the final value is the mean over levels
/// clamped to [0, 1]. Symmetric by construction.
class MultiscaleTileDistance final : public DistanceProvider {
 public:
  double distance(const imaging::Rgba8Image& a,
                  const imaging::Rgba8Image& b) const override;
  std::string name() const override { return "default_multiscale"; }
};

/// Remote LPIPS scorer over HTTP: POST with two base64 PNG fields, response
/// carries a single real `distance`.
class RemoteLpipsDistance final : public DistanceProvider {
 public:
  /// endpoint: http://host[:port][/path]; the path defaults to "/".
  explicit RemoteLpipsDistance(const std::string& endpoint,
                               double timeout_s = 30.0);
  double distance(const imaging::Rgba8Image& a,
                  const imaging::Rgba8Image& b) const override;
  std::string name() const override { return "remote_lpips"; }

 private:
  std::string host_;
  int port_;
  std::string path_;
  double timeout_s_;
};

/// Dimension-checked entry point.
double perceptual_distance(const imaging::Rgba8Image& a,
                           const imaging::Rgba8Image& b,
                           const DistanceProvider& provider);

}  // namespace typojack::perceptual
