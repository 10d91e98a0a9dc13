#include <algorithm>
#include <cmath>
#include <mutex>

#include "typojack/semantics.hpp"

namespace typojack::semantics {

double EmbeddingVector::norm() const {
  double acc = 0;
  for (double v : values) acc += v * v;
  return std::sqrt(acc);
}

double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v) {
  if (u.dim() == 0 || u.dim() != v.dim()) {
    raise(Errc::dimension_mismatch, "embedding dimensions differ");
  }
  double nu = u.norm();
  double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) {
    raise(Errc::zero_vector, "cosine similarity of a zero vector");
  }
  double dot = 0;
  for (std::size_t i = 0; i < u.dim(); ++i) dot += u.values[i] * v.values[i];
  return std::clamp(dot / (nu * nv), -1.0, 1.0);
}

double reconstruction_loss(const std::string& prompt,
                           const std::vector<std::string>& captions,
                           const EmbedFn& embed) {
  if (captions.empty()) {
    raise(Errc::empty_caption_set, "no captions to score");
  }
  EmbeddingVector p = embed(prompt);
  double acc = 0;
  for (const std::string& caption : captions) {
    acc += cosine_similarity(p, embed(caption));
  }
  return -acc / static_cast<double>(captions.size());
}

LossBreakdown combined_loss(double reconstruction, double stealth,
                            double stealth_weight) {
  if (stealth_weight < 0.0) {
    raise(Errc::negative_weight, "stealth weight must be non-negative");
  }
  if (stealth < 0.0) {
    raise(Errc::negative_weight, "stealth term must be non-negative");
  }
  LossBreakdown out;
  out.reconstruction = reconstruction;
  out.stealth = stealth;
  out.stealth_weight = stealth_weight;
  out.total = reconstruction + stealth_weight * stealth;
  return out;
}

EmbeddingVector EmbeddingCache::get_or_compute(const std::string& text,
                                               const EmbedFn& embed) {
  {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(text);
    if (it != entries_.end()) return it->second;
  }
  EmbeddingVector v = embed(text);
  std::unique_lock lock(mutex_);
  return entries_.emplace(text, std::move(v)).first->second;
}

std::size_t EmbeddingCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

}  // namespace typojack::semantics
