#pragma once

#include <functional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "typojack/common.hpp"

namespace typojack::semantics {

/// Fixed-length real vector from an embedding provider. Providers never
/// return the zero vector.
struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
  double norm() const;
};

using EmbedFn = std::function<EmbeddingVector(const std::string&)>;

/// dot(u, v) / (|u| |v|), clamped into [-1, 1] against rounding.
double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v);

/// Negative mean cosine similarity between the prompt embedding and each
/// caption embedding; -1 when every caption embeds identically to the prompt.
double reconstruction_loss(const std::string& prompt,
                           const std::vector<std::string>& captions,
                           const EmbedFn& embed);

struct LossBreakdown {
  double reconstruction = 0.0;  // in [-1, 1]
  double stealth = 0.0;         // >= 0
  double stealth_weight = 0.0;  // >= 0
  double total = 0.0;           // reconstruction + stealth_weight * stealth
};

LossBreakdown combined_loss(double reconstruction, double stealth,
                            double stealth_weight);

/// Exact-string keyed embedding cache; concurrent reads, exclusive insertion.
class EmbeddingCache {
 public:
  EmbeddingVector get_or_compute(const std::string& text, const EmbedFn& embed);
  std::size_t size() const;

 private:
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, EmbeddingVector> entries_;
};

}  // namespace typojack::semantics
