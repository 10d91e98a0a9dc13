#pragma once

#include <string>
#include <vector>

#include "typojack/harness.hpp"
#include "typojack/perceptual.hpp"
#include "typojack/providers.hpp"
#include "typojack/tpe.hpp"

namespace typojack::placement {

struct Options {
  double stealth_weight = 10.0;
  int max_iters = 50;
  std::uint64_t seed = 0;
  // Stop once a trial's total reaches this value; -inf disables.
  double early_stop_total = -0.95;
  tpe::TpeOptions tpe;
};

/// The black-box objective one trial evaluates: render the prompt with the
/// candidate parameters, caption the altered image with every ensemble
/// member, and combine reconstruction and stealth terms.
struct Objective {
  const imaging::Rgba8Image* original = nullptr;
  std::string prompt;
  std::vector<providers::Captioner*> captioners;
  providers::Embedder* embedder = nullptr;
  const perceptual::DistanceProvider* distance = nullptr;
  const typography::FontFace* font = nullptr;
  double stealth_weight = 10.0;
  semantics::EmbeddingCache* cache = nullptr;  // optional

  semantics::LossBreakdown evaluate(const typography::TypoParams& params) const;
};

struct Result {
  typography::TypoParams best_params;
  imaging::Rgba8Image best_image;
  typography::CoverageMask best_mask;
  semantics::LossBreakdown best_loss;
  std::string prompt;
  std::vector<tpe::TrialRecord> trials;
  int iterations_run = 0;
  bool partial = false;
  std::string partial_reason;
};

/// Sequential suggest -> render -> caption -> score -> observe loop over the
/// typographic search space; returns the arg-min trial with its image
/// recomputed from scratch. Unrenderable draws are recorded with penalty loss
/// stealth_weight + 1 and never sent to captioners.
Result optimize_placement(const imaging::Rgba8Image& original,
                          const std::string& prompt,
                          const std::vector<providers::Captioner*>& captioners,
                          providers::Embedder& embedder,
                          const perceptual::DistanceProvider& distance,
                          const typography::FontFace& font,
                          const Options& options);

/// Deploys the optimized image for one victim episode and scores the outcome,
/// clamped to [0, 1].
double run_and_score(const Result& result, const harness::TaskSpec& task,
                     const harness::EpisodeContext& ctx,
                     const harness::ScoreFn& score, std::uint64_t seed);

}  // namespace typojack::placement
