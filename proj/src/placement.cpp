#include <algorithm>
#include <cmath>

#include "typojack/placement.hpp"

namespace typojack::placement {

semantics::LossBreakdown Objective::evaluate(
    const typography::TypoParams& params) const {
  typography::InsertResult render =
      typography::insert_prompt(*original, prompt, params, *font);

  std::vector<std::string> captions;
  captions.reserve(captioners.size());
  for (providers::Captioner* captioner : captioners) {
    providers::CaptionRequest request;
    request.image = &render.altered;
    request.mask = &render.mask;
    captions.push_back(captioner->caption(request));
  }

  semantics::EmbedFn embed = [this](const std::string& text) {
    if (cache != nullptr) {
      return cache->get_or_compute(
          text, [this](const std::string& t) { return embedder->embed(t); });
    }
    return embedder->embed(text);
  };

  const double reconstruction =
      semantics::reconstruction_loss(prompt, captions, embed);
  const double stealth =
      perceptual::perceptual_distance(*original, render.altered, *distance);
  return semantics::combined_loss(reconstruction, stealth, stealth_weight);
}

Result optimize_placement(const imaging::Rgba8Image& original,
                          const std::string& prompt,
                          const std::vector<providers::Captioner*>& captioners,
                          providers::Embedder& embedder,
                          const perceptual::DistanceProvider& distance,
                          const typography::FontFace& font,
                          const Options& options) {
  if (options.max_iters < 1) {
    raise(Errc::invalid_argument, "max_iters must be at least 1");
  }
  if (captioners.empty()) {
    raise(Errc::invalid_argument, "captioner ensemble is empty");
  }

  semantics::EmbeddingCache cache;
  Objective objective;
  objective.original = &original;
  objective.prompt = prompt;
  objective.captioners = captioners;
  objective.embedder = &embedder;
  objective.distance = &distance;
  objective.font = &font;
  objective.stealth_weight = options.stealth_weight;
  objective.cache = &cache;

  const double penalty = options.stealth_weight + 1.0;

  tpe::TpeOptimizer optimizer(
      tpe::typography_space(original.width, original.height), options.seed,
      options.tpe);

  Result result;
  result.prompt = prompt;
  bool any_feasible = false;

  for (int iter = 0; iter < options.max_iters; ++iter) {
    std::vector<int> point = optimizer.suggest();
    typography::TypoParams params = tpe::decode_params(point);

    semantics::LossBreakdown breakdown;
    bool feasible = true;
    try {
      breakdown = objective.evaluate(params);
    } catch (const Error& e) {
      if (e.code() == Errc::unrenderable) {
        feasible = false;
        breakdown = semantics::LossBreakdown{};
        breakdown.stealth_weight = options.stealth_weight;
        breakdown.total = penalty;
      } else if (e.code() == Errc::transport ||
                 e.code() == Errc::rate_limited ||
                 e.code() == Errc::malformed_response ||
                 e.code() == Errc::remote_unavailable ||
                 e.code() == Errc::provider_failure) {
        result.partial = true;
        result.partial_reason =
            std::string(errc_name(e.code())) + ": " + e.what();
        break;
      } else {
        throw;
      }
    }

    optimizer.observe(std::move(point), breakdown.total, breakdown);
    result.iterations_run = iter + 1;
    any_feasible = any_feasible || feasible;

    if (feasible && breakdown.total <= options.early_stop_total) break;
  }

  if (optimizer.history().empty()) {
    raise(Errc::provider_failure,
          "optimization aborted before any trial: " + result.partial_reason);
  }
  if (!any_feasible) {
    raise(Errc::unrenderable,
          "every sampled configuration was unrenderable for this prompt");
  }

  const tpe::TrialRecord& best = optimizer.best();
  result.best_params = tpe::decode_params(best.point);
  result.best_loss = best.breakdown;
  result.trials = optimizer.history();

  typography::InsertResult render =
      typography::insert_prompt(original, prompt, result.best_params, font);
  result.best_image = std::move(render.altered);
  result.best_mask = std::move(render.mask);
  return result;
}

double run_and_score(const Result& result, const harness::TaskSpec& task,
                     const harness::EpisodeContext& ctx,
                     const harness::ScoreFn& score, std::uint64_t seed) {
  if (ctx.victim == nullptr) {
    raise(Errc::victim_failure, "no victim bound");
  }
  harness::AttackArtifacts artifacts{result.best_image, result.best_mask,
                                     result.prompt};
  harness::Observation obs =
      harness::assemble_observation(task, artifacts, ctx, seed);
  harness::AgentAction action = ctx.victim->step(task.user_instruction, obs);
  return std::clamp(score(task.goal, action, obs), 0.0, 1.0);
}

}  // namespace typojack::placement
