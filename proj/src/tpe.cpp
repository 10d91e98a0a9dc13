#include <algorithm>
#include <cmath>
#include <ostream>

#include <json.hpp>

#include "typojack/tpe.hpp"

namespace typojack::tpe {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

bool SearchSpace::contains(const std::vector<int>& point) const {
  if (point.size() != dims.size()) return false;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (point[i] < dims[i].lower || point[i] > dims[i].upper) return false;
  }
  return true;
}

void SearchSpace::validate() const {
  if (dims.empty()) raise(Errc::invalid_argument, "search space has no dimensions");
  for (const DimSpec& d : dims) {
    if (d.lower > d.upper) {
      raise(Errc::invalid_argument, "dimension '" + d.name + "' has lower > upper");
    }
  }
}

SearchSpace typography_space(std::uint32_t image_w, std::uint32_t image_h) {
  return SearchSpace{{
      {"x", 0, static_cast<int>(image_w)},
      {"y", 0, static_cast<int>(image_h)},
      {"font_size", 10, 150},
      {"color_r", 0, 255},
      {"color_g", 0, 255},
      {"color_b", 0, 255},
      {"line_count", 1, 10},
      {"contrast", 0, 10},
      {"transparency", 0, 255},
  }};
}

std::vector<int> encode_params(const typography::TypoParams& p) {
  return {p.x,        p.y,        p.font_size, p.color[0], p.color[1],
          p.color[2], p.line_count, p.contrast, p.transparency};
}

typography::TypoParams decode_params(const std::vector<int>& v) {
  if (v.size() != 9) {
    raise(Errc::invalid_argument, "typography point must have 9 scalars");
  }
  typography::TypoParams p;
  p.x = v[0];
  p.y = v[1];
  p.font_size = v[2];
  p.color = {v[3], v[4], v[5]};
  p.line_count = v[6];
  p.contrast = v[7];
  p.transparency = v[8];
  return p;
}

std::pair<std::vector<TrialRecord>, std::vector<TrialRecord>> split_by_quantile(
    const std::vector<TrialRecord>& history) {
  if (history.empty()) {
    raise(Errc::empty_history, "cannot split an empty history");
  }
  std::vector<TrialRecord> sorted = history;
  std::sort(sorted.begin(), sorted.end(),
            [](const TrialRecord& a, const TrialRecord& b) {
              if (a.loss != b.loss) return a.loss < b.loss;
              return a.trial_index < b.trial_index;
            });
  const std::size_t t = sorted.size();
  const std::size_t n_better = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(0.15 * static_cast<double>(t))));
  std::vector<TrialRecord> better(sorted.begin(), sorted.begin() + n_better);
  std::vector<TrialRecord> worse(sorted.begin() + n_better, sorted.end());
  return {std::move(better), std::move(worse)};
}

ParzenEstimator ParzenEstimator::fit(const std::vector<int>& values, int lower,
                                     int upper) {
  if (lower > upper) {
    raise(Errc::invalid_argument, "estimator bounds inverted");
  }
  for (int v : values) {
    if (v < lower || v > upper) {
      raise(Errc::out_of_bounds, "observed value outside dimension bounds");
    }
  }
  ParzenEstimator e;
  e.lower_ = lower;
  e.upper_ = upper;
  e.centers_ = values;
  const double t = static_cast<double>(values.size());
  e.weight_ = 1.0 / (t + 1.0);
  if (values.empty()) {
    e.bandwidth_ = 1.0;
    return e;
  }
  const double range = static_cast<double>(upper) - lower;
  e.bandwidth_ = std::max(1.0, range * 1.06 * std::pow(t, -0.2) / 4.0);
  e.trunc_mass_.reserve(values.size());
  for (int c : values) {
    double z0 = (lower - 0.5 - c) / e.bandwidth_;
    double z1 = (upper + 0.5 - c) / e.bandwidth_;
    e.trunc_mass_.push_back(normal_cdf(z1) - normal_cdf(z0));
  }
  return e;
}

double ParzenEstimator::pdf(int v) const {
  if (v < lower_ || v > upper_) return 0.0;
  const double support = static_cast<double>(upper_) - lower_ + 1.0;
  double p = weight_ / support;  // uniform prior member
  for (std::size_t i = 0; i < centers_.size(); ++i) {
    double z0 = (v - 0.5 - centers_[i]) / bandwidth_;
    double z1 = (v + 0.5 - centers_[i]) / bandwidth_;
    double mass = (normal_cdf(z1) - normal_cdf(z0)) / trunc_mass_[i];
    p += weight_ * mass;
  }
  return p;
}

double ParzenEstimator::log_pdf(int v) const { return std::log(pdf(v)); }

int ParzenEstimator::sample(std::mt19937_64& rng) const {
  const std::size_t members = centers_.size() + 1;
  std::uniform_int_distribution<std::size_t> pick(0, members - 1);
  std::size_t idx = pick(rng);
  if (idx == centers_.size()) {
    std::uniform_int_distribution<int> uniform(lower_, upper_);
    return uniform(rng);
  }
  std::normal_distribution<double> normal(centers_[idx], bandwidth_);
  // Rounded rejection sampling; the center is in-bounds so this terminates
  // quickly in expectation.
  while (true) {
    int v = static_cast<int>(std::lround(normal(rng)));
    if (v >= lower_ && v <= upper_) return v;
  }
}

TpeOptimizer::TpeOptimizer(SearchSpace space, std::uint64_t seed,
                           TpeOptions options)
    : space_(std::move(space)), seed_(seed), options_(options) {
  space_.validate();
}

std::vector<int> TpeOptimizer::suggest() const {
  std::mt19937_64 rng(mix_seed(seed_, history_.size()));
  std::vector<int> point(space_.dims.size());

  if (static_cast<int>(history_.size()) < options_.n_startup) {
    for (std::size_t d = 0; d < space_.dims.size(); ++d) {
      std::uniform_int_distribution<int> uniform(space_.dims[d].lower,
                                                 space_.dims[d].upper);
      point[d] = uniform(rng);
    }
    return point;
  }

  auto [better, worse] = split_by_quantile(history_);
  for (std::size_t d = 0; d < space_.dims.size(); ++d) {
    std::vector<int> good_values, bad_values;
    good_values.reserve(better.size());
    bad_values.reserve(worse.size());
    for (const TrialRecord& r : better) good_values.push_back(r.point[d]);
    for (const TrialRecord& r : worse) bad_values.push_back(r.point[d]);

    ParzenEstimator l = ParzenEstimator::fit(good_values, space_.dims[d].lower,
                                             space_.dims[d].upper);
    ParzenEstimator g = ParzenEstimator::fit(bad_values, space_.dims[d].lower,
                                             space_.dims[d].upper);

    int best_value = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < options_.n_candidates; ++c) {
      int candidate = l.sample(rng);
      double score = l.log_pdf(candidate) - g.log_pdf(candidate);
      if (score > best_score) {
        best_score = score;
        best_value = candidate;
      }
    }
    point[d] = best_value;
  }
  return point;
}

void TpeOptimizer::observe(std::vector<int> point, double loss,
                           semantics::LossBreakdown breakdown) {
  if (!std::isfinite(loss)) {
    raise(Errc::non_finite_loss, "loss must be finite");
  }
  if (!space_.contains(point)) {
    raise(Errc::out_of_bounds, "observed point outside the search space");
  }
  TrialRecord rec;
  rec.point = std::move(point);
  rec.loss = loss;
  rec.trial_index = static_cast<int>(history_.size());
  rec.breakdown = breakdown;
  history_.push_back(std::move(rec));
}

const TrialRecord& TpeOptimizer::best() const {
  if (history_.empty()) {
    raise(Errc::empty_history, "no observations yet");
  }
  const TrialRecord* best = &history_[0];
  for (const TrialRecord& r : history_) {
    if (r.loss < best->loss) best = &r;
  }
  return *best;
}

void TpeOptimizer::export_trace(std::ostream& out) const {
  for (const TrialRecord& r : history_) {
    nlohmann::json line;
    line["trial_index"] = r.trial_index;
    nlohmann::json params;
    for (std::size_t d = 0; d < space_.dims.size(); ++d) {
      params[space_.dims[d].name] = r.point[d];
    }
    line["params"] = params;
    line["loss"] = {{"reconstruction", r.breakdown.reconstruction},
                    {"stealth", r.breakdown.stealth},
                    {"stealth_weight", r.breakdown.stealth_weight},
                    {"total", r.loss}};
    out << line.dump() << "\n";
  }
}

}  // namespace typojack::tpe
