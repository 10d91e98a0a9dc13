#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "typojack/semantics.hpp"
#include "typojack/typography.hpp"

namespace typojack::tpe {

struct DimSpec {
  std::string name;
  int lower = 0;
  int upper = 0;
};

/// Box-shaped mixed-integer domain.
struct SearchSpace {
  std::vector<DimSpec> dims;

  bool contains(const std::vector<int>& point) const;
  void validate() const;
};

/// The nine scalar dimensions of the typographic domain for a given image.
SearchSpace typography_space(std::uint32_t image_w, std::uint32_t image_h);
std::vector<int> encode_params(const typography::TypoParams& params);
typography::TypoParams decode_params(const std::vector<int>& point);

struct TrialRecord {
  std::vector<int> point;
  double loss = 0.0;
  int trial_index = 0;
  semantics::LossBreakdown breakdown;
};

/// Ascending sort by loss (ties: lower trial index first), then a split with
/// |better| = max(1, ceil(0.15 * t)).
std::pair<std::vector<TrialRecord>, std::vector<TrialRecord>> split_by_quantile(
    const std::vector<TrialRecord>& history);

/// One-dimensional density over an integer range: one truncated-Gaussian
/// component per observed value plus a uniform prior, all equally weighted.
/// The pdf sums to 1 over the integer support.
class ParzenEstimator {
 public:
  static ParzenEstimator fit(const std::vector<int>& values, int lower,
                             int upper);

  double pdf(int v) const;
  double log_pdf(int v) const;
  int sample(std::mt19937_64& rng) const;

  double bandwidth() const { return bandwidth_; }
  double uniform_weight() const { return weight_; }

 private:
  int lower_ = 0;
  int upper_ = 0;
  double bandwidth_ = 1.0;
  double weight_ = 1.0;  // shared weight of every mixture member
  std::vector<int> centers_;
  std::vector<double> trunc_mass_;  // per-component normalization
};

struct TpeOptions {
  int n_startup = 10;
  int n_candidates = 24;
  double gamma = 0.15;
};

/// Sequential ask/tell optimizer. suggest() is a pure function of the
/// observation history and the seed; observe() appends one record.
class TpeOptimizer {
 public:
  TpeOptimizer(SearchSpace space, std::uint64_t seed,
               TpeOptions options = TpeOptions{});

  std::vector<int> suggest() const;
  void observe(std::vector<int> point, double loss,
               semantics::LossBreakdown breakdown = {});
  const TrialRecord& best() const;
  const std::vector<TrialRecord>& history() const { return history_; }
  const SearchSpace& space() const { return space_; }

  /// One self-contained JSON document per line.
  void export_trace(std::ostream& out) const;

 private:
  SearchSpace space_;
  std::uint64_t seed_;
  TpeOptions options_;
  std::vector<TrialRecord> history_;
};

}  // namespace typojack::tpe
