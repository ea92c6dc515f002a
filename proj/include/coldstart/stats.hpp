#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "coldstart/metrics.hpp"
#include "coldstart/retrieval.hpp"
#include "coldstart/scoring.hpp"
#include "json.hpp"

namespace coldstart {

// ---- distributions ----------------------------------------------------------------

double normal_cdf(double x);
// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);
double student_t_cdf(double t, double df);
// Two-sided tail probability P(|T| >= |t|).
double student_t_two_sided(double t, double df);

// ---- paired tests -----------------------------------------------------------------

struct TTestResult {
  double mean_diff = 0.0;
  double t = 0.0;
  double p = 1.0;
  double df = 0.0;
  std::size_t n = 0;
};

// Paired t on d = x − y. Throws ValidationError when n < 2, lengths differ, or
// all differences are identical.
TTestResult paired_t(std::span<const double> x, std::span<const double> y);

enum class WilcoxonMethod { automatic, exact, normal };

struct WilcoxonResult {
  double w = 0.0;  // min(W+, W−)
  double w_plus = 0.0;
  double w_minus = 0.0;
  double p = 1.0;
  std::size_t n_nonzero = 0;
  bool exact = false;
};

inline constexpr std::size_t kWilcoxonExactMax = 25;

// Zero differences are discarded; ties get average ranks. `automatic` uses
// exact enumeration for n ≤ 25 and the tie- and continuity-corrected normal
// approximation above. Throws ValidationError when every difference is zero.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                    WilcoxonMethod method = WilcoxonMethod::automatic);

// Pooled-SD standardized mean difference (x̄ − ȳ)/s_pooled.
// Throws ValidationError if either sample has fewer than 2 values or the
// pooled variance is zero.
double cohens_d(std::span<const double> x, std::span<const double> y);
// "Small", "Small-Medium", "Medium", "Large" on |d| bands 0.2 / 0.5 / 0.8.
std::string effect_size_label(double d);

inline constexpr std::size_t kDefaultBootstrap = 10000;

// Percentile interval of B resampled means. Throws ValidationError when
// n < 2, level ∉ (0,1) or B < 1000.
std::pair<double, double> bootstrap_ci(std::span<const double> sample, double level, std::size_t resamples,
                                       std::uint64_t seed);

// ---- association ------------------------------------------------------------------

struct Correlation {
  double r = 0.0;
  double p = 1.0;
  std::size_t n = 0;
};

// Throws ValidationError when n < 3, lengths differ, or either side is constant.
Correlation pearson(std::span<const double> x, std::span<const double> y);
Correlation spearman(std::span<const double> x, std::span<const double> y);

// 1-based average ranks (ties share the mean of their positions).
std::vector<double> average_ranks(std::span<const double> values);

struct RegressionFit {
  double slope = 0.0;
  double intercept = 0.0;
  double pearson_r = 0.0;
  double r_squared = 0.0;
  double p_value = 1.0;  // two-sided, slope = 0
  std::size_t n = 0;
};

// Throws ValidationError when n < 3 or x is constant.
RegressionFit ols_simple(std::span<const double> x, std::span<const double> y);

// ---- reports ------------------------------------------------------------------------

struct StatTestReport {
  double mean_diff = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double t_stat = 0.0;
  double p_t = 1.0;
  double wilcoxon_w = 0.0;
  double p_w = 1.0;
  double cohens_d = 0.0;  // NaN when pooled variance is zero
  std::size_t n = 0;
  bool wilcoxon_exact = false;
  std::string effect_size;
};

// Full paired comparison of x against y (differences x − y). Degenerate inputs
// do not throw: identical differences give t = 0, p_t = 1 when the mean
// difference is 0 (±inf and 0 otherwise); all-zero differences give W = 0, p_w = 1.
StatTestReport compare_paired(std::span<const double> x, std::span<const double> y, std::uint64_t seed,
                              std::size_t resamples = kDefaultBootstrap, double level = 0.95);

struct ScoreSeparationReport {
  double mean_rel = 0.0;
  double sd_rel = 0.0;
  double mean_irr = 0.0;
  double sd_irr = 0.0;
  double mean_diff = 0.0;
  double cohens_d = 0.0;
  double spearman_r = 0.0;
  double overlap_fraction = 0.0;
  std::size_t n_rel = 0;
  std::size_t n_irr = 0;
};

inline constexpr std::size_t kOverlapBins = 50;

// Quantities that cannot be computed (sd of one value, d with zero pooled
// variance, Spearman with n < 3) are NaN. Throws ValidationError when either
// partition is empty.
ScoreSeparationReport score_separation(std::span<const double> relevant, std::span<const double> irrelevant);
// Partitions every pooled (user, item) score by GT membership.
ScoreSeparationReport score_separation(const ScoreTable& scores, std::span<const CandidatePool> pools,
                                       const GtMap& gt);

// Shared area of the two normalized histograms over `bins` equal-width bins
// spanning the pooled range.
double histogram_overlap(std::span<const double> a, std::span<const double> b, std::size_t bins = kOverlapBins);

// Fixed field order; non-finite values become null.
nlohmann::ordered_json to_json(const StatTestReport& r);
nlohmann::ordered_json to_json(const ScoreSeparationReport& r);
nlohmann::ordered_json to_json(const RegressionFit& r);

}  // namespace coldstart
