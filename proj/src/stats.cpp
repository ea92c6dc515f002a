#include "coldstart/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include <fmt/core.h>

#include "coldstart/error.hpp"
#include "coldstart/random.hpp"

namespace coldstart {

using json = nlohmann::ordered_json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Sample variance (n − 1 denominator).
double variance_of(std::span<const double> v, double mean) {
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

std::vector<double> differences(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw ValidationError(fmt::format("paired samples differ in length ({} vs {})", x.size(), y.size()));
  }
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - y[i];
  return d;
}

// Lentz evaluation of the continued fraction for I_x(a, b).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 1000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw ValidationError("incomplete_beta: a and b must be > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided(double t, double df) {
  if (!(df > 0.0)) throw ValidationError("student_t: degrees of freedom must be > 0");
  if (std::isnan(t)) return kNaN;
  if (std::isinf(t)) return 0.0;
  return incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

double student_t_cdf(double t, double df) {
  const double tail = 0.5 * student_t_two_sided(t, df);
  return t > 0.0 ? 1.0 - tail : tail;
}

TTestResult paired_t(std::span<const double> x, std::span<const double> y) {
  const auto d = differences(x, y);
  if (d.size() < 2) throw ValidationError(fmt::format("paired_t needs n >= 2, got {}", d.size()));
  TTestResult r;
  r.n = d.size();
  r.df = static_cast<double>(r.n - 1);
  r.mean_diff = mean_of(d);
  const double sd = std::sqrt(variance_of(d, r.mean_diff));
  if (!(sd > 0.0)) throw ValidationError("paired_t: all differences are identical (zero variance)");
  r.t = r.mean_diff / (sd / std::sqrt(static_cast<double>(r.n)));
  r.p = std::clamp(student_t_two_sided(r.t, r.df), 0.0, 1.0);
  return r;
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

namespace {

// P(W+ <= w) under the null by enumeration over sign assignments of the
// (possibly tied) ranks. Ranks are half-integers, so work in doubled units.
double wilcoxon_exact_cdf(std::span<const double> ranks, double w) {
  std::vector<std::size_t> doubled(ranks.size());
  std::size_t total = 0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    doubled[i] = static_cast<std::size_t>(std::llround(2.0 * ranks[i]));
    total += doubled[i];
  }
  std::vector<double> count(total + 1, 0.0);
  count[0] = 1.0;
  std::size_t reach = 0;
  for (std::size_t r : doubled) {
    for (std::size_t s = reach + 1; s-- > 0;) {
      if (count[s] != 0.0) count[s + r] += count[s];
    }
    reach += r;
  }
  const auto limit = static_cast<std::size_t>(std::llround(2.0 * w));
  double below = 0.0;
  for (std::size_t s = 0; s <= std::min(limit, total); ++s) below += count[s];
  return below / std::ldexp(1.0, static_cast<int>(ranks.size()));
}

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y, WilcoxonMethod method) {
  const auto all = differences(x, y);
  std::vector<double> d;
  d.reserve(all.size());
  for (double v : all) {
    if (v != 0.0) d.push_back(v);
  }
  if (d.empty()) throw ValidationError("wilcoxon_signed_rank: all differences are zero");

  std::vector<double> magnitude(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) magnitude[i] = std::abs(d[i]);
  const auto ranks = average_ranks(magnitude);

  WilcoxonResult r;
  r.n_nonzero = d.size();
  for (std::size_t i = 0; i < d.size(); ++i) (d[i] > 0.0 ? r.w_plus : r.w_minus) += ranks[i];
  r.w = std::min(r.w_plus, r.w_minus);

  const bool exact = method == WilcoxonMethod::exact ||
                     (method == WilcoxonMethod::automatic && r.n_nonzero <= kWilcoxonExactMax);
  if (exact) {
    if (r.n_nonzero > 1000) throw ValidationError("wilcoxon exact enumeration limited to n <= 1000");
    r.exact = true;
    r.p = std::min(1.0, 2.0 * wilcoxon_exact_cdf(ranks, r.w));
    return r;
  }

  const auto n = static_cast<double>(r.n_nonzero);
  const double mu = n * (n + 1.0) / 4.0;
  double tie_term = 0.0;
  std::vector<double> sorted = ranks;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const auto t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
  if (!(var > 0.0)) {
    r.p = 1.0;
    return r;
  }
  double dev = r.w - mu;  // <= 0 since w is the smaller sum
  if (dev < 0.0) dev = std::min(0.0, dev + 0.5);
  const double z = dev / std::sqrt(var);
  r.p = std::min(1.0, 2.0 * normal_cdf(z));
  return r;
}

double cohens_d(std::span<const double> x, std::span<const double> y) {
  if (x.size() < 2 || y.size() < 2) throw ValidationError("cohens_d needs at least 2 values per sample");
  const double mx = mean_of(x);
  const double my = mean_of(y);
  const auto nx = static_cast<double>(x.size());
  const auto ny = static_cast<double>(y.size());
  const double pooled = ((nx - 1.0) * variance_of(x, mx) + (ny - 1.0) * variance_of(y, my)) / (nx + ny - 2.0);
  if (!(pooled > 0.0)) throw ValidationError("cohens_d: zero pooled variance");
  return (mx - my) / std::sqrt(pooled);
}

std::string effect_size_label(double d) {
  const double a = std::abs(d);
  if (std::isnan(a)) return "Undefined";
  if (a < 0.2) return "Small";
  if (a < 0.5) return "Small-Medium";
  if (a < 0.8) return "Medium";
  return "Large";
}

std::pair<double, double> bootstrap_ci(std::span<const double> sample, double level, std::size_t resamples,
                                       std::uint64_t seed) {
  if (sample.size() < 2) throw ValidationError(fmt::format("bootstrap_ci needs n >= 2, got {}", sample.size()));
  if (!(level > 0.0 && level < 1.0)) throw ValidationError(fmt::format("bootstrap level must be in (0,1), got {}", level));
  if (resamples < 1000) throw ValidationError(fmt::format("bootstrap needs B >= 1000, got {}", resamples));
  Rng rng(seed);
  const std::size_t n = sample.size();
  std::vector<double> means(resamples);
  for (auto& m : means) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += sample[rng.index(n)];
    m = sum / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  const double alpha = 1.0 - level;
  return {sorted_quantile(means, alpha / 2.0), sorted_quantile(means, 1.0 - alpha / 2.0)};
}

namespace {

double correlation_p(double r, std::size_t n) {
  const double df = static_cast<double>(n) - 2.0;
  if (std::abs(r) >= 1.0) return 0.0;
  const double t = r * std::sqrt(df / (1.0 - r * r));
  return std::clamp(student_t_two_sided(t, df), 0.0, 1.0);
}

double raw_pearson(std::span<const double> x, std::span<const double> y, const char* what) {
  const double mx = mean_of(x);
  const double my = mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw ValidationError(fmt::format("{}: zero variance input", what));
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

void check_association_input(std::span<const double> x, std::span<const double> y, const char* what) {
  if (x.size() != y.size()) throw ValidationError(fmt::format("{}: inputs differ in length", what));
  if (x.size() < 3) throw ValidationError(fmt::format("{} needs n >= 3, got {}", what, x.size()));
}

}  // namespace

Correlation pearson(std::span<const double> x, std::span<const double> y) {
  check_association_input(x, y, "pearson");
  Correlation c;
  c.n = x.size();
  c.r = raw_pearson(x, y, "pearson");
  c.p = correlation_p(c.r, c.n);
  return c;
}

Correlation spearman(std::span<const double> x, std::span<const double> y) {
  check_association_input(x, y, "spearman");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  Correlation c;
  c.n = x.size();
  c.r = raw_pearson(rx, ry, "spearman");
  c.p = correlation_p(c.r, c.n);
  return c;
}

RegressionFit ols_simple(std::span<const double> x, std::span<const double> y) {
  check_association_input(x, y, "ols_simple");
  const double mx = mean_of(x);
  const double my = mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw ValidationError("ols_simple: x is constant");
  RegressionFit fit;
  fit.n = x.size();
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (syy > 0.0) {
    fit.pearson_r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    fit.r_squared = fit.pearson_r * fit.pearson_r;
    fit.p_value = correlation_p(fit.pearson_r, fit.n);
  } else {
    // y constant: the fit is exact and flat
    fit.pearson_r = 0.0;
    fit.r_squared = 0.0;
    fit.p_value = 1.0;
  }
  return fit;
}

StatTestReport compare_paired(std::span<const double> x, std::span<const double> y, std::uint64_t seed,
                              std::size_t resamples, double level) {
  const auto d = differences(x, y);
  if (d.size() < 2) throw ValidationError(fmt::format("compare_paired needs n >= 2, got {}", d.size()));
  StatTestReport r;
  r.n = d.size();
  r.mean_diff = mean_of(d);
  std::tie(r.ci_low, r.ci_high) = bootstrap_ci(d, level, resamples, seed);

  const double sd = std::sqrt(variance_of(d, r.mean_diff));
  if (sd > 0.0) {
    const auto t = paired_t(x, y);
    r.t_stat = t.t;
    r.p_t = t.p;
  } else if (r.mean_diff == 0.0) {
    r.t_stat = 0.0;
    r.p_t = 1.0;
  } else {
    r.t_stat = std::copysign(std::numeric_limits<double>::infinity(), r.mean_diff);
    r.p_t = 0.0;
  }

  if (std::any_of(d.begin(), d.end(), [](double v) { return v != 0.0; })) {
    const auto w = wilcoxon_signed_rank(x, y);
    r.wilcoxon_w = w.w;
    r.p_w = w.p;
    r.wilcoxon_exact = w.exact;
  } else {
    r.wilcoxon_w = 0.0;
    r.p_w = 1.0;
  }

  try {
    r.cohens_d = cohens_d(x, y);
  } catch (const ValidationError&) {
    r.cohens_d = kNaN;
  }
  r.effect_size = effect_size_label(r.cohens_d);
  return r;
}

double histogram_overlap(std::span<const double> a, std::span<const double> b, std::size_t bins) {
  if (a.empty() || b.empty()) throw ValidationError("histogram_overlap: empty sample");
  bins = std::max<std::size_t>(bins, 1);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : a) lo = std::min(lo, v), hi = std::max(hi, v);
  for (double v : b) lo = std::min(lo, v), hi = std::max(hi, v);
  if (!(hi > lo)) return 1.0;
  const double width = (hi - lo) / static_cast<double>(bins);
  auto histogram = [&](std::span<const double> v) {
    std::vector<double> h(bins, 0.0);
    for (double x : v) {
      auto i = static_cast<std::size_t>((x - lo) / width);
      h[std::min(i, bins - 1)] += 1.0;
    }
    for (double& c : h) c /= static_cast<double>(v.size());
    return h;
  };
  const auto ha = histogram(a);
  const auto hb = histogram(b);
  double shared = 0.0;
  for (std::size_t i = 0; i < bins; ++i) shared += std::min(ha[i], hb[i]);
  return std::clamp(shared, 0.0, 1.0);
}

ScoreSeparationReport score_separation(std::span<const double> relevant, std::span<const double> irrelevant) {
  if (relevant.empty() || irrelevant.empty()) {
    throw ValidationError("score_separation: need at least one relevant and one irrelevant score");
  }
  ScoreSeparationReport r;
  r.n_rel = relevant.size();
  r.n_irr = irrelevant.size();
  r.mean_rel = mean_of(relevant);
  r.mean_irr = mean_of(irrelevant);
  r.sd_rel = r.n_rel > 1 ? std::sqrt(variance_of(relevant, r.mean_rel)) : kNaN;
  r.sd_irr = r.n_irr > 1 ? std::sqrt(variance_of(irrelevant, r.mean_irr)) : kNaN;
  r.mean_diff = r.mean_rel - r.mean_irr;
  try {
    r.cohens_d = cohens_d(relevant, irrelevant);
  } catch (const ValidationError&) {
    r.cohens_d = kNaN;
  }

  std::vector<double> scores(relevant.begin(), relevant.end());
  scores.insert(scores.end(), irrelevant.begin(), irrelevant.end());
  std::vector<double> labels(scores.size(), 0.0);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(r.n_rel), 1.0);
  try {
    r.spearman_r = spearman(scores, labels).r;
  } catch (const ValidationError&) {
    r.spearman_r = kNaN;
  }
  r.overlap_fraction = histogram_overlap(relevant, irrelevant);
  return r;
}

ScoreSeparationReport score_separation(const ScoreTable& scores, std::span<const CandidatePool> pools,
                                       const GtMap& gt) {
  std::vector<double> rel, irr;
  for (const auto& pool : pools) {
    auto it = gt.find(pool.user_id);
    if (it == gt.end()) throw ValidationError(fmt::format("no ground truth for user '{}'", pool.user_id));
    for (const auto& e : pool.entries) {
      const double s = scores.at(pool.user_id, e.item_id);
      (it->second.contains(e.item_id) ? rel : irr).push_back(s);
    }
  }
  return score_separation(rel, irr);
}

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json to_json(const StatTestReport& r) {
  json j;
  j["mean_diff"] = finite_or_null(r.mean_diff);
  j["ci_low"] = finite_or_null(r.ci_low);
  j["ci_high"] = finite_or_null(r.ci_high);
  j["t_stat"] = finite_or_null(r.t_stat);
  j["p_t"] = finite_or_null(r.p_t);
  j["wilcoxon_w"] = finite_or_null(r.wilcoxon_w);
  j["p_w"] = finite_or_null(r.p_w);
  j["cohens_d"] = finite_or_null(r.cohens_d);
  j["effect_size"] = r.effect_size;
  j["n"] = r.n;
  j["wilcoxon_exact"] = r.wilcoxon_exact;
  return j;
}

json to_json(const ScoreSeparationReport& r) {
  json j;
  j["mean_rel"] = finite_or_null(r.mean_rel);
  j["sd_rel"] = finite_or_null(r.sd_rel);
  j["mean_irr"] = finite_or_null(r.mean_irr);
  j["sd_irr"] = finite_or_null(r.sd_irr);
  j["mean_diff"] = finite_or_null(r.mean_diff);
  j["cohens_d"] = finite_or_null(r.cohens_d);
  j["spearman_r"] = finite_or_null(r.spearman_r);
  j["overlap_fraction"] = finite_or_null(r.overlap_fraction);
  j["n_rel"] = r.n_rel;
  j["n_irr"] = r.n_irr;
  return j;
}

json to_json(const RegressionFit& r) {
  json j;
  j["slope"] = finite_or_null(r.slope);
  j["intercept"] = finite_or_null(r.intercept);
  j["pearson_r"] = finite_or_null(r.pearson_r);
  j["r_squared"] = finite_or_null(r.r_squared);
  j["p_value"] = finite_or_null(r.p_value);
  j["n"] = r.n;
  return j;
}

}  // namespace coldstart
