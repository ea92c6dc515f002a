#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "coldstart/error.hpp"
#include "coldstart/random.hpp"
#include "coldstart/stats.hpp"

using namespace coldstart;
using Catch::Approx;

namespace {

// Two-sided exact p by enumerating every sign assignment of the given ranks.
double brute_force_wilcoxon_p(const std::vector<double>& diffs) {
  std::vector<double> nz;
  for (double d : diffs) {
    if (d != 0) nz.push_back(d);
  }
  std::vector<double> abs_d;
  for (double d : nz) abs_d.push_back(std::abs(d));
  const auto ranks = average_ranks(abs_d);
  double w_plus = 0, total = 0;
  for (std::size_t i = 0; i < nz.size(); ++i) {
    total += ranks[i];
    if (nz[i] > 0) w_plus += ranks[i];
  }
  const double w = std::min(w_plus, total - w_plus);
  const std::size_t n = nz.size();
  std::size_t extreme = 0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask >> i & 1) s += ranks[i];
    }
    if (std::min(s, total - s) <= w + 1e-9) ++extreme;
  }
  return std::min(1.0, static_cast<double>(extreme) / static_cast<double>(std::size_t{1} << n));
}

std::vector<double> normals(Rng& rng, std::size_t n, double mean = 0, double sd = 1) {
  std::vector<double> v(n);
  for (auto& x : v) x = mean + sd * rng.normal();
  return v;
}

}  // namespace

TEST_CASE("distribution functions against closed forms", "[stats]") {
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK(normal_cdf(1.959963984540054) == Approx(0.975).margin(1e-12));
  CHECK(normal_cdf(-3.0) == Approx(0.0013498980316301).margin(1e-13));

  for (double x : {0.1, 0.37, 0.9}) {
    CHECK(incomplete_beta(1, 1, x) == Approx(x).margin(1e-14));
    CHECK(incomplete_beta(3.5, 1, x) == Approx(std::pow(x, 3.5)).margin(1e-13));
    CHECK(incomplete_beta(1, 2.5, x) == Approx(1 - std::pow(1 - x, 2.5)).margin(1e-13));
  }
  CHECK(incomplete_beta(4.2, 4.2, 0.5) == Approx(0.5).margin(1e-14));

  for (double t : {-4.0, -1.3, 0.0, 0.7, 2.5, 12.0}) {
    CHECK(student_t_cdf(t, 1) == Approx(0.5 + std::atan(t) / std::numbers::pi).margin(1e-12));
    CHECK(student_t_cdf(t, 2) == Approx(0.5 + t / (2 * std::sqrt(2 + t * t))).margin(1e-12));
    CHECK(student_t_two_sided(t, 2) == Approx(1 - std::abs(t) / std::sqrt(2 + t * t)).margin(1e-12));
  }
  // Published critical values.
  CHECK(student_t_cdf(2.228138851986, 10) == Approx(0.975).margin(1e-10));
  CHECK(student_t_cdf(2.045229642132, 29) == Approx(0.975).margin(1e-10));
  CHECK(student_t_cdf(-3.169272667176, 10) == Approx(0.005).margin(1e-10));
}

TEST_CASE("paired t", "[stats]") {
  const std::vector<double> x = {1, 2, 3};
  const std::vector<double> zero = {0, 0, 0};
  const auto r = paired_t(x, zero);
  CHECK(r.mean_diff == 2.0);
  CHECK(r.t == Approx(2 * std::sqrt(3.0)).margin(1e-12));
  CHECK(r.df == 2.0);
  CHECK(r.p == Approx(1 - 2 * std::sqrt(3.0) / std::sqrt(14.0)).margin(1e-12));
  CHECK(r.p == Approx(0.0742).margin(1e-3));

  CHECK_THROWS_AS(paired_t(x, x), ValidationError);
  const std::vector<double> one = {1};
  CHECK_THROWS_AS(paired_t(one, one), ValidationError);
  const std::vector<double> two = {1, 2};
  CHECK_THROWS_AS(paired_t(x, two), ValidationError);
}

TEST_CASE("wilcoxon hand cases", "[stats]") {
  const std::vector<double> pos = {1, 2, 3, 4, 5};
  const std::vector<double> z5(5, 0.0);
  const auto w = wilcoxon_signed_rank(pos, z5);
  CHECK(w.w == 0.0);
  CHECK(w.w_plus == 15.0);
  CHECK(w.exact);
  CHECK(w.p == Approx(2.0 / 32.0).margin(1e-15));

  const std::vector<double> pm = {1, -1};
  const std::vector<double> z2(2, 0.0);
  const auto t = wilcoxon_signed_rank(pm, z2);
  CHECK(t.w == 1.5);
  CHECK(t.p == 1.0);

  const std::vector<double> with_zero = {0, 0, 2, -1, 3};
  const std::vector<double> z(5, 0.0);
  CHECK(wilcoxon_signed_rank(with_zero, z).n_nonzero == 3);
  CHECK_THROWS_AS(wilcoxon_signed_rank(z5, z5), ValidationError);
}

TEST_CASE("exact wilcoxon equals sign enumeration", "[stats][property]") {
  Rng rng(17);
  for (int trial = 0; trial < 150; ++trial) {
    const std::size_t n = 1 + rng.index(14);
    std::vector<double> d(n), zero(n, 0.0);
    for (auto& v : d) v = static_cast<double>(static_cast<int>(rng.index(9)) - 4);  // ties and zeros
    if (std::all_of(d.begin(), d.end(), [](double v) { return v == 0; })) d[0] = 1;
    const auto r = wilcoxon_signed_rank(d, zero, WilcoxonMethod::exact);
    CHECK(r.p == Approx(brute_force_wilcoxon_p(d)).margin(1e-12));
    CHECK(r.p >= 0.0);
    CHECK(r.p <= 1.0);
  }
}

TEST_CASE("wilcoxon exact and normal agree at n = 10", "[stats]") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    auto x = normals(rng, 10, 0.3);
    const std::vector<double> zero(10, 0.0);
    const auto exact = wilcoxon_signed_rank(x, zero, WilcoxonMethod::exact);
    const auto approx = wilcoxon_signed_rank(x, zero, WilcoxonMethod::normal);
    CHECK(std::abs(exact.p - approx.p) < 0.02);
  }
  std::vector<double> big(40), zero(40, 0.0);
  for (std::size_t i = 0; i < big.size(); ++i) big[i] = static_cast<double>(i % 7) - 2.5;
  CHECK_FALSE(wilcoxon_signed_rank(big, zero).exact);
}

TEST_CASE("cohen's d", "[stats]") {
  const std::vector<double> x = {0, 0, 1, 1};
  const std::vector<double> y = {1, 1, 2, 2};
  CHECK(cohens_d(x, y) == Approx(-std::sqrt(3.0)).margin(1e-12));
  CHECK(cohens_d(y, x) == Approx(std::sqrt(3.0)).margin(1e-12));
  CHECK(cohens_d(x, x) == 0.0);
  const std::vector<double> c = {2, 2, 2};
  CHECK_THROWS_AS(cohens_d(c, c), ValidationError);
  const std::vector<double> one = {1};
  CHECK_THROWS_AS(cohens_d(one, x), ValidationError);

  CHECK(effect_size_label(0.1) == "Small");
  CHECK(effect_size_label(-0.3) == "Small-Medium");
  CHECK(effect_size_label(0.6) == "Medium");
  CHECK(effect_size_label(-0.9) == "Large");
  CHECK(effect_size_label(NAN) == "Undefined");
}

TEST_CASE("bootstrap percentile interval", "[stats]") {
  const std::vector<double> c(20, 3.25);
  const auto cc = bootstrap_ci(c, 0.95, 1000, 1);
  CHECK(cc.first == 3.25);
  CHECK(cc.second == 3.25);

  Rng rng(21);
  const auto x = normals(rng, 100);
  const auto a = bootstrap_ci(x, 0.95, 10000, 9);
  CHECK(a == bootstrap_ci(x, 0.95, 10000, 9));
  double mean = 0;
  for (double v : x) mean += v;
  mean /= 100;
  CHECK(a.first <= mean);
  CHECK(mean <= a.second);
  const double expected = 2 * 1.96 / 10.0;
  CHECK(std::abs((a.second - a.first) - expected) < 0.2 * expected);

  const auto big = normals(rng, 400);
  CHECK(bootstrap_ci(big, 0.95, 10000, 9).second - bootstrap_ci(big, 0.95, 10000, 9).first < a.second - a.first);

  const std::vector<double> one = {1};
  CHECK_THROWS_AS(bootstrap_ci(one, 0.95, 1000, 1), ValidationError);
  CHECK_THROWS_AS(bootstrap_ci(x, 1.0, 1000, 1), ValidationError);
  CHECK_THROWS_AS(bootstrap_ci(x, 0.95, 999, 1), ValidationError);
}

TEST_CASE("correlations", "[stats]") {
  const std::vector<double> x = {1, 2, 3, 4, 5, 6};
  const std::vector<double> up = {2, 4, 5, 9, 10, 30};
  const std::vector<double> down = {9, 7, 6, 2, 1, -5};
  CHECK(spearman(x, up).r == Approx(1.0).margin(1e-15));
  CHECK(spearman(x, down).r == Approx(-1.0).margin(1e-15));
  CHECK(spearman(x, x).p == Approx(0.0).margin(1e-12));
  CHECK(average_ranks(std::vector<double>{10, 20, 10, 5}) == std::vector<double>{2.5, 4, 2.5, 1});

  const std::vector<double> c = {1, 1, 1};
  const std::vector<double> three = {1, 2, 3};
  CHECK_THROWS_AS(spearman(c, three), ValidationError);
  CHECK_THROWS_AS(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2}), ValidationError);

  Rng rng(8);
  std::vector<double> scores(10000);
  std::vector<double> labels(10000);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores[i] = rng.normal();
    labels[i] = rng.uniform() < 0.1 ? 1.0 : 0.0;
  }
  CHECK(std::abs(spearman(scores, labels).r) < 0.05);
}

TEST_CASE("spearman is invariant under increasing transforms", "[stats][property]") {
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = normals(rng, 5 + rng.index(40));
    auto y = normals(rng, x.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += 0.5 * x[i];
    std::vector<double> tx(x.size()), ty(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      tx[i] = std::exp(x[i]);
      ty[i] = y[i] * y[i] * y[i] + 4;
    }
    CHECK(spearman(tx, ty).r == Approx(spearman(x, y).r).margin(1e-12));
  }
}

TEST_CASE("simple regression", "[stats]") {
  const std::vector<double> x = {0, 1, 2, 3, 4};
  std::vector<double> y;
  for (double v : x) y.push_back(2 * v + 1);
  const auto fit = ols_simple(x, y);
  CHECK(fit.slope == Approx(2.0).margin(1e-12));
  CHECK(fit.intercept == Approx(1.0).margin(1e-12));
  CHECK(std::abs(fit.r_squared - 1.0) < 1e-12);

  // Normal equations for (1,1) (2,3) (4,4) (5,7).
  const std::vector<double> hx = {1, 2, 4, 5};
  const std::vector<double> hy = {1, 3, 4, 7};
  const double n = 4, sx = 12, sy = 15, sxx = 46, sxy = 58;
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / n;
  const auto h = ols_simple(hx, hy);
  CHECK(std::abs(h.slope - slope) < 1e-12);
  CHECK(std::abs(h.intercept - intercept) < 1e-12);
  CHECK(std::abs(h.r_squared - h.pearson_r * h.pearson_r) < 1e-12);
  CHECK(h.pearson_r == Approx(pearson(hx, hy).r).margin(1e-12));
  CHECK(h.p_value == Approx(pearson(hx, hy).p).margin(1e-12));

  CHECK_THROWS_AS(ols_simple(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), ValidationError);
}

TEST_CASE("paired comparison report", "[stats][property]") {
  Rng rng(44);
  for (int trial = 0; trial < 30; ++trial) {
    const auto x = normals(rng, 30, 0.2);
    const auto y = normals(rng, 30);
    const auto r = compare_paired(x, y, 7, 2000);
    CHECK(r.ci_low <= r.mean_diff);
    CHECK(r.mean_diff <= r.ci_high);
    CHECK(r.p_t >= 0.0);
    CHECK(r.p_t <= 1.0);
    CHECK(r.p_w >= 0.0);
    CHECK(r.p_w <= 1.0);
    CHECK(r.n == 30);
    CHECK(r.effect_size == effect_size_label(r.cohens_d));

    std::vector<double> xs(x), ys(y);
    for (auto& v : xs) v += 100;
    for (auto& v : ys) v += 100;
    const auto shifted = compare_paired(xs, ys, 7, 2000);
    CHECK(shifted.t_stat == Approx(r.t_stat).epsilon(1e-9));
    CHECK(shifted.p_t == Approx(r.p_t).epsilon(1e-9));
    CHECK(shifted.wilcoxon_w == r.wilcoxon_w);
    CHECK(shifted.p_w == Approx(r.p_w).epsilon(1e-9));
  }

  const std::vector<double> same = {1, 0, 1, 1};
  const auto degenerate = compare_paired(same, same, 1, 1000);
  CHECK(degenerate.mean_diff == 0.0);
  CHECK(degenerate.p_t == 1.0);
  CHECK(degenerate.p_w == 1.0);
  CHECK(degenerate.wilcoxon_w == 0.0);
}

TEST_CASE("score separation", "[stats]") {
  std::vector<double> rel(200, 1.0), irr(2000, 0.0);
  Rng rng(2);
  for (auto& v : rel) v += 0.05 * rng.normal();
  for (auto& v : irr) v += 0.05 * rng.normal();
  const auto s = score_separation(rel, irr);
  CHECK(s.cohens_d > 3);
  CHECK(s.overlap_fraction < 0.1);
  std::vector<double> pooled(rel), labels(rel.size(), 1.0);
  pooled.insert(pooled.end(), irr.begin(), irr.end());
  labels.resize(pooled.size(), 0.0);
  CHECK(s.spearman_r == Approx(spearman(pooled, labels).r).margin(1e-12));
  CHECK(s.spearman_r > 0.45);  // rank-biserial bound for a 200/2000 split is just under 0.5
  CHECK(s.n_rel == 200);

  const std::vector<double> one = {0.5};
  const auto tie = score_separation(one, one);
  CHECK(tie.mean_diff == 0.0);
  CHECK(std::isnan(tie.sd_rel));
  CHECK(std::isnan(tie.cohens_d));
  CHECK(tie.overlap_fraction == 1.0);
  CHECK_THROWS_AS(score_separation(std::vector<double>{}, one), ValidationError);

  CHECK(histogram_overlap(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}) == Approx(1.0));
  CHECK(histogram_overlap(std::vector<double>{0, 0.1}, std::vector<double>{10, 10.1}) == 0.0);

  ScoreTable table;
  table.set("u", "a", 2.0);
  table.set("u", "b", 0.0);
  table.set("u", "c", 1.0);
  const std::vector<CandidatePool> pools = {CandidatePool{"u", {{"a", 3}, {"b", 2}, {"c", 1}}, 3}};
  const GtMap gt = {{"u", {"a"}}};
  const auto t = score_separation(table, pools, gt);
  CHECK(t.n_rel == 1);
  CHECK(t.n_irr == 2);
  CHECK(t.mean_rel == 2.0);
  CHECK(t.mean_irr == 0.5);
  CHECK(t.mean_diff == 1.5);
}

TEST_CASE("json serialization keeps field order and maps NaN to null", "[stats]") {
  StatTestReport r;
  r.cohens_d = NAN;
  r.effect_size = "Undefined";
  const auto j = to_json(r);
  CHECK(j.begin().key() == "mean_diff");
  CHECK(j.at("cohens_d").is_null());
  ScoreSeparationReport s;
  s.sd_rel = NAN;
  CHECK(to_json(s).at("sd_rel").is_null());
  RegressionFit f;
  CHECK(to_json(f).at("r_squared") == 0.0);
}
