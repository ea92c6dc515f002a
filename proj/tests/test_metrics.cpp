#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "coldstart/error.hpp"
#include "coldstart/metrics.hpp"
#include "coldstart/random.hpp"

using namespace coldstart;
using Catch::Approx;

namespace {

RankedList list_of(const std::string& user, const std::vector<std::string>& ids, std::size_t k = 10) {
  RankedList l{user, {}, k};
  double s = static_cast<double>(ids.size());
  for (const auto& id : ids) l.entries.push_back({id, s--});
  return l;
}

}  // namespace

TEST_CASE("hit rate", "[metrics]") {
  const std::vector<RankedList> two = {list_of("u1", {"a", "b"}), list_of("u2", {"c", "d"})};
  const GtMap gt2 = {{"u1", {"b"}}, {"u2", {"c"}}};
  CHECK(hit_rate_at_k(two, gt2, 10) == 1.0);

  const std::vector<RankedList> four = {list_of("u1", {"a"}), list_of("u2", {"b"}), list_of("u3", {"c"}),
                                        list_of("u4", {"d"})};
  const GtMap gt4 = {{"u1", {"x"}}, {"u2", {"b"}}, {"u3", {}}, {"u4", {"y"}}};
  CHECK(hit_rate_at_k(four, gt4, 10) == 0.25);

  const GtMap missing = {{"u1", {"x"}}};
  CHECK_THROWS_AS(hit_rate_at_k(four, missing, 10), ValidationError);

  const auto l = list_of("u", {"a", "b", "c"});
  CHECK_FALSE(hit_at_k(l.entries, {"c"}, 2));
  CHECK(hit_at_k(l.entries, {"c"}, 3));
}

TEST_CASE("ndcg hand cases", "[metrics]") {
  const auto l = list_of("u", {"a", "b", "c", "d"});
  CHECK(ndcg_at_k(l, {"a"}, 10) == 1.0);
  CHECK(ndcg_at_k(l, {"b"}, 10) == Approx(1.0 / std::log2(3.0)).margin(1e-12));
  CHECK(ndcg_at_k(l, {}, 10) == 0.0);
  CHECK(ndcg_at_k(l, {"a", "b"}, 10) == 1.0);
  CHECK(ndcg_at_k(l, {"d"}, 3) == 0.0);
  // Two relevant, one retrieved at rank 3: DCG = 1/2, IDCG = 1 + 1/log2(3).
  CHECK(ndcg_at_k(l, {"c", "zz"}, 10) == Approx(0.5 / (1 + 1 / std::log2(3.0))).margin(1e-12));
  // |GT| > K: IDCG uses K ideal positions.
  CHECK(ndcg_at_k(l, {"a", "b", "x", "y"}, 2) == 1.0);
}

TEST_CASE("recall hand cases", "[metrics]") {
  const auto l = list_of("u", {"a", "b", "c", "d"});
  CHECK(recall_at_k(l, {"a", "c"}, 4) == 1.0);
  CHECK(recall_at_k(l, {"a", "x", "y", "z"}, 4) == 0.25);
  CHECK_FALSE(recall_at_k(l, {}, 4).has_value());

  const std::vector<RankedList> lists = {list_of("u1", {"a"}), list_of("u2", {"b"}), list_of("u3", {"c"})};
  const GtMap gt = {{"u1", {"a", "q"}}, {"u2", {"b"}}, {"u3", {}}};
  const auto summary = mean_recall_at_k(lists, gt, 1);
  CHECK(summary.mean == Approx(0.75));
  CHECK(summary.included == 2);
  CHECK(summary.excluded_empty_gt == 1);
}

TEST_CASE("gini and exposure", "[metrics]") {
  CHECK(gini({1, 1, 2}) == Approx(2.0 / 12.0).margin(1e-12));
  CHECK(gini({3, 3, 3, 3}) == 0.0);
  CHECK(gini({5}) == 0.0);
  CHECK(gini({0, 0, 0, 10}) == Approx(0.75));

  const std::vector<std::string> distinct = {"a", "b", "c", "d"};
  const auto flat = exposure_report_from_top1(distinct);
  CHECK(flat.unique_top1 == 4);
  CHECK(flat.gini == 0.0);

  const std::vector<std::string> top1 = {"a", "a", "b", "c", "a", "b"};
  const auto rep = exposure_report_from_top1(top1);
  CHECK(rep.unique_top1 == 3);
  std::size_t total = 0;
  for (const auto& [item, c] : rep.top1_histogram) total += c;
  CHECK(total == top1.size());
  CHECK(rep.gini == Approx(gini({3, 2, 1})));
  REQUIRE(rep.cumulative_curve.size() == 3);
  CHECK(rep.cumulative_curve[0].second == Approx(0.5));
  CHECK(rep.cumulative_curve.back().second == 1.0);

  const auto curve = cumulative_exposure({100, 250, 150});
  REQUIRE(curve.size() == 3);
  CHECK(curve[0].second == Approx(0.5));
  CHECK(curve[1].second == Approx(0.8));
  CHECK(curve[2].second == 1.0);

  const std::vector<RankedList> lists = {list_of("u1", {"a", "b"}), list_of("u2", {}), list_of("u3", {"a"})};
  const auto from_lists = exposure_report(lists);
  CHECK(from_lists.unique_top1 == 1);
  CHECK(from_lists.users == 2);
  CHECK(from_lists.users_without_top1 == 1);
}

TEST_CASE("gini properties", "[metrics][property]") {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(1 + rng.index(30));
    for (auto& v : x) v = 1.0 + static_cast<double>(rng.index(100));
    const double g = gini(x);
    CHECK(g >= 0.0);
    CHECK(g <= 1.0);
    auto scaled = x;
    for (auto& v : scaled) v *= 7.5;
    CHECK(gini(scaled) == Approx(g).margin(1e-12));
  }
}

TEST_CASE("ndcg and recall invariants", "[metrics][property]") {
  Rng rng(19);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::string> ids;
    const std::size_t n = 1 + rng.index(20);
    for (std::size_t i = 0; i < n; ++i) ids.push_back("i" + std::to_string(i));
    std::shuffle(ids.begin(), ids.end(), rng);
    const auto l = list_of("u", ids);
    GtSet gt;
    for (std::size_t g = 0; g < 1 + rng.index(6); ++g) gt.insert("i" + std::to_string(rng.index(25)));
    const std::size_t k = 1 + rng.index(12);
    const double nd = ndcg_at_k(l, gt, k);
    CHECK(nd >= 0.0);
    CHECK(nd <= 1.0 + 1e-15);
    bool all_top = true;
    const std::size_t ideal = std::min(gt.size(), k);
    for (std::size_t i = 0; i < ideal; ++i) all_top = all_top && i < ids.size() && gt.count(ids[i]);
    CHECK((nd == 1.0) == all_top);

    double prev = 0;
    bool prev_hit = false;
    for (std::size_t kk = 1; kk <= n; ++kk) {
      const double r = *recall_at_k(l, gt, kk);
      CHECK(r >= prev);
      prev = r;
      const bool h = hit_at_k(l.entries, gt, kk);
      CHECK((!prev_hit || h));
      prev_hit = h;
    }
  }
}

TEST_CASE("gt positions agree with recall", "[metrics][property]") {
  Rng rng(3);
  std::vector<CandidatePool> orderings;
  GtMap gt;
  for (int u = 0; u < 40; ++u) {
    std::vector<std::string> ids;
    for (int i = 0; i < 300; ++i) ids.push_back("i" + std::to_string(i));
    std::shuffle(ids.begin(), ids.end(), rng);
    CandidatePool p{"u" + std::to_string(u), {}, ids.size()};
    double s = 300;
    for (const auto& id : ids) p.entries.push_back({id, s--});
    orderings.push_back(p);
    GtSet g;
    for (int k = 0; k < 1 + static_cast<int>(rng.index(8)); ++k) g.insert("i" + std::to_string(rng.index(300)));
    gt[p.user_id] = u == 0 ? GtSet{} : g;
  }
  const std::vector<std::size_t> cutoffs = {50, 200, 300};
  const auto stats = gt_position_stats(orderings, gt, cutoffs, 10);
  CHECK(stats.users == 39);
  CHECK(stats.excluded_empty_gt == 1);
  for (auto c : cutoffs) {
    CHECK(std::abs(stats.fraction_within.at(c) - mean_recall_at_k(orderings, gt, c).mean) < 1e-12);
  }
  CHECK(stats.fraction_within.at(300) == 1.0);
  std::size_t binned = 0;
  for (const auto& [edge, count] : stats.histogram) binned += count;
  CHECK(binned == stats.positions.size());
  CHECK(stats.q1 <= stats.median);
  CHECK(stats.median <= stats.q3);

  GtMap first = {{"u", {"a"}}};
  std::vector<CandidatePool> single = {CandidatePool{"u", {{"a", 1}, {"b", 0}}, 2}};
  CHECK(gt_position_stats(single, first).median == 1.0);
  GtMap absent = {{"u", {"zz"}}};
  CHECK_THROWS_AS(gt_position_stats(single, absent), ValidationError);
}

TEST_CASE("quantiles", "[metrics]") {
  const std::vector<double> v = {1, 2, 3, 4};
  CHECK(sorted_quantile(v, 0.5) == 2.5);
  CHECK(sorted_quantile(v, 0.0) == 1.0);
  CHECK(sorted_quantile(v, 1.0) == 4.0);
  CHECK(sorted_quantile(v, 0.25) == 1.75);
}

TEST_CASE("per-user JSONL", "[metrics]") {
  PerUserResult r;
  r.user_id = "u\"1";
  r.hit = true;
  r.ndcg = 0.6309297535714575;
  r.recall_at = {{50, 0.25}, {200, std::nullopt}, {1000, 1.0}};
  r.top1_item = "i9";
  r.rerank_seconds = 1.5e-5;
  const auto line = to_jsonl_line(r);
  CHECK(line.rfind(R"({"user_id":"u\"1","hit":1,"ndcg":)", 0) == 0);
  CHECK(line.find(R"("recall":{"50":0.25,"200":null,"1000":1.0})") != std::string::npos);
  CHECK(per_user_from_jsonl(line) == r);

  PerUserResult none;
  none.user_id = "u2";
  CHECK(per_user_from_jsonl(to_jsonl_line(none)) == none);
  CHECK_THROWS_AS(per_user_from_jsonl("{\"hit\":1}"), ParseError);
}
