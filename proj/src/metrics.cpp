#include "coldstart/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/core.h>

#include "coldstart/error.hpp"
#include "json.hpp"

namespace coldstart {

using json = nlohmann::ordered_json;

GtMap gt_map(std::span<const UserRecord> users) {
  GtMap map;
  map.reserve(users.size());
  for (const auto& u : users) map.emplace(u.id, u.gt_items);
  return map;
}

bool hit_at_k(std::span<const ScoredItem> ranking, const GtSet& gt, std::size_t k) {
  const std::size_t n = std::min(k, ranking.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (gt.contains(ranking[i].item_id)) return true;
  }
  return false;
}

double ndcg_at_k(std::span<const ScoredItem> ranking, const GtSet& gt, std::size_t k) {
  if (k == 0) throw ValidationError("ndcg_at_k: K must be >= 1");
  if (gt.empty()) return 0.0;
  const std::size_t n = std::min(k, ranking.size());
  double dcg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    // gain 2^1 - 1 = 1 for a relevant item
    if (gt.contains(ranking[i].item_id)) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  }
  const std::size_t ideal = std::min(gt.size(), k);
  double idcg = 0.0;
  for (std::size_t i = 0; i < ideal; ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return dcg / idcg;
}

std::optional<double> recall_at_k(std::span<const ScoredItem> ranking, const GtSet& gt, std::size_t k) {
  if (gt.empty()) return std::nullopt;
  const std::size_t n = std::min(k, ranking.size());
  std::size_t found = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (gt.contains(ranking[i].item_id)) ++found;
  }
  return static_cast<double>(found) / static_cast<double>(gt.size());
}

namespace {

const GtSet& gt_for(const GtMap& gt, const std::string& user) {
  auto it = gt.find(user);
  if (it == gt.end()) throw ValidationError(fmt::format("no ground truth for user '{}'", user));
  return it->second;
}

template <typename Ranked>
RecallSummary mean_recall(std::span<const Ranked> rankings, const GtMap& gt, std::size_t k) {
  RecallSummary s;
  double sum = 0.0;
  for (const auto& r : rankings) {
    auto recall = recall_at_k(r.entries, gt_for(gt, r.user_id), k);
    if (!recall) {
      ++s.excluded_empty_gt;
      continue;
    }
    sum += *recall;
    ++s.included;
  }
  s.mean = s.included ? sum / static_cast<double>(s.included) : 0.0;
  return s;
}

}  // namespace

double hit_rate_at_k(std::span<const RankedList> lists, const GtMap& gt, std::size_t k) {
  if (lists.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& list : lists) hits += hit_at_k(list.entries, gt_for(gt, list.user_id), k) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(lists.size());
}

double mean_ndcg_at_k(std::span<const RankedList> lists, const GtMap& gt, std::size_t k) {
  if (lists.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& list : lists) sum += ndcg_at_k(list.entries, gt_for(gt, list.user_id), k);
  return sum / static_cast<double>(lists.size());
}

RecallSummary mean_recall_at_k(std::span<const CandidatePool> pools, const GtMap& gt, std::size_t k) {
  return mean_recall(pools, gt, k);
}

RecallSummary mean_recall_at_k(std::span<const RankedList> lists, const GtMap& gt, std::size_t k) {
  return mean_recall(lists, gt, k);
}

double gini(std::vector<double> values) {
  const std::size_t n = values.size();
  if (n == 0) return 0.0;
  std::sort(values.begin(), values.end());
  const double total = std::accumulate(values.begin(), values.end(), 0.0);
  if (total <= 0.0) return 0.0;
  double weighted = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double rank = static_cast<double>(i + 1);
    weighted += (2.0 * rank - static_cast<double>(n) - 1.0) * values[i];
  }
  return weighted / (static_cast<double>(n) * total);
}

std::vector<std::pair<std::size_t, double>> cumulative_exposure(std::vector<std::size_t> counts) {
  std::sort(counts.begin(), counts.end(), std::greater<>());
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  std::vector<std::pair<std::size_t, double>> curve;
  if (total == 0.0) return curve;
  std::size_t running = 0;
  for (std::size_t r = 0; r < counts.size(); ++r) {
    running += counts[r];
    curve.emplace_back(r + 1, r + 1 == counts.size() ? 1.0 : static_cast<double>(running) / total);
  }
  return curve;
}

ExposureReport exposure_report_from_top1(std::span<const std::string> top1_items) {
  ExposureReport report;
  for (const auto& item : top1_items) ++report.top1_histogram[item];
  report.users = top1_items.size();
  report.unique_top1 = report.top1_histogram.size();
  std::vector<double> values;
  std::vector<std::size_t> counts;
  values.reserve(report.top1_histogram.size());
  for (const auto& [item, count] : report.top1_histogram) {
    values.push_back(static_cast<double>(count));
    counts.push_back(count);
  }
  report.gini = gini(std::move(values));
  report.cumulative_curve = cumulative_exposure(std::move(counts));
  return report;
}

ExposureReport exposure_report(std::span<const RankedList> lists) {
  if (lists.empty()) throw ValidationError("exposure_report: no lists");
  std::vector<std::string> top1;
  std::size_t without = 0;
  for (const auto& list : lists) {
    if (list.entries.empty()) {
      ++without;
    } else {
      top1.push_back(list.entries.front().item_id);
    }
  }
  ExposureReport report = exposure_report_from_top1(top1);
  report.users_without_top1 = without;
  return report;
}

double sorted_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

GtPositionSummary gt_position_stats(std::span<const CandidatePool> orderings, const GtMap& gt,
                                    std::span<const std::size_t> cutoffs, std::size_t bins) {
  GtPositionSummary s;
  std::vector<double> within_sum(cutoffs.size(), 0.0);
  std::size_t max_len = 0;
  std::unordered_map<std::string_view, std::size_t> position;
  for (const auto& ordering : orderings) {
    const GtSet& truth = gt_for(gt, ordering.user_id);
    max_len = std::max(max_len, ordering.entries.size());
    if (truth.empty()) {
      ++s.excluded_empty_gt;
      continue;
    }
    position.clear();
    for (std::size_t r = 0; r < ordering.entries.size(); ++r) position.emplace(ordering.entries[r].item_id, r + 1);
    std::vector<std::size_t> user_positions;
    for (const auto& item : truth) {
      auto it = position.find(item);
      if (it == position.end()) {
        throw ValidationError(
            fmt::format("gt_position_stats: GT item '{}' missing from ordering of user '{}'", item, ordering.user_id));
      }
      user_positions.push_back(it->second);
      s.positions.push_back(it->second);
    }
    for (std::size_t c = 0; c < cutoffs.size(); ++c) {
      const auto inside = std::count_if(user_positions.begin(), user_positions.end(),
                                        [&](std::size_t p) { return p <= cutoffs[c]; });
      within_sum[c] += static_cast<double>(inside) / static_cast<double>(truth.size());
    }
    ++s.users;
  }
  for (std::size_t c = 0; c < cutoffs.size(); ++c) {
    s.fraction_within[cutoffs[c]] = s.users ? within_sum[c] / static_cast<double>(s.users) : 0.0;
  }
  if (s.positions.empty()) return s;

  std::vector<double> sorted(s.positions.begin(), s.positions.end());
  std::sort(sorted.begin(), sorted.end());
  s.median = sorted_quantile(sorted, 0.5);
  s.q1 = sorted_quantile(sorted, 0.25);
  s.q3 = sorted_quantile(sorted, 0.75);

  bins = std::max<std::size_t>(bins, 1);
  const double width = static_cast<double>(max_len) / static_cast<double>(bins);
  s.histogram.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) s.histogram[b] = {1.0 + width * static_cast<double>(b), 0};
  for (std::size_t p : s.positions) {
    auto b = static_cast<std::size_t>(static_cast<double>(p - 1) / width);
    ++s.histogram[std::min(b, bins - 1)].second;
  }
  return s;
}

std::string to_jsonl_line(const PerUserResult& r) {
  json j;
  j["user_id"] = r.user_id;
  j["hit"] = r.hit ? 1 : 0;
  j["ndcg"] = r.ndcg;
  json recall = json::object();
  for (const auto& [k, v] : r.recall_at) recall[std::to_string(k)] = v ? json(*v) : json(nullptr);
  j["recall"] = std::move(recall);
  j["top1"] = r.top1_item ? json(*r.top1_item) : json(nullptr);
  j["rerank_seconds"] = r.rerank_seconds;
  return j.dump();
}

PerUserResult per_user_from_jsonl(const std::string& line, const std::string& source, std::size_t line_no) {
  try {
    const json j = json::parse(line);
    PerUserResult r;
    r.user_id = j.at("user_id").get<std::string>();
    r.hit = j.at("hit").get<int>() != 0;
    r.ndcg = j.at("ndcg").get<double>();
    for (const auto& [key, value] : j.at("recall").items()) {
      const auto k = static_cast<std::size_t>(std::stoull(key));
      r.recall_at[k] = value.is_null() ? std::nullopt : std::optional<double>(value.get<double>());
    }
    if (!j.at("top1").is_null()) r.top1_item = j["top1"].get<std::string>();
    r.rerank_seconds = j.at("rerank_seconds").get<double>();
    return r;
  } catch (const std::exception& e) {
    throw ParseError(source, line_no, e.what());
  }
}

}  // namespace coldstart
