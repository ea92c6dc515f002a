#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "coldstart/catalog.hpp"
#include "coldstart/retrieval.hpp"

namespace coldstart {

inline constexpr std::size_t kDefaultK = 10;

// Final top-K recommendation list for one user.
struct RankedList {
  std::string user_id;
  std::vector<ScoredItem> entries;
  std::size_t k = kDefaultK;

  friend bool operator==(const RankedList&, const RankedList&) = default;
};

// user id -> ground-truth item set
using GtMap = std::unordered_map<std::string, GtSet>;

GtMap gt_map(std::span<const UserRecord> users);

// ---- per-user metrics -------------------------------------------------------------

// True when any of the first K entries is relevant.
bool hit_at_k(std::span<const ScoredItem> ranking, const GtSet& gt, std::size_t k);

// Binary-gain nDCG@K; 0 when the GT set is empty.
double ndcg_at_k(std::span<const ScoredItem> ranking, const GtSet& gt, std::size_t k);
inline double ndcg_at_k(const RankedList& list, const GtSet& gt, std::size_t k) {
  return ndcg_at_k(list.entries, gt, k);
}

// |TopK ∩ GT| / |GT|; nullopt when GT is empty (such users are excluded from
// the recall average).
std::optional<double> recall_at_k(std::span<const ScoredItem> ranking, const GtSet& gt, std::size_t k);
inline std::optional<double> recall_at_k(const CandidatePool& pool, const GtSet& gt, std::size_t k) {
  return recall_at_k(pool.entries, gt, k);
}
inline std::optional<double> recall_at_k(const RankedList& list, const GtSet& gt, std::size_t k) {
  return recall_at_k(list.entries, gt, k);
}

// ---- aggregates -----------------------------------------------------------------

// Mean over users of hit_at_k. Users with empty GT count as misses. Throws
// ValidationError when a list's user has no GT entry.
double hit_rate_at_k(std::span<const RankedList> lists, const GtMap& gt, std::size_t k);
double mean_ndcg_at_k(std::span<const RankedList> lists, const GtMap& gt, std::size_t k);

struct RecallSummary {
  double mean = 0.0;           // macro average over included users
  std::size_t included = 0;
  std::size_t excluded_empty_gt = 0;
};

RecallSummary mean_recall_at_k(std::span<const CandidatePool> pools, const GtMap& gt, std::size_t k);
RecallSummary mean_recall_at_k(std::span<const RankedList> lists, const GtMap& gt, std::size_t k);

// ---- exposure -------------------------------------------------------------------

// Gini = Σ_i (2i − n − 1)·x_i / (n·Σx) over ascending x. The support is the set
// of values passed in; callers decide whether zero-exposure items belong to it.
double gini(std::vector<double> values);

struct ExposureReport {
  std::size_t unique_top1 = 0;
  // Computed over items with at least one top-1 exposure.
  double gini = 0.0;
  std::map<std::string, std::size_t> top1_histogram;
  // (rank in descending-exposure order, cumulative share), ending at 1.0
  std::vector<std::pair<std::size_t, double>> cumulative_curve;
  std::size_t users = 0;             // lists that had a top-1 item
  std::size_t users_without_top1 = 0;
};

ExposureReport exposure_report(std::span<const RankedList> lists);
ExposureReport exposure_report_from_top1(std::span<const std::string> top1_items);

// Cumulative share curve for arbitrary exposure counts (any order).
std::vector<std::pair<std::size_t, double>> cumulative_exposure(std::vector<std::size_t> counts);

// ---- ground-truth positions -------------------------------------------------------

struct GtPositionSummary {
  std::vector<std::size_t> positions;  // 1-based, every (user, GT item)
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  // Equal-width bins over [1, max ordering length]; (bin lower edge, count).
  std::vector<std::pair<double, std::size_t>> histogram;
  // cutoff -> macro mean over users of the fraction of GT within the cutoff
  std::map<std::size_t, double> fraction_within;
  std::size_t users = 0;              // users with nonempty GT
  std::size_t excluded_empty_gt = 0;
};

// `orderings` must rank the full catalog for each user (flat_search with
// k = catalog size). Throws ValidationError if a GT item is absent.
GtPositionSummary gt_position_stats(std::span<const CandidatePool> orderings, const GtMap& gt,
                                    std::span<const std::size_t> cutoffs = std::span<const std::size_t>(),
                                    std::size_t bins = 50);

// Linear-interpolated quantile (q in [0,1]) of an ascending-sorted sample.
double sorted_quantile(std::span<const double> sorted, double q);

// ---- per-user record --------------------------------------------------------------

struct PerUserResult {
  std::string user_id;
  bool hit = false;
  double ndcg = 0.0;
  // cutoff -> recall of the retrieval ranking at that depth; nullopt for empty GT
  std::map<std::size_t, std::optional<double>> recall_at;
  std::optional<std::string> top1_item;
  double rerank_seconds = 0.0;

  friend bool operator==(const PerUserResult&, const PerUserResult&) = default;
};

// One JSON object, fixed field order:
// {"user_id","hit","ndcg","recall":{"50":..},"top1","rerank_seconds"}
std::string to_jsonl_line(const PerUserResult& result);
PerUserResult per_user_from_jsonl(const std::string& line, const std::string& source = "<line>",
                                  std::size_t line_no = 1);

}  // namespace coldstart
