#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "coldstart/catalog.hpp"
#include "coldstart/metrics.hpp"
#include "coldstart/retrieval.hpp"

namespace coldstart {

// Reranker relevance scores keyed by (user id, item id). Values are finite.
class ScoreTable {
 public:
  // Throws ValidationError for non-finite scores.
  void set(const std::string& user_id, const std::string& item_id, double score);
  std::optional<double> find(const std::string& user_id, const std::string& item_id) const;
  // Throws ValidationError naming the pair when absent.
  double at(const std::string& user_id, const std::string& item_id) const;

  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (const auto& [user, row] : table_) {
      for (const auto& [item, score] : row) fn(user, item, score);
    }
  }

 private:
  std::unordered_map<std::string, std::unordered_map<std::string, double>> table_;
  std::size_t size_ = 0;
};

// JSONL, one {"user_id": ..., "item_id": ..., "score": <float>} per line.
// Duplicate pairs are rejected.
ScoreTable load_scores(const std::filesystem::path& path);
ScoreTable parse_scores(std::istream& in, const std::string& source = "<stream>");
// Written sorted by (user id, item id) so identical tables give identical files.
void save_scores(const ScoreTable& scores, const std::filesystem::path& path);
void write_scores(const ScoreTable& scores, std::ostream& out);

// Any source of per-(user, item) relevance scores the harness can rerank with.
class PairScorer {
 public:
  virtual ~PairScorer() = default;
  virtual double score(const UserRecord& user, const std::string& item_id) const = 0;
};

class TableScorer final : public PairScorer {
 public:
  explicit TableScorer(const ScoreTable& table) : table_(&table) {}
  double score(const UserRecord& user, const std::string& item_id) const override {
    return table_->at(user.id, item_id);
  }

 private:
  const ScoreTable* table_;
};

// Pool truncated to k in retrieval order (the "no reranker" path).
RankedList truncate_pool(const CandidatePool& pool, std::size_t k);

// Top-k pool items by descending `scores` (aligned with pool.entries), ties
// by ascending item id.
RankedList rerank_by(const CandidatePool& pool, std::span<const double> scores, std::size_t k);

// Throws ValidationError naming the first (user, item) pair without a score.
RankedList rerank(const CandidatePool& pool, const ScoreTable& scores, std::size_t k);

// ---- ensemble -----------------------------------------------------------------

struct EnsembleWeights {
  double alpha = 0.3;  // cross-encoder
  double beta = 0.5;   // log-popularity
  double gamma = 0.2;  // embedding similarity
};

// alpha·ce + beta·ln(popularity + 1) + gamma·embed_sim
double ensemble_score(double ce, std::int64_t popularity, double embed_sim, const EnsembleWeights& w);

// Ensemble over a whole pool. With `normalized`, each input column is min-max
// scaled to [0,1] over the pool first (constant columns become 0).
std::vector<double> ensemble_scores(std::span<const double> ce, std::span<const std::int64_t> popularity,
                                    std::span<const double> embed_sim, const EnsembleWeights& w,
                                    bool normalized = false);

// ---- calibration ------------------------------------------------------------------

struct CalibrationParams {
  double temperature = 1.0;
  double platt_a = 1.0;
  double platt_b = 0.0;
};

double temperature_scale(double score, double temperature);
// sigmoid(a·score + b)
double platt_calibrate(double score, const CalibrationParams& p);

struct PlattFit {
  CalibrationParams params;
  bool capped = false;  // |a| hit the slope cap (separable data)
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
};

inline constexpr double kPlattSlopeCap = 50.0;

// Maximum-likelihood logistic fit of labels on scores by damped Newton
// iterations (gradient-norm tolerance 1e-8). Temperature is set to 1.
PlattFit fit_platt(std::span<const double> scores, std::span<const int> labels);

}  // namespace coldstart
