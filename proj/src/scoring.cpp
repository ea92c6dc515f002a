#include "coldstart/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <tuple>

#include <fmt/core.h>

#include "coldstart/error.hpp"
#include "json.hpp"

namespace coldstart {

using json = nlohmann::ordered_json;

void ScoreTable::set(const std::string& user_id, const std::string& item_id, double score) {
  if (!std::isfinite(score)) {
    throw ValidationError(fmt::format("non-finite score for (user '{}', item '{}')", user_id, item_id));
  }
  auto [it, fresh] = table_[user_id].insert_or_assign(item_id, score);
  (void)it;
  if (fresh) ++size_;
}

std::optional<double> ScoreTable::find(const std::string& user_id, const std::string& item_id) const {
  auto row = table_.find(user_id);
  if (row == table_.end()) return std::nullopt;
  auto cell = row->second.find(item_id);
  if (cell == row->second.end()) return std::nullopt;
  return cell->second;
}

double ScoreTable::at(const std::string& user_id, const std::string& item_id) const {
  auto s = find(user_id, item_id);
  if (!s) throw ValidationError(fmt::format("missing score for (user '{}', item '{}')", user_id, item_id));
  return *s;
}

ScoreTable parse_scores(std::istream& in, const std::string& source) {
  ScoreTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      const auto user = j.at("user_id").get<std::string>();
      const auto item = j.at("item_id").get<std::string>();
      const double score = j.at("score").get<double>();
      if (table.find(user, item)) {
        throw ParseError(source, line_no, fmt::format("duplicate score for (user '{}', item '{}')", user, item));
      }
      table.set(user, item, score);
    } catch (const json::exception& e) {
      throw ParseError(source, line_no, e.what());
    } catch (const ParseError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  return table;
}

ScoreTable load_scores(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}' for reading", path.string()));
  return parse_scores(in, path.string());
}

void write_scores(const ScoreTable& scores, std::ostream& out) {
  std::vector<std::tuple<const std::string*, const std::string*, double>> rows;
  rows.reserve(scores.size());
  scores.for_each([&](const std::string& u, const std::string& i, double s) { rows.emplace_back(&u, &i, s); });
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (*std::get<0>(a) != *std::get<0>(b)) return *std::get<0>(a) < *std::get<0>(b);
    return *std::get<1>(a) < *std::get<1>(b);
  });
  for (const auto& [u, i, s] : rows) {
    json j;
    j["user_id"] = *u;
    j["item_id"] = *i;
    j["score"] = s;
    out << j.dump() << '\n';
  }
}

void save_scores(const ScoreTable& scores, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  write_scores(scores, out);
  out.flush();
  if (!out) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

RankedList truncate_pool(const CandidatePool& pool, std::size_t k) {
  RankedList list{pool.user_id, {}, k};
  const std::size_t n = std::min(k, pool.entries.size());
  list.entries.assign(pool.entries.begin(), pool.entries.begin() + static_cast<std::ptrdiff_t>(n));
  return list;
}

RankedList rerank_by(const CandidatePool& pool, std::span<const double> scores, std::size_t k) {
  if (scores.size() != pool.entries.size()) {
    throw ValidationError(fmt::format("rerank: {} scores for a pool of {}", scores.size(), pool.entries.size()));
  }
  std::vector<ScoredItem> items;
  items.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) items.push_back({pool.entries[i].item_id, scores[i]});
  const std::size_t n = std::min(k, items.size());
  std::partial_sort(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(n), items.end(), ranks_before);
  items.resize(n);
  return {pool.user_id, std::move(items), k};
}

RankedList rerank(const CandidatePool& pool, const ScoreTable& scores, std::size_t k) {
  std::vector<double> s;
  s.reserve(pool.entries.size());
  for (const auto& e : pool.entries) s.push_back(scores.at(pool.user_id, e.item_id));
  return rerank_by(pool, s, k);
}

double ensemble_score(double ce, std::int64_t popularity, double embed_sim, const EnsembleWeights& w) {
  if (popularity < 0) throw ValidationError("ensemble_score: negative popularity");
  return w.alpha * ce + w.beta * std::log(static_cast<double>(popularity) + 1.0) + w.gamma * embed_sim;
}

namespace {

std::vector<double> min_max(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  if (out.empty()) return out;
  auto [lo, hi] = std::minmax_element(out.begin(), out.end());
  const double min = *lo;
  const double range = *hi - min;
  for (double& x : out) x = range > 0.0 ? (x - min) / range : 0.0;
  return out;
}

}  // namespace

std::vector<double> ensemble_scores(std::span<const double> ce, std::span<const std::int64_t> popularity,
                                    std::span<const double> embed_sim, const EnsembleWeights& w, bool normalized) {
  if (ce.size() != popularity.size() || ce.size() != embed_sim.size()) {
    throw ValidationError("ensemble_scores: input columns differ in length");
  }
  std::vector<double> out(ce.size());
  if (!normalized) {
    for (std::size_t i = 0; i < ce.size(); ++i) out[i] = ensemble_score(ce[i], popularity[i], embed_sim[i], w);
    return out;
  }
  std::vector<double> log_pop(popularity.size());
  for (std::size_t i = 0; i < popularity.size(); ++i) {
    if (popularity[i] < 0) throw ValidationError("ensemble_scores: negative popularity");
    log_pop[i] = std::log(static_cast<double>(popularity[i]) + 1.0);
  }
  const auto c = min_max(ce);
  const auto p = min_max(log_pop);
  const auto s = min_max(embed_sim);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = w.alpha * c[i] + w.beta * p[i] + w.gamma * s[i];
  return out;
}

double temperature_scale(double score, double temperature) {
  if (!(temperature > 0.0)) throw ValidationError(fmt::format("temperature must be > 0, got {}", temperature));
  return score / temperature;
}

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double negative_log_likelihood(std::span<const double> s, std::span<const int> y, double a, double b) {
  double nll = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double z = a * s[i] + b;
    nll += y[i] ? softplus(-z) : softplus(z);
  }
  return nll;
}

}  // namespace

double platt_calibrate(double score, const CalibrationParams& p) { return sigmoid(p.platt_a * score + p.platt_b); }

PlattFit fit_platt(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ValidationError("fit_platt: scores and labels differ in length");
  std::size_t positives = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ValidationError("fit_platt: labels must be 0 or 1");
    if (!std::isfinite(scores[i])) throw ValidationError("fit_platt: non-finite score");
    positives += static_cast<std::size_t>(labels[i]);
  }
  if (positives == 0 || positives == labels.size()) {
    throw ValidationError("fit_platt: labels must contain both classes");
  }

  constexpr double kTolerance = 1e-8;
  constexpr int kMaxIterations = 500;
  PlattFit fit;
  double a = 0.0;
  // Start from the intercept-only optimum.
  const double prior = static_cast<double>(positives) / static_cast<double>(labels.size());
  double b = std::log(prior / (1.0 - prior));
  bool slope_fixed = false;

  // Under (quasi-)complete separation the likelihood keeps improving as |a|
  // grows, so the slope goes straight to the cap and only b is fitted.
  double min_pos = INFINITY, max_pos = -INFINITY, min_neg = INFINITY, max_neg = -INFINITY;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i]) {
      min_pos = std::min(min_pos, scores[i]);
      max_pos = std::max(max_pos, scores[i]);
    } else {
      min_neg = std::min(min_neg, scores[i]);
      max_neg = std::max(max_neg, scores[i]);
    }
  }
  const bool varies = std::min(min_pos, min_neg) < std::max(max_pos, max_neg);
  if (varies && (max_neg <= min_pos || max_pos <= min_neg)) {
    const bool increasing = max_neg <= min_pos;
    a = increasing ? kPlattSlopeCap : -kPlattSlopeCap;
    const double threshold = increasing ? 0.5 * (max_neg + min_pos) : 0.5 * (max_pos + min_neg);
    b = -a * threshold;
    slope_fixed = true;
    fit.capped = true;
  }
  double nll = negative_log_likelihood(scores, labels, a, b);

  for (int iter = 1; iter <= kMaxIterations; ++iter) {
    double ga = 0.0, gb = 0.0, haa = 0.0, hab = 0.0, hbb = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const double p = sigmoid(a * scores[i] + b);
      const double r = p - labels[i];
      const double w = p * (1.0 - p);
      ga += r * scores[i];
      gb += r;
      haa += w * scores[i] * scores[i];
      hab += w * scores[i];
      hbb += w;
    }
    fit.iterations = iter;
    fit.gradient_norm = slope_fixed ? std::abs(gb) : std::hypot(ga, gb);
    if (fit.gradient_norm < kTolerance) {
      fit.converged = true;
      break;
    }

    double da = 0.0, db = 0.0;
    const double det = haa * hbb - hab * hab;
    if (slope_fixed || !(det > 1e-300)) {
      db = hbb > 0.0 ? -gb / hbb : -gb;
    } else {
      da = -(hbb * ga - hab * gb) / det;
      db = -(haa * gb - hab * ga) / det;
    }

    // Backtracking on the likelihood.
    double step = 1.0;
    double next_a = a, next_b = b, next_nll = nll;
    for (int halving = 0; halving < 60; ++halving) {
      next_a = a + step * da;
      next_b = b + step * db;
      next_nll = negative_log_likelihood(scores, labels, next_a, next_b);
      if (next_nll <= nll) break;
      step *= 0.5;
    }
    if (std::abs(next_a) > kPlattSlopeCap) {
      // Separable (or nearly so): pin the slope and fit the intercept alone.
      next_a = std::copysign(kPlattSlopeCap, next_a);
      slope_fixed = true;
      fit.capped = true;
      next_nll = negative_log_likelihood(scores, labels, next_a, next_b);
    }
    const bool stalled = next_a == a && next_b == b;
    a = next_a;
    b = next_b;
    nll = next_nll;
    if (stalled) break;
  }
  fit.params = {1.0, a, b};
  return fit;
}

}  // namespace coldstart
