#include "coldstart/retrieval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

#include <fmt/core.h>

#include "coldstart/error.hpp"
#include "coldstart/random.hpp"

namespace coldstart {

// ---- EmbeddingSet -------------------------------------------------------------

std::optional<std::size_t> EmbeddingSet::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::span<const double> EmbeddingSet::at(std::string_view id) const {
  auto row = index_of(id);
  if (!row) throw ValidationError(fmt::format("no embedding for id '{}'", id));
  return vector(*row);
}

void EmbeddingSet::add(std::string id, std::span<const double> values) {
  if (dim_ == 0) throw ValidationError("embedding set has dimension 0");
  if (values.size() != dim_) {
    throw ValidationError(fmt::format("embedding '{}' has dimension {}, expected {}", id, values.size(), dim_));
  }
  double norm2 = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) throw ValidationError(fmt::format("embedding '{}' has a non-finite component", id));
    norm2 += v * v;
  }
  if (norm2 == 0.0) throw ValidationError(fmt::format("embedding '{}' is the zero vector", id));
  if (!index_.emplace(id, ids_.size()).second) throw ValidationError(fmt::format("duplicate embedding id '{}'", id));
  const double inv = 1.0 / std::sqrt(norm2);
  for (double v : values) data_.push_back(v * inv);
  ids_.push_back(std::move(id));
}

EmbeddingSet parse_embeddings(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!line.starts_with("dim=")) throw ParseError(source, line_no, "expected 'dim=<d>' header");
    const char* first = line.data() + 4;
    auto [ptr, ec] = std::from_chars(first, line.data() + line.size(), dim);
    if (ec != std::errc{} || ptr != line.data() + line.size() || dim == 0) {
      throw ParseError(source, line_no, "bad dimension header");
    }
    break;
  }
  if (dim == 0) throw ParseError(source, line_no, "missing 'dim=<d>' header");

  EmbeddingSet set(dim);
  std::vector<double> values;
  values.reserve(dim);
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) throw ParseError(source, line_no, "expected '<id>\\t<values>'");
    values.clear();
    const char* p = line.data() + tab + 1;
    const char* end = line.data() + line.size();
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      double v = 0.0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc{}) throw ParseError(source, line_no, "bad number");
      values.push_back(v);
      p = next;
    }
    if (values.size() != dim) {
      throw ParseError(source, line_no, fmt::format("expected {} values, found {}", dim, values.size()));
    }
    try {
      set.add(line.substr(0, tab), values);
    } catch (const ValidationError& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  return set;
}

EmbeddingSet load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}' for reading", path.string()));
  return parse_embeddings(in, path.string());
}

void write_embeddings(const EmbeddingSet& set, std::ostream& out) {
  out << "dim=" << set.dim() << '\n';
  std::string line;
  for (std::size_t row = 0; row < set.size(); ++row) {
    line = set.id(row);
    line += '\t';
    const auto v = set.vector(row);
    for (std::size_t d = 0; d < v.size(); ++d) {
      if (d) line += ' ';
      line += fmt::format("{}", v[d]);
    }
    line += '\n';
    out << line;
  }
}

void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  write_embeddings(set, out);
  out.flush();
  if (!out) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

// ---- exact search -----------------------------------------------------------

double dot(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

namespace {

// Keeps the best k of `items` under ranks_before, sorted.
void keep_top(std::vector<ScoredItem>& items, std::size_t k) {
  if (k < items.size()) {
    std::partial_sort(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(k), items.end(), ranks_before);
    items.resize(k);
  } else {
    std::sort(items.begin(), items.end(), ranks_before);
  }
}

}  // namespace

CandidatePool flat_search(std::span<const double> query, const EmbeddingSet& embeddings, std::size_t k,
                          std::string user_id) {
  if (k == 0) throw ValidationError("flat_search: k must be >= 1");
  if (query.size() != embeddings.dim()) {
    throw ValidationError(
        fmt::format("flat_search: query dimension {} != index dimension {}", query.size(), embeddings.dim()));
  }
  const std::size_t n = embeddings.size();
  std::vector<double> sims(n);
  for (std::size_t row = 0; row < n; ++row) sims[row] = dot(query, embeddings.vector(row));

  // Rank row indices first so only the survivors pay for string copies.
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  auto before = [&](std::uint32_t a, std::uint32_t b) {
    if (sims[a] != sims[b]) return sims[a] > sims[b];
    return embeddings.id(a) < embeddings.id(b);
  };
  const std::size_t take = std::min(k, n);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), before);

  CandidatePool pool{std::move(user_id), {}, k};
  pool.entries.reserve(take);
  for (std::size_t r = 0; r < take; ++r) pool.entries.push_back({embeddings.id(order[r]), sims[order[r]]});
  return pool;
}

// ---- BM25 -----------------------------------------------------------------

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Bm25Index::Bm25Index(const Catalog& catalog, Bm25Params params) : params_(params) {
  std::vector<std::string> docs;
  docs.reserve(catalog.size());
  for (const Item& item : catalog.items()) {
    doc_ids_.push_back(item.id);
    docs.push_back(build_item_profile(item));
  }
  build(docs);
}

Bm25Index::Bm25Index(std::vector<std::string> doc_ids, const std::vector<std::string>& documents, Bm25Params params)
    : params_(params), doc_ids_(std::move(doc_ids)) {
  if (doc_ids_.size() != documents.size()) throw ValidationError("Bm25Index: ids and documents differ in length");
  build(documents);
}

void Bm25Index::build(const std::vector<std::string>& documents) {
  if (!(params_.k1 > 0.0) || !(params_.b >= 0.0 && params_.b <= 1.0)) {
    throw ValidationError(fmt::format("invalid BM25 parameters k1={} b={}", params_.k1, params_.b));
  }
  doc_len_.assign(documents.size(), 0);
  double total = 0.0;
  std::unordered_map<std::string, std::uint32_t> tf;
  for (std::size_t d = 0; d < documents.size(); ++d) {
    tf.clear();
    const auto tokens = tokenize(documents[d]);
    for (const auto& t : tokens) ++tf[t];
    doc_len_[d] = static_cast<std::uint32_t>(tokens.size());
    total += static_cast<double>(tokens.size());
    for (auto& [term, count] : tf) postings_[term].push_back({static_cast<std::uint32_t>(d), count});
  }
  avg_len_ = documents.empty() ? 0.0 : total / static_cast<double>(documents.size());
}

double Bm25Index::idf(std::string_view term) const {
  auto it = postings_.find(std::string(term));
  const double df = it == postings_.end() ? 0.0 : static_cast<double>(it->second.size());
  const double n = static_cast<double>(doc_ids_.size());
  return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
}

CandidatePool Bm25Index::search(std::string_view query_text, std::size_t k, std::string user_id) const {
  if (doc_ids_.empty()) throw ValidationError("bm25_search: empty index");
  if (k == 0) throw ValidationError("bm25_search: k must be >= 1");
  std::vector<double> scores(doc_ids_.size(), 0.0);
  std::vector<char> touched(doc_ids_.size(), 0);
  for (const auto& term : tokenize(query_text)) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const double w = idf(term);
    for (const Posting& p : it->second) {
      const double tf = p.tf;
      const double norm = params_.k1 * (1.0 - params_.b + params_.b * doc_len_[p.doc] / avg_len_);
      scores[p.doc] += w * (tf * (params_.k1 + 1.0)) / (tf + norm);
      touched[p.doc] = 1;
    }
  }
  std::vector<ScoredItem> hits;
  for (std::size_t d = 0; d < scores.size(); ++d) {
    if (touched[d] && scores[d] > 0.0) hits.push_back({doc_ids_[d], scores[d]});
  }
  keep_top(hits, k);
  return {std::move(user_id), std::move(hits), k};
}

CandidatePool bm25_search(std::string_view query_text, const Catalog& catalog, const Bm25Params& params,
                          std::size_t k, std::string user_id) {
  return Bm25Index(catalog, params).search(query_text, k, std::move(user_id));
}

// ---- baselines ----------------------------------------------------------------

CandidatePool popularity_topk(const Catalog& catalog, std::size_t k, std::string user_id) {
  if (k == 0) throw ValidationError("popularity_topk: k must be >= 1");
  std::vector<ScoredItem> all;
  all.reserve(catalog.size());
  for (const Item& item : catalog.items()) all.push_back({item.id, static_cast<double>(item.popularity)});
  keep_top(all, k);
  return {std::move(user_id), std::move(all), k};
}

CandidatePool random_topk(const Catalog& catalog, std::size_t k, std::uint64_t seed, std::string user_id) {
  if (k > catalog.size()) {
    throw ValidationError(fmt::format("random_topk: k={} exceeds catalog size {}", k, catalog.size()));
  }
  Rng rng(seed);
  std::vector<std::uint32_t> idx(catalog.size());
  std::iota(idx.begin(), idx.end(), 0u);
  CandidatePool pool{std::move(user_id), {}, k};
  pool.entries.reserve(k);
  // Partial Fisher-Yates: position r receives a uniform pick from the rest.
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t pick = r + static_cast<std::size_t>(rng.index(idx.size() - r));
    std::swap(idx[r], idx[pick]);
    pool.entries.push_back({catalog[idx[r]].id, static_cast<double>(k - r)});
  }
  return pool;
}

CandidatePool hybrid_union(std::span<const CandidatePool> pools, std::size_t k_total) {
  if (pools.empty()) throw ValidationError("hybrid_union: no pools given");
  const std::string& user = pools.front().user_id;
  std::unordered_map<std::string, double> merged;
  for (const CandidatePool& pool : pools) {
    if (pool.user_id != user) {
      throw ValidationError(fmt::format("hybrid_union: pools for different users ('{}' vs '{}')", user, pool.user_id));
    }
    if (pool.entries.empty()) continue;
    auto [lo, hi] = std::minmax_element(pool.entries.begin(), pool.entries.end(),
                                        [](const ScoredItem& a, const ScoredItem& b) { return a.score < b.score; });
    const double min = lo->score;
    const double range = hi->score - min;
    for (const ScoredItem& e : pool.entries) {
      const double normalized = range > 0.0 ? (e.score - min) / range : 1.0;
      auto [it, fresh] = merged.emplace(e.item_id, normalized);
      if (!fresh) it->second = std::max(it->second, normalized);
    }
  }
  std::vector<ScoredItem> items;
  items.reserve(merged.size());
  for (auto& [id, score] : merged) items.push_back({id, score});
  keep_top(items, k_total);
  return {user, std::move(items), k_total};
}

}  // namespace coldstart
