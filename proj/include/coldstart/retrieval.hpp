#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "coldstart/catalog.hpp"

namespace coldstart {

struct ScoredItem {
  std::string item_id;
  double score = 0.0;

  friend bool operator==(const ScoredItem&, const ScoredItem&) = default;
};

// Strict weak order used everywhere a ranking is produced: descending score,
// ties broken by ascending item id.
inline bool ranks_before(const ScoredItem& a, const ScoredItem& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.item_id < b.item_id;
}

// Retrieval output for one user: at most pool_size distinct items in
// non-increasing score order.
struct CandidatePool {
  std::string user_id;
  std::vector<ScoredItem> entries;
  std::size_t pool_size = 0;

  friend bool operator==(const CandidatePool&, const CandidatePool&) = default;
};

// Dense vectors keyed by id, stored row-major. Every vector is L2-normalized
// on insertion.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  explicit EmbeddingSet(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::string& id(std::size_t row) const { return ids_[row]; }

  std::span<const double> vector(std::size_t row) const {
    return {data_.data() + row * dim_, dim_};
  }
  std::optional<std::size_t> index_of(std::string_view id) const;
  // Throws ValidationError for unknown ids.
  std::span<const double> at(std::string_view id) const;

  // Appends a vector, normalizing it. Rejects duplicate ids, wrong
  // dimensions, non-finite entries and zero vectors.
  void add(std::string id, std::span<const double> values);

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<double> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Text format: "dim=<d>" then "<id>\t<v1> <v2> ... <vd>" per line.
EmbeddingSet load_embeddings(const std::filesystem::path& path);
EmbeddingSet parse_embeddings(std::istream& in, const std::string& source = "<stream>");
void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path);
void write_embeddings(const EmbeddingSet& set, std::ostream& out);

double dot(std::span<const double> a, std::span<const double> b);

// Exact top-k by inner product over every row of `embeddings`.
CandidatePool flat_search(std::span<const double> query, const EmbeddingSet& embeddings, std::size_t k,
                          std::string user_id = {});

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

// Lowercased whitespace tokens. Bytes outside ASCII are left untouched.
std::vector<std::string> tokenize(std::string_view text);

// Okapi BM25 over item profile texts.
class Bm25Index {
 public:
  explicit Bm25Index(const Catalog& catalog, Bm25Params params = {});
  // Indexes arbitrary documents; used for hand-checked fixtures.
  Bm25Index(std::vector<std::string> doc_ids, const std::vector<std::string>& documents, Bm25Params params = {});

  std::size_t document_count() const { return doc_ids_.size(); }
  double average_length() const { return avg_len_; }
  double idf(std::string_view term) const;
  const Bm25Params& params() const { return params_; }

  // Top-k documents with a positive score. Query tokens are summed with
  // multiplicity.
  CandidatePool search(std::string_view query_text, std::size_t k, std::string user_id = {}) const;

 private:
  struct Posting {
    std::uint32_t doc;
    std::uint32_t tf;
  };

  void build(const std::vector<std::string>& documents);

  Bm25Params params_;
  std::vector<std::string> doc_ids_;
  std::vector<std::uint32_t> doc_len_;
  double avg_len_ = 0.0;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
};

CandidatePool bm25_search(std::string_view query_text, const Catalog& catalog, const Bm25Params& params,
                          std::size_t k, std::string user_id = {});

// Top-k by popularity count, ties by ascending id. Score = popularity.
CandidatePool popularity_topk(const Catalog& catalog, std::size_t k, std::string user_id = {});

// k distinct items drawn uniformly without replacement. The sampled order is
// kept and encoded as strictly decreasing scores k, k-1, ..., 1.
CandidatePool random_topk(const Catalog& catalog, std::size_t k, std::uint64_t seed, std::string user_id = {});

// Union of pools for one user: each pool's scores are min-max normalized over
// its own entries (a constant pool maps to 1), an item keeps the max of its
// normalized scores, and the top k_total survive.
CandidatePool hybrid_union(std::span<const CandidatePool> pools, std::size_t k_total);

}  // namespace coldstart
