#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "coldstart/catalog.hpp"
#include "coldstart/config.hpp"
#include "coldstart/retrieval.hpp"
#include "coldstart/scoring.hpp"

namespace coldstart {

struct WorldSpec {
  std::size_t catalog_size = 5000;
  std::size_t user_count = 500;
  std::size_t embed_dim = 384;
  std::size_t latent_dim = 16;
  double zipf_exponent = 1.0;
  double alignment = 0.5;
  std::size_t gt_per_user = 10;
  double gt_popularity_mix = 0.5;
  double scorer_signal = 1.0;
  double scorer_item_bias = 0.0;
  double scorer_length_bias = 0.0;
  std::uint64_t seed = 42;

  // Scale of the Gumbel perturbation added to relevance before the GT top-k
  // cut. 0 makes GT the deterministic top-k of relevance.
  double relevance_noise = 1.0;
  // Fraction of the non-aligned query component shared by every user. Near-
  // identical cold-start profiles make vector pools overlap.
  double query_homogeneity = 0.0;
  // Expected interactions per item; total Zipf draws = mean_popularity · catalog_size.
  double mean_popularity = 20.0;
  // export_world writes scores for each user's top-depth vector candidates.
  std::size_t export_score_depth = 1000;
};

// Throws ValidationError describing the first violated constraint.
void validate(const WorldSpec& spec);

// Reads a [world] style section. Unknown keys are rejected.
WorldSpec world_spec_from_config(const ConfigSection& section, WorldSpec base = {});
// Serialized as a [world] section readable by world_spec_from_config.
std::string world_spec_to_config(const WorldSpec& spec);

class SyntheticWorld {
 public:
  WorldSpec spec;
  Catalog catalog;
  std::vector<UserRecord> users;
  EmbeddingSet item_embeddings;
  EmbeddingSet user_queries;  // one query vector per user id

  // Scorer parameters, indexed like catalog.
  std::vector<double> item_bias;     // standard normal draws
  std::vector<double> length_score;  // profile token count / catalog mean
  std::vector<double> popularity_score;

  std::size_t latent_dim() const { return spec.latent_dim; }
  std::span<const double> item_latent(std::size_t item) const;
  std::span<const double> user_latent(std::size_t user) const;

  // Noise-free relevance: mix·popularity_score + (1 − mix)·affinity.
  double relevance(std::size_t user, std::size_t item) const;
  double affinity(std::size_t user, std::size_t item) const;
  // signal·rel + item_bias·bias + length_bias·len + N(0,1); the noise term is
  // a deterministic function of (seed, user, item).
  double score(std::size_t user, std::size_t item) const;

  // Throws ValidationError for unknown ids.
  std::size_t user_index(std::string_view user_id) const;
  std::size_t item_index(std::string_view item_id) const;

 private:
  friend SyntheticWorld generate_world(const WorldSpec& spec);
  std::vector<double> item_latent_;
  std::vector<double> user_latent_;
  std::unordered_map<std::string, std::size_t> user_index_;
};

SyntheticWorld generate_world(const WorldSpec& spec);

double synthetic_scorer(const SyntheticWorld& world, const UserRecord& user, const Item& item);

class SyntheticScorer final : public PairScorer {
 public:
  explicit SyntheticScorer(const SyntheticWorld& world) : world_(&world) {}
  double score(const UserRecord& user, const std::string& item_id) const override;

 private:
  const SyntheticWorld* world_;
};

// Scores of every (user, item) in each user's exact vector top-depth list.
ScoreTable world_score_table(const SyntheticWorld& world, std::size_t depth);

// File names written by export_world.
inline constexpr std::string_view kWorldCatalog = "catalog.csv";
inline constexpr std::string_view kWorldUsers = "users.jsonl";
inline constexpr std::string_view kWorldEmbeddings = "embeddings.txt";
inline constexpr std::string_view kWorldQueries = "queries.txt";
inline constexpr std::string_view kWorldScores = "scores.jsonl";
inline constexpr std::string_view kWorldConfig = "world.cfg";

// Writes catalog.csv, users.jsonl, embeddings.txt, queries.txt, scores.jsonl
// and world.cfg into `dir` (created if missing).
void export_world(const SyntheticWorld& world, const std::filesystem::path& dir);

}  // namespace coldstart
