#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coldstart/catalog.hpp"
#include "coldstart/config.hpp"
#include "coldstart/metrics.hpp"
#include "coldstart/retrieval.hpp"
#include "coldstart/scoring.hpp"

namespace coldstart {

enum class RetrieverKind { random, popularity, vector, bm25, hybrid };
enum class RerankerKind { none, score_table, synthetic, ensemble };

std::string_view to_string(RetrieverKind kind);
std::string_view to_string(RerankerKind kind);
RetrieverKind parse_retriever(std::string_view text);
RerankerKind parse_reranker(std::string_view text);

struct PipelineConfig {
  std::string name;
  RetrieverKind retriever = RetrieverKind::vector;
  RerankerKind reranker = RerankerKind::none;
  std::size_t pool_size = 200;
  std::size_t k = kDefaultK;
  std::optional<CalibrationParams> calibration;
  std::optional<EnsembleWeights> ensemble_weights;
  bool ensemble_normalized = false;
  Bm25Params bm25;
};

// Throws ValidationError (pool_size < k, k == 0, empty or reserved name, ...).
void validate(const PipelineConfig& config);

// Applies keys of a [pipeline.NAME] section on top of `base`.
PipelineConfig pipeline_from_config(const ConfigSection& section, PipelineConfig base);

// The five reference configurations, in table order: Random, Popularity,
// Embedding Cosine (vector, pool = K), Candidates Only (vector, pool_size),
// CE Rerank (vector, pool_size, `reranker`).
std::vector<PipelineConfig> standard_pipelines(std::size_t pool_size, RerankerKind reranker = RerankerKind::score_table,
                                               std::size_t k = kDefaultK);

inline const std::vector<std::size_t> kDefaultRecallCutoffs = {50, 200, 1000};
inline const std::vector<std::uint64_t> kDefaultSeeds = {42, 7, 123};

// Read-only resources shared by every user task. Only what the configured
// retriever/reranker needs has to be present.
struct PipelineInputs {
  const Catalog* catalog = nullptr;
  const EmbeddingSet* item_embeddings = nullptr;
  const EmbeddingSet* user_queries = nullptr;
  const Bm25Index* bm25 = nullptr;
  const PairScorer* table_scorer = nullptr;      // reranker = score_table
  const PairScorer* synthetic_scorer = nullptr;  // reranker = synthetic
};

// Score source for the configured reranker; ensemble prefers the table.
const PairScorer* scorer_for(const PipelineConfig& config, const PipelineInputs& inputs);

// Throws ValidationError naming the missing resource.
void check_inputs(const PipelineConfig& config, const PipelineInputs& inputs);

// Uniform sample without replacement, returned in sampling order.
std::vector<UserRecord> sample_users(std::span<const UserRecord> all, std::size_t n, std::uint64_t seed);

struct RunOptions {
  std::size_t workers = 1;
  std::vector<std::size_t> recall_cutoffs = kDefaultRecallCutoffs;
  bool keep_pools = false;
  bool keep_lists = false;
};

struct PipelineRun {
  PipelineConfig config;
  std::uint64_t seed = 0;
  std::vector<PerUserResult> results;  // in user order
  std::vector<CandidatePool> pools;    // filled when keep_pools
  std::vector<RankedList> lists;       // filled when keep_lists
};

// Retrieve → optional rerank → top-K for every user. Rankings are a pure
// function of (config, users, inputs, seed); only timings vary.
PipelineRun run_pipeline(const PipelineConfig& config, std::span<const UserRecord> users,
                         const PipelineInputs& inputs, std::uint64_t seed, const RunOptions& options = {});

// Calls fn(i) for i in [0, n) on up to `workers` threads. The first exception
// thrown by any task is rethrown after all threads finish.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

std::size_t default_workers();

// ---- aggregation ---------------------------------------------------------------

// Metric names: HR@K, nDCG@K, Recall@<c> per cutoff, UniqueTop1, Gini,
// RerankSeconds.
std::vector<std::string> metric_names(std::size_t k, std::span<const std::size_t> cutoffs);
std::map<std::string, double> summarize(std::span<const PerUserResult> results, std::size_t k);

struct MetricSummary {
  std::string name;
  double mean = 0.0;
  std::optional<double> sd;  // sample sd, present for >= 2 seeds
  std::vector<double> per_seed;
};

struct PipelineAggregate {
  std::string name;
  std::vector<MetricSummary> metrics;
  std::vector<std::filesystem::path> logs;  // one per seed, seed order

  const MetricSummary* find(std::string_view metric) const;
};

struct AggregateResult {
  std::vector<PipelineAggregate> pipelines;
  std::vector<std::uint64_t> seeds;
  std::size_t n_users = 0;
  std::size_t pool_size = 0;

  const PipelineAggregate* find(std::string_view pipeline) const;
};

// Mean and sample sd of per-seed values; sd is absent for one value.
MetricSummary summarize_metric(std::string name, std::vector<double> per_seed);

// Log file name for (pipeline, seed): non [A-Za-z0-9._-] characters become '_'.
std::string log_file_name(std::string_view pipeline, std::uint64_t seed);

inline constexpr std::string_view kMasterJson = "master.json";
inline constexpr std::string_view kPipelinesJson = "pipelines.json";

// {pipeline → {metric → {mean, sd}}, meta: {seeds, n_users, pool_size}}
void write_master_json(const AggregateResult& agg, const std::filesystem::path& path);
AggregateResult read_master_json(const std::filesystem::path& path);

// Reads every <pipeline>__seed<S>.jsonl under the directories, recomputes
// per-seed metrics and writes master.json into the first directory.
// Throws ValidationError when pipelines were not run on the same seed set.
AggregateResult aggregate_runs(std::span<const std::filesystem::path> log_dirs, std::size_t k = kDefaultK,
                               std::span<const std::size_t> cutoffs = kDefaultRecallCutoffs);

std::vector<PerUserResult> read_run_log(const std::filesystem::path& path);
void write_run_log(std::span<const PerUserResult> results, const std::filesystem::path& path);

// ---- experiments ----------------------------------------------------------------

struct RunSpec {
  std::size_t n_users = 500;
  std::vector<std::uint64_t> seeds = kDefaultSeeds;
  std::vector<PipelineConfig> pipelines;
  std::optional<std::vector<std::size_t>> pool_sizes_ablation;
  std::filesystem::path output_dir;
  std::size_t workers = 1;
  std::vector<std::size_t> recall_cutoffs = kDefaultRecallCutoffs;
};

void validate(const RunSpec& spec);

// Runs every pipeline for every seed on the seed's user sample, writes the
// per-(pipeline, seed) logs, pipelines.json and master.json into output_dir.
AggregateResult run_experiment(const RunSpec& spec, std::span<const UserRecord> users, const PipelineInputs& inputs);

struct AblationRow {
  std::size_t pool_size = 0;
  MetricSummary hr;
  MetricSummary ndcg;
  MetricSummary rerank_seconds;
};

struct AblationTable {
  std::string pipeline;
  std::size_t k = kDefaultK;
  std::vector<AblationRow> rows;  // in pool_sizes_ablation order
};

// One run per pool size per seed of the first reranking pipeline in the spec.
// Logs go to output_dir/ablation/pool<P>__seed<S>.jsonl when output_dir is set.
AblationTable run_ablation(const RunSpec& spec, std::span<const UserRecord> users, const PipelineInputs& inputs);

}  // namespace coldstart
