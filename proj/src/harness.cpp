#include "coldstart/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <regex>
#include <set>
#include <thread>

#include <fmt/core.h>

#include "coldstart/error.hpp"
#include "coldstart/random.hpp"
#include "json.hpp"

namespace coldstart {

using json = nlohmann::ordered_json;

std::string_view to_string(RetrieverKind kind) {
  switch (kind) {
    case RetrieverKind::random: return "random";
    case RetrieverKind::popularity: return "popularity";
    case RetrieverKind::vector: return "vector";
    case RetrieverKind::bm25: return "bm25";
    case RetrieverKind::hybrid: return "hybrid";
  }
  return "?";
}

std::string_view to_string(RerankerKind kind) {
  switch (kind) {
    case RerankerKind::none: return "none";
    case RerankerKind::score_table: return "score_table";
    case RerankerKind::synthetic: return "synthetic";
    case RerankerKind::ensemble: return "ensemble";
  }
  return "?";
}

RetrieverKind parse_retriever(std::string_view text) {
  const auto t = canonical_key(text);
  for (auto kind : {RetrieverKind::random, RetrieverKind::popularity, RetrieverKind::vector, RetrieverKind::bm25,
                    RetrieverKind::hybrid}) {
    if (t == to_string(kind)) return kind;
  }
  throw ValidationError(fmt::format("unknown retriever '{}' (random, popularity, vector, bm25, hybrid)", text));
}

RerankerKind parse_reranker(std::string_view text) {
  const auto t = canonical_key(text);
  for (auto kind : {RerankerKind::none, RerankerKind::score_table, RerankerKind::synthetic, RerankerKind::ensemble}) {
    if (t == to_string(kind)) return kind;
  }
  throw ValidationError(fmt::format("unknown reranker '{}' (none, score_table, synthetic, ensemble)", text));
}

void validate(const PipelineConfig& c) {
  if (c.name.empty()) throw ValidationError("pipeline name must not be empty");
  if (c.name == "meta") throw ValidationError("pipeline name 'meta' is reserved");
  if (c.k == 0) throw ValidationError(fmt::format("pipeline '{}': K must be >= 1", c.name));
  if (c.pool_size < c.k) {
    throw ValidationError(fmt::format("pipeline '{}': pool_size {} < K {}", c.name, c.pool_size, c.k));
  }
  if (c.calibration && !(c.calibration->temperature > 0.0)) {
    throw ValidationError(fmt::format("pipeline '{}': temperature must be > 0", c.name));
  }
  if (c.ensemble_weights) {
    const auto& w = *c.ensemble_weights;
    if (!std::isfinite(w.alpha) || !std::isfinite(w.beta) || !std::isfinite(w.gamma)) {
      throw ValidationError(fmt::format("pipeline '{}': ensemble weights must be finite", c.name));
    }
  }
  if (!(c.bm25.k1 >= 0.0) || !(c.bm25.b >= 0.0 && c.bm25.b <= 1.0)) {
    throw ValidationError(fmt::format("pipeline '{}': bm25 needs k1 >= 0 and b in [0,1]", c.name));
  }
}

PipelineConfig pipeline_from_config(const ConfigSection& section, PipelineConfig c) {
  section.require_known({"retriever", "reranker", "pool_size", "k", "temperature", "platt_a", "platt_b", "alpha",
                         "beta", "gamma", "ensemble_normalized", "bm25_k1", "bm25_b"});
  if (auto v = section.get("retriever")) c.retriever = parse_retriever(*v);
  if (auto v = section.get("reranker")) c.reranker = parse_reranker(*v);
  if (auto v = section.get_count("pool_size")) c.pool_size = *v;
  if (auto v = section.get_count("k")) c.k = *v;
  if (section.has("temperature") || section.has("platt_a") || section.has("platt_b")) {
    CalibrationParams p = c.calibration.value_or(CalibrationParams{});
    if (auto v = section.get_double("temperature")) p.temperature = *v;
    if (auto v = section.get_double("platt_a")) p.platt_a = *v;
    if (auto v = section.get_double("platt_b")) p.platt_b = *v;
    c.calibration = p;
  }
  if (section.has("alpha") || section.has("beta") || section.has("gamma")) {
    EnsembleWeights w = c.ensemble_weights.value_or(EnsembleWeights{});
    if (auto v = section.get_double("alpha")) w.alpha = *v;
    if (auto v = section.get_double("beta")) w.beta = *v;
    if (auto v = section.get_double("gamma")) w.gamma = *v;
    c.ensemble_weights = w;
  }
  if (auto v = section.get_bool("ensemble_normalized")) c.ensemble_normalized = *v;
  if (auto v = section.get_double("bm25_k1")) c.bm25.k1 = *v;
  if (auto v = section.get_double("bm25_b")) c.bm25.b = *v;
  return c;
}

std::vector<PipelineConfig> standard_pipelines(std::size_t pool_size, RerankerKind reranker, std::size_t k) {
  std::vector<PipelineConfig> out;
  auto add = [&](std::string name, RetrieverKind r, RerankerKind rr, std::size_t pool) {
    PipelineConfig c;
    c.name = std::move(name);
    c.retriever = r;
    c.reranker = rr;
    c.pool_size = pool;
    c.k = k;
    out.push_back(std::move(c));
  };
  add("Random", RetrieverKind::random, RerankerKind::none, k);
  add("Popularity", RetrieverKind::popularity, RerankerKind::none, k);
  add("Embedding Cosine", RetrieverKind::vector, RerankerKind::none, k);
  add("Candidates Only", RetrieverKind::vector, RerankerKind::none, pool_size);
  add("CE Rerank", RetrieverKind::vector, reranker, pool_size);
  for (const auto& c : out) validate(c);
  return out;
}

void check_inputs(const PipelineConfig& config, const PipelineInputs& in) {
  auto missing = [&](std::string_view what) {
    return ValidationError(fmt::format("pipeline '{}' needs {}", config.name, what));
  };
  if (!in.catalog || in.catalog->empty()) throw missing("a non-empty catalog");
  const bool needs_vectors = config.retriever == RetrieverKind::vector || config.retriever == RetrieverKind::hybrid;
  if (needs_vectors) {
    if (!in.item_embeddings) throw missing("item embeddings");
    if (!in.user_queries) throw missing("user query embeddings");
    if (in.item_embeddings->dim() != in.user_queries->dim()) {
      throw ValidationError(fmt::format("pipeline '{}': item embeddings have dim {} but queries have dim {}",
                                        config.name, in.item_embeddings->dim(), in.user_queries->dim()));
    }
  }
  if ((config.retriever == RetrieverKind::bm25 || config.retriever == RetrieverKind::hybrid) && !in.bm25) {
    throw missing("a BM25 index");
  }
  if (config.reranker != RerankerKind::none && !scorer_for(config, in)) {
    throw missing(config.reranker == RerankerKind::synthetic ? "a synthetic world scorer" : "a reranker score file");
  }
}

const PairScorer* scorer_for(const PipelineConfig& config, const PipelineInputs& in) {
  switch (config.reranker) {
    case RerankerKind::none: return nullptr;
    case RerankerKind::score_table: return in.table_scorer;
    case RerankerKind::synthetic: return in.synthetic_scorer;
    case RerankerKind::ensemble: return in.table_scorer ? in.table_scorer : in.synthetic_scorer;
  }
  return nullptr;
}

std::vector<UserRecord> sample_users(std::span<const UserRecord> all, std::size_t n, std::uint64_t seed) {
  if (n > all.size()) {
    throw ValidationError(fmt::format("cannot sample {} users from {}", n, all.size()));
  }
  Rng rng(derive_seed(seed, {fnv1a64("sample_users")}));
  std::vector<std::size_t> idx(all.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::vector<UserRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + rng.index(idx.size() - i);
    std::swap(idx[i], idx[j]);
    out.push_back(all[idx[i]]);
  }
  return out;
}

std::size_t default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      if (failed.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

namespace {

CandidatePool prefix(const CandidatePool& ranking, std::size_t n) {
  CandidatePool out{ranking.user_id, {}, n};
  const auto take = std::min(n, ranking.entries.size());
  out.entries.assign(ranking.entries.begin(), ranking.entries.begin() + static_cast<std::ptrdiff_t>(take));
  return out;
}

struct UserOutcome {
  PerUserResult result;
  CandidatePool pool;
  RankedList list;
};

UserOutcome process_user(const PipelineConfig& config, const UserRecord& user, std::size_t ordinal,
                         std::uint64_t seed, const PipelineInputs& in, std::span<const std::size_t> cutoffs) {
  const Catalog& catalog = *in.catalog;
  std::size_t depth = config.pool_size;
  for (std::size_t c : cutoffs) depth = std::max(depth, c);
  depth = std::min(depth, catalog.size());

  std::span<const double> query;
  if (config.retriever == RetrieverKind::vector || config.retriever == RetrieverKind::hybrid ||
      (config.reranker == RerankerKind::ensemble && in.user_queries && in.item_embeddings)) {
    auto row = in.user_queries ? in.user_queries->index_of(user.id) : std::nullopt;
    if (row) {
      query = in.user_queries->vector(*row);
    } else if (config.retriever == RetrieverKind::vector || config.retriever == RetrieverKind::hybrid) {
      throw ValidationError(fmt::format("no query embedding for user '{}'", user.id));
    }
  }

  // Retrieval ranking deep enough for every recall cutoff; the pool is its prefix.
  CandidatePool ranking;
  std::vector<CandidatePool> hybrid_parts;
  switch (config.retriever) {
    case RetrieverKind::random:
      ranking = random_topk(catalog, depth, derive_seed(seed, {fnv1a64(config.name), ordinal}), user.id);
      break;
    case RetrieverKind::popularity:
      ranking = popularity_topk(catalog, depth, user.id);
      break;
    case RetrieverKind::vector:
      ranking = flat_search(query, *in.item_embeddings, depth, user.id);
      break;
    case RetrieverKind::bm25:
      ranking = in.bm25->search(user.profile_text, depth, user.id);
      break;
    case RetrieverKind::hybrid:
      hybrid_parts.push_back(flat_search(query, *in.item_embeddings, depth, user.id));
      hybrid_parts.push_back(in.bm25->search(user.profile_text, depth, user.id));
      break;
  }

  auto depth_pool = [&](std::size_t n) {
    if (config.retriever != RetrieverKind::hybrid) return prefix(ranking, n);
    const std::vector<CandidatePool> parts = {prefix(hybrid_parts[0], n), prefix(hybrid_parts[1], n)};
    CandidatePool merged = hybrid_union(parts, n);
    merged.user_id = user.id;
    return merged;
  };

  UserOutcome out;
  out.result.user_id = user.id;
  for (std::size_t c : cutoffs) out.result.recall_at[c] = recall_at_k(depth_pool(c), user.gt_items, c);
  out.pool = depth_pool(config.pool_size);
  out.pool.pool_size = config.pool_size;

  if (config.reranker == RerankerKind::none) {
    out.list = truncate_pool(out.pool, config.k);
  } else {
    const PairScorer& scorer = *scorer_for(config, in);
    const auto start = std::chrono::steady_clock::now();
    std::vector<double> scores(out.pool.entries.size());
    for (std::size_t j = 0; j < scores.size(); ++j) {
      double s = scorer.score(user, out.pool.entries[j].item_id);
      if (config.calibration) {
        s = platt_calibrate(temperature_scale(s, config.calibration->temperature), *config.calibration);
      }
      scores[j] = s;
    }
    if (config.reranker == RerankerKind::ensemble) {
      std::vector<std::int64_t> popularity(scores.size());
      std::vector<double> sims(scores.size(), 0.0);
      for (std::size_t j = 0; j < scores.size(); ++j) {
        const auto& id = out.pool.entries[j].item_id;
        popularity[j] = catalog.at(id).popularity;
        if (!query.empty()) {
          if (auto row = in.item_embeddings->index_of(id)) sims[j] = dot(query, in.item_embeddings->vector(*row));
        }
      }
      scores = ensemble_scores(scores, popularity, sims, config.ensemble_weights.value_or(EnsembleWeights{}),
                               config.ensemble_normalized);
    }
    out.list = rerank_by(out.pool, scores, config.k);
    out.result.rerank_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }

  out.result.hit = hit_at_k(out.list.entries, user.gt_items, config.k);
  out.result.ndcg = ndcg_at_k(out.list.entries, user.gt_items, config.k);
  if (!out.list.entries.empty()) out.result.top1_item = out.list.entries.front().item_id;
  return out;
}

}  // namespace

PipelineRun run_pipeline(const PipelineConfig& config, std::span<const UserRecord> users,
                         const PipelineInputs& inputs, std::uint64_t seed, const RunOptions& options) {
  validate(config);
  check_inputs(config, inputs);
  PipelineRun run;
  run.config = config;
  run.seed = seed;
  run.results.resize(users.size());
  if (options.keep_pools) run.pools.resize(users.size());
  if (options.keep_lists) run.lists.resize(users.size());
  parallel_for(users.size(), options.workers, [&](std::size_t u) {
    auto outcome = process_user(config, users[u], u, seed, inputs, options.recall_cutoffs);
    run.results[u] = std::move(outcome.result);
    if (options.keep_pools) run.pools[u] = std::move(outcome.pool);
    if (options.keep_lists) run.lists[u] = std::move(outcome.list);
  });
  return run;
}

std::vector<std::string> metric_names(std::size_t k, std::span<const std::size_t> cutoffs) {
  std::vector<std::string> names = {fmt::format("HR@{}", k), fmt::format("nDCG@{}", k)};
  for (std::size_t c : cutoffs) names.push_back(fmt::format("Recall@{}", c));
  names.insert(names.end(), {"UniqueTop1", "Gini", "RerankSeconds"});
  return names;
}

std::map<std::string, double> summarize(std::span<const PerUserResult> results, std::size_t k) {
  std::map<std::string, double> m;
  const auto n = static_cast<double>(results.size());
  double hits = 0.0, ndcg = 0.0, seconds = 0.0;
  std::map<std::size_t, std::pair<double, std::size_t>> recall;
  std::vector<std::string> top1;
  for (const auto& r : results) {
    hits += r.hit ? 1.0 : 0.0;
    ndcg += r.ndcg;
    seconds += r.rerank_seconds;
    for (const auto& [c, v] : r.recall_at) {
      auto& acc = recall[c];
      if (v) {
        acc.first += *v;
        ++acc.second;
      }
    }
    if (r.top1_item) top1.push_back(*r.top1_item);
  }
  m[fmt::format("HR@{}", k)] = results.empty() ? 0.0 : hits / n;
  m[fmt::format("nDCG@{}", k)] = results.empty() ? 0.0 : ndcg / n;
  for (const auto& [c, acc] : recall) {
    m[fmt::format("Recall@{}", c)] = acc.second ? acc.first / static_cast<double>(acc.second) : 0.0;
  }
  const auto exposure = exposure_report_from_top1(top1);
  m["UniqueTop1"] = static_cast<double>(exposure.unique_top1);
  m["Gini"] = exposure.gini;
  m["RerankSeconds"] = results.empty() ? 0.0 : seconds / n;
  return m;
}

MetricSummary summarize_metric(std::string name, std::vector<double> per_seed) {
  MetricSummary s;
  s.name = std::move(name);
  if (!per_seed.empty()) {
    s.mean = std::accumulate(per_seed.begin(), per_seed.end(), 0.0) / static_cast<double>(per_seed.size());
  }
  if (per_seed.size() >= 2) {
    double ss = 0.0;
    for (double v : per_seed) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(per_seed.size() - 1));
  }
  s.per_seed = std::move(per_seed);
  return s;
}

const MetricSummary* PipelineAggregate::find(std::string_view metric) const {
  for (const auto& m : metrics) {
    if (m.name == metric) return &m;
  }
  return nullptr;
}

const PipelineAggregate* AggregateResult::find(std::string_view pipeline) const {
  for (const auto& p : pipelines) {
    if (p.name == pipeline) return &p;
  }
  return nullptr;
}

namespace {

std::string log_stem(std::string_view pipeline) {
  std::string stem(pipeline);
  for (char& c : stem) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                    c == '_' || c == '-';
    if (!ok) c = '_';
  }
  return stem;
}

}  // namespace

std::string log_file_name(std::string_view pipeline, std::uint64_t seed) {
  return fmt::format("{}__seed{}.jsonl", log_stem(pipeline), seed);
}

void write_run_log(std::span<const PerUserResult> results, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  for (const auto& r : results) out << to_jsonl_line(r) << '\n';
  out.flush();
  if (!out) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

std::vector<PerUserResult> read_run_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}' for reading", path.string()));
  std::vector<PerUserResult> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(per_user_from_jsonl(line, path.string(), line_no));
  }
  return out;
}

namespace {

void write_json_file(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  out << j.dump(2) << '\n';
  out.flush();
  if (!out) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}' for reading", path.string()));
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  }
}

}  // namespace

void write_master_json(const AggregateResult& agg, const std::filesystem::path& path) {
  json j = json::object();
  for (const auto& p : agg.pipelines) {
    json metrics = json::object();
    for (const auto& m : p.metrics) {
      json cell;
      cell["mean"] = m.mean;
      if (m.sd) cell["sd"] = *m.sd;
      metrics[m.name] = std::move(cell);
    }
    j[p.name] = std::move(metrics);
  }
  json meta;
  meta["seeds"] = agg.seeds;
  meta["n_users"] = agg.n_users;
  meta["pool_size"] = agg.pool_size;
  j["meta"] = std::move(meta);
  write_json_file(j, path);
}

AggregateResult read_master_json(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  AggregateResult agg;
  try {
    for (const auto& [name, metrics] : j.items()) {
      if (name == "meta") {
        agg.seeds = metrics.at("seeds").get<std::vector<std::uint64_t>>();
        agg.n_users = metrics.at("n_users").get<std::size_t>();
        agg.pool_size = metrics.at("pool_size").get<std::size_t>();
        continue;
      }
      PipelineAggregate p;
      p.name = name;
      for (const auto& [metric, cell] : metrics.items()) {
        MetricSummary m;
        m.name = metric;
        m.mean = cell.at("mean").get<double>();
        if (cell.contains("sd") && !cell["sd"].is_null()) m.sd = cell["sd"].get<double>();
        p.metrics.push_back(std::move(m));
      }
      agg.pipelines.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  }
  return agg;
}

AggregateResult aggregate_runs(std::span<const std::filesystem::path> log_dirs, std::size_t k,
                               std::span<const std::size_t> cutoffs) {
  if (log_dirs.empty()) throw ValidationError("aggregate_runs: no log directories");
  static const std::regex kLogName(R"((.+)__seed(\d+)\.jsonl)");

  // stem -> display name, from pipelines.json when present
  std::map<std::string, std::string> display;
  std::vector<std::string> order;
  for (const auto& dir : log_dirs) {
    const auto manifest = dir / kPipelinesJson;
    if (!std::filesystem::exists(manifest)) continue;
    const json j = read_json_file(manifest);
    for (const auto& name : j) {
      const auto n = name.get<std::string>();
      const std::string stem = log_stem(n);
      if (!display.count(stem)) order.push_back(stem);
      display[stem] = n;
    }
  }

  std::map<std::string, std::map<std::uint64_t, std::filesystem::path>> logs;
  for (const auto& dir : log_dirs) {
    if (!std::filesystem::is_directory(dir)) throw IoError(fmt::format("'{}' is not a directory", dir.string()));
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      std::smatch m;
      const std::string fname = file.filename().string();
      if (!std::regex_match(fname, m, kLogName)) continue;
      const auto seed = static_cast<std::uint64_t>(std::stoull(m[2].str()));
      auto& per_seed = logs[m[1].str()];
      if (per_seed.count(seed)) {
        throw ValidationError(fmt::format("duplicate log for pipeline '{}' seed {}", m[1].str(), seed));
      }
      per_seed[seed] = file;
    }
  }
  if (logs.empty()) throw ValidationError("aggregate_runs: no <pipeline>__seed<S>.jsonl logs found");
  for (const auto& [stem, _] : logs) {
    if (std::find(order.begin(), order.end(), stem) == order.end()) order.push_back(stem);
  }

  AggregateResult agg;
  std::optional<std::set<std::uint64_t>> seed_set;
  for (const auto& stem : order) {
    auto it = logs.find(stem);
    if (it == logs.end()) continue;
    std::set<std::uint64_t> seeds;
    for (const auto& [seed, _] : it->second) seeds.insert(seed);
    if (seed_set && *seed_set != seeds) {
      throw ValidationError(fmt::format("inconsistent pipeline sets across seeds: '{}' has a different seed set", stem));
    }
    seed_set = seeds;
  }
  agg.seeds.assign(seed_set->begin(), seed_set->end());
  if (auto master = log_dirs.front() / kMasterJson; std::filesystem::exists(master)) {
    try {
      const auto previous = read_master_json(master);
      agg.pool_size = previous.pool_size;
      if (std::set<std::uint64_t>(previous.seeds.begin(), previous.seeds.end()) == *seed_set) {
        agg.seeds = previous.seeds;
      }
    } catch (const Error&) {
      // an unreadable master is regenerated
    }
  }

  const auto names = metric_names(k, cutoffs);
  for (const auto& stem : order) {
    auto it = logs.find(stem);
    if (it == logs.end()) continue;
    PipelineAggregate p;
    p.name = display.count(stem) ? display[stem] : stem;
    std::map<std::string, std::vector<double>> values;
    for (std::uint64_t seed : agg.seeds) {
      const auto& path = it->second.at(seed);
      const auto results = read_run_log(path);
      agg.n_users = std::max(agg.n_users, results.size());
      const auto summary = summarize(results, k);
      for (const auto& name : names) {
        auto s = summary.find(name);
        values[name].push_back(s == summary.end() ? 0.0 : s->second);
      }
      p.logs.push_back(path);
    }
    for (const auto& name : names) p.metrics.push_back(summarize_metric(name, values[name]));
    agg.pipelines.push_back(std::move(p));
  }
  write_master_json(agg, log_dirs.front() / kMasterJson);
  return agg;
}

void validate(const RunSpec& spec) {
  if (spec.seeds.empty()) throw ValidationError("run spec needs at least one seed");
  if (spec.n_users == 0) throw ValidationError("n_users must be >= 1");
  if (spec.pipelines.empty()) throw ValidationError("run spec needs at least one pipeline");
  std::set<std::string> names, files;
  for (const auto& p : spec.pipelines) {
    validate(p);
    if (!names.insert(p.name).second) throw ValidationError(fmt::format("duplicate pipeline name '{}'", p.name));
    if (!files.insert(log_stem(p.name)).second) {
      throw ValidationError(fmt::format("pipeline name '{}' collides with another after sanitizing", p.name));
    }
  }
  if (std::set<std::uint64_t>(spec.seeds.begin(), spec.seeds.end()).size() != spec.seeds.size()) {
    throw ValidationError("duplicate seeds");
  }
  if (spec.pool_sizes_ablation) {
    if (spec.pool_sizes_ablation->empty()) throw ValidationError("pool_sizes list is empty");
    for (std::size_t p : *spec.pool_sizes_ablation) {
      if (p == 0) throw ValidationError("pool sizes must be >= 1");
    }
  }
}

AggregateResult run_experiment(const RunSpec& spec, std::span<const UserRecord> users, const PipelineInputs& inputs) {
  validate(spec);
  for (const auto& p : spec.pipelines) check_inputs(p, inputs);
  if (!spec.output_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(spec.output_dir, ec);
    if (ec) throw IoError(fmt::format("cannot create '{}': {}", spec.output_dir.string(), ec.message()));
  }

  RunOptions options;
  options.workers = spec.workers;
  options.recall_cutoffs = spec.recall_cutoffs;

  const std::size_t k = spec.pipelines.front().k;
  const auto names = metric_names(k, spec.recall_cutoffs);
  std::vector<std::map<std::string, std::vector<double>>> values(spec.pipelines.size());
  AggregateResult agg;
  agg.seeds = spec.seeds;
  agg.n_users = spec.n_users;
  for (const auto& p : spec.pipelines) agg.pool_size = std::max(agg.pool_size, p.pool_size);
  agg.pipelines.resize(spec.pipelines.size());

  for (std::uint64_t seed : spec.seeds) {
    const auto sample = sample_users(users, spec.n_users, seed);
    for (std::size_t p = 0; p < spec.pipelines.size(); ++p) {
      const auto& config = spec.pipelines[p];
      const auto run = run_pipeline(config, sample, inputs, seed, options);
      if (!spec.output_dir.empty()) {
        const auto path = spec.output_dir / log_file_name(config.name, seed);
        write_run_log(run.results, path);
        agg.pipelines[p].logs.push_back(path);
      }
      const auto summary = summarize(run.results, config.k);
      for (const auto& [name, value] : summary) {
        // HR/nDCG are keyed by the run-wide K so tables line up across pipelines
        std::string key = name;
        if (config.k != k) {
          if (name.starts_with("HR@")) key = fmt::format("HR@{}", k);
          if (name.starts_with("nDCG@")) key = fmt::format("nDCG@{}", k);
        }
        values[p][key].push_back(value);
      }
    }
  }

  for (std::size_t p = 0; p < spec.pipelines.size(); ++p) {
    agg.pipelines[p].name = spec.pipelines[p].name;
    for (const auto& name : names) agg.pipelines[p].metrics.push_back(summarize_metric(name, values[p][name]));
  }
  if (!spec.output_dir.empty()) {
    json manifest = json::array();
    for (const auto& p : spec.pipelines) manifest.push_back(p.name);
    write_json_file(manifest, spec.output_dir / kPipelinesJson);
    write_master_json(agg, spec.output_dir / kMasterJson);
  }
  return agg;
}

AblationTable run_ablation(const RunSpec& spec, std::span<const UserRecord> users, const PipelineInputs& inputs) {
  validate(spec);
  if (!spec.pool_sizes_ablation) throw ValidationError("ablation needs pool sizes");
  auto base = std::find_if(spec.pipelines.begin(), spec.pipelines.end(),
                           [](const PipelineConfig& p) { return p.reranker != RerankerKind::none; });
  if (base == spec.pipelines.end()) throw ValidationError("ablation needs a pipeline with a reranker");

  std::filesystem::path dir;
  if (!spec.output_dir.empty()) {
    dir = spec.output_dir / "ablation";
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
  }

  RunOptions options;
  options.workers = spec.workers;
  options.recall_cutoffs = spec.recall_cutoffs;

  AblationTable table;
  table.pipeline = base->name;
  table.k = base->k;
  std::vector<std::vector<UserRecord>> samples;
  for (std::uint64_t seed : spec.seeds) samples.push_back(sample_users(users, spec.n_users, seed));

  for (std::size_t pool : *spec.pool_sizes_ablation) {
    PipelineConfig config = *base;
    config.pool_size = pool;
    config.name = fmt::format("{} pool{}", base->name, pool);
    validate(config);
    check_inputs(config, inputs);
    std::vector<double> hr, ndcg, seconds;
    for (std::size_t s = 0; s < spec.seeds.size(); ++s) {
      const auto run = run_pipeline(config, samples[s], inputs, spec.seeds[s], options);
      if (!dir.empty()) write_run_log(run.results, dir / fmt::format("pool{}__seed{}.jsonl", pool, spec.seeds[s]));
      const auto summary = summarize(run.results, config.k);
      hr.push_back(summary.at(fmt::format("HR@{}", config.k)));
      ndcg.push_back(summary.at(fmt::format("nDCG@{}", config.k)));
      seconds.push_back(summary.at("RerankSeconds"));
    }
    AblationRow row;
    row.pool_size = pool;
    row.hr = summarize_metric(fmt::format("HR@{}", config.k), std::move(hr));
    row.ndcg = summarize_metric(fmt::format("nDCG@{}", config.k), std::move(ndcg));
    row.rerank_seconds = summarize_metric("RerankSeconds", std::move(seconds));
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace coldstart
