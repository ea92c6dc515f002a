#include "coldstart/cli.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>

#include <fmt/core.h>

#include "CLI11.hpp"
#include "coldstart/catalog.hpp"
#include "coldstart/config.hpp"
#include "coldstart/error.hpp"
#include "coldstart/harness.hpp"
#include "coldstart/metrics.hpp"
#include "coldstart/random.hpp"
#include "coldstart/report.hpp"
#include "coldstart/retrieval.hpp"
#include "coldstart/scoring.hpp"
#include "coldstart/stats.hpp"
#include "coldstart/synthgen.hpp"
#include "json.hpp"

namespace coldstart {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// Raw flag values; unset optionals / empty lists mean "not given".
struct Flags {
  std::string config;
  std::optional<std::size_t> n_users;
  std::vector<std::uint64_t> seeds;
  std::vector<std::size_t> pool_sizes;
  std::optional<std::size_t> k;
  std::string catalog, users, embeddings, queries, scores, out, world;
  std::optional<std::size_t> workers;
  std::optional<std::size_t> bootstrap;
};

struct Settings {
  std::size_t n_users = 500;
  std::vector<std::uint64_t> seeds = kDefaultSeeds;
  std::vector<std::size_t> pool_sizes;
  std::size_t k = kDefaultK;
  std::optional<fs::path> catalog, users, embeddings, queries, scores, out, world;
  std::size_t workers = default_workers();
  std::size_t bootstrap = kDefaultBootstrap;
  Config config;
};

std::optional<fs::path> path_or(const std::string& flag, const ConfigSection& run, std::string_view key) {
  if (!flag.empty()) return fs::path(flag);
  if (auto v = run.get(key)) return fs::path(*v);
  return std::nullopt;
}

Settings resolve(const Flags& f) {
  Settings s;
  if (!f.config.empty()) s.config = Config::load(f.config);
  const ConfigSection& run = s.config.section_or_empty("run");
  run.require_known({"n_users", "seeds", "pool_sizes", "k", "catalog", "users", "embeddings", "queries", "scores",
                     "out", "world", "workers", "bootstrap"});
  if (const auto* top = s.config.section(""); top && !top->entries().empty()) {
    throw ValidationError(fmt::format("config key '{}' must be inside a section such as [run]",
                                      top->entries().front().first));
  }
  for (const auto& section : s.config.sections()) {
    const auto& name = section.name();
    if (!name.empty() && name != "run" && name != "world" && !name.starts_with("pipeline.")) {
      throw ValidationError(fmt::format("unknown config section [{}]", name));
    }
  }

  if (auto v = run.get_count("n_users")) s.n_users = *v;
  if (auto v = run.get_u64_list("seeds")) s.seeds = *v;
  if (auto v = run.get_count_list("pool_sizes")) s.pool_sizes = *v;
  if (auto v = run.get_count("k")) s.k = *v;
  if (auto v = run.get_count("workers")) s.workers = *v;
  if (auto v = run.get_count("bootstrap")) s.bootstrap = *v;

  if (f.n_users) s.n_users = *f.n_users;
  if (!f.seeds.empty()) s.seeds = f.seeds;
  if (!f.pool_sizes.empty()) s.pool_sizes = f.pool_sizes;
  if (f.k) s.k = *f.k;
  if (f.workers) s.workers = *f.workers;
  if (f.bootstrap) s.bootstrap = *f.bootstrap;

  s.catalog = path_or(f.catalog, run, "catalog");
  s.users = path_or(f.users, run, "users");
  s.embeddings = path_or(f.embeddings, run, "embeddings");
  s.queries = path_or(f.queries, run, "queries");
  s.scores = path_or(f.scores, run, "scores");
  s.out = path_or(f.out, run, "out");
  s.world = path_or(f.world, run, "world");

  // A synthetic world directory supplies any input not given explicitly.
  if (s.world) {
    auto fill = [&](std::optional<fs::path>& slot, std::string_view file) {
      if (!slot && fs::exists(*s.world / file)) slot = *s.world / file;
    };
    fill(s.catalog, kWorldCatalog);
    fill(s.users, kWorldUsers);
    fill(s.embeddings, kWorldEmbeddings);
    fill(s.queries, kWorldQueries);
    fill(s.scores, kWorldScores);
  }
  if (s.workers == 0) s.workers = default_workers();
  if (s.k == 0) throw ValidationError("--k must be >= 1");
  return s;
}

const fs::path& require(const std::optional<fs::path>& p, std::string_view flag) {
  if (!p) throw ValidationError(fmt::format("missing required {}", flag));
  return *p;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
}

// Everything a run may need, loaded once.
struct Workspace {
  Catalog catalog;
  std::vector<UserRecord> users;
  std::optional<EmbeddingSet> embeddings;
  std::optional<EmbeddingSet> queries;
  std::optional<ScoreTable> scores;
  std::unique_ptr<TableScorer> table_scorer;
  std::optional<SyntheticWorld> world;
  std::unique_ptr<SyntheticScorer> synthetic_scorer;
  std::unique_ptr<Bm25Index> bm25;

  PipelineInputs inputs() const {
    PipelineInputs in;
    in.catalog = &catalog;
    in.item_embeddings = embeddings ? &*embeddings : nullptr;
    in.user_queries = queries ? &*queries : nullptr;
    in.bm25 = bm25.get();
    in.table_scorer = table_scorer.get();
    in.synthetic_scorer = synthetic_scorer.get();
    return in;
  }
};

struct LoadWants {
  bool scores = true;
  bool synthetic = false;
  bool bm25 = false;
};

Workspace load_workspace(const Settings& s, std::ostream& err, LoadWants wants) {
  Workspace w;
  const auto& catalog_path = require(s.catalog, "--catalog");
  w.catalog = load_catalog(catalog_path, catalog_format_for(catalog_path));
  w.users = load_users(require(s.users, "--users"));
  const auto report = validate_users(w.users, w.catalog);
  if (report.affected_users()) {
    err << fmt::format("note: dropped {} ground-truth ids missing from the catalog ({} users affected, {} now empty)\n",
                       report.missing_items.size(), report.affected_users(), report.users_with_empty_gt);
  }
  if (s.embeddings) {
    w.embeddings = load_embeddings(*s.embeddings);
    for (const auto& id : w.embeddings->ids()) {
      if (!w.catalog.contains(id)) {
        throw ValidationError(fmt::format("{}: embedding id '{}' is not in the catalog", s.embeddings->string(), id));
      }
    }
  }
  if (s.queries) w.queries = load_embeddings(*s.queries);
  if (wants.scores && s.scores) {
    w.scores = load_scores(*s.scores);
    w.table_scorer = std::make_unique<TableScorer>(*w.scores);
  }
  if (wants.synthetic) {
    if (!s.world) throw ValidationError("the synthetic reranker needs --world pointing at an exported world");
    const auto cfg = Config::load(*s.world / kWorldConfig);
    w.world = generate_world(world_spec_from_config(cfg.section_or_empty("world")));
    w.synthetic_scorer = std::make_unique<SyntheticScorer>(*w.world);
  }
  if (wants.bm25) w.bm25 = std::make_unique<Bm25Index>(w.catalog);
  return w;
}

std::vector<PipelineConfig> configured_pipelines(const Settings& s, bool have_scores, bool have_world,
                                                 std::ostream& err) {
  const std::size_t pool = s.pool_sizes.empty() ? 200 : s.pool_sizes.front();
  const auto sections = s.config.sections_with_prefix("pipeline.");
  if (!sections.empty()) {
    std::vector<PipelineConfig> out;
    for (const auto* section : sections) {
      PipelineConfig base;
      base.name = section->name().substr(std::string_view("pipeline.").size());
      base.pool_size = pool;
      base.k = s.k;
      out.push_back(pipeline_from_config(*section, base));
      validate(out.back());
    }
    return out;
  }
  if (have_scores) return standard_pipelines(pool, RerankerKind::score_table, s.k);
  if (have_world) return standard_pipelines(pool, RerankerKind::synthetic, s.k);
  auto pipelines = standard_pipelines(pool, RerankerKind::score_table, s.k);
  pipelines.pop_back();
  err << "note: no --scores given; skipping the CE Rerank pipeline\n";
  return pipelines;
}

LoadWants wants_for(const std::vector<PipelineConfig>& pipelines) {
  LoadWants w;
  for (const auto& p : pipelines) {
    if (p.reranker == RerankerKind::synthetic) w.synthetic = true;
    if (p.retriever == RetrieverKind::bm25 || p.retriever == RetrieverKind::hybrid) w.bm25 = true;
  }
  return w;
}

RunSpec make_run_spec(const Settings& s, std::vector<PipelineConfig> pipelines) {
  RunSpec spec;
  spec.n_users = s.n_users;
  spec.seeds = s.seeds;
  spec.pipelines = std::move(pipelines);
  spec.output_dir = require(s.out, "--out");
  spec.workers = s.workers;
  return spec;
}

void write_tables(const fs::path& dir, std::string_view stem, const std::function<std::string(TableFormat)>& emit) {
  for (auto format : {TableFormat::csv, TableFormat::text, TableFormat::latex}) {
    write_text_file(dir / fmt::format("{}.{}", stem, extension_for(format)), emit(format));
  }
}

// ---- subcommands ------------------------------------------------------------------

int cmd_ingest(const Settings& s, std::ostream& out, std::ostream& err) {
  const fs::path dir = require(s.out, "--out");
  auto w = load_workspace(s, err, {});
  ensure_dir(dir);
  save_catalog(w.catalog, dir / "catalog.csv", CatalogFormat::csv);
  save_users(w.users, dir / "users.jsonl");

  std::vector<UserRecord> raw = load_users(*s.users);
  const auto missing = validate_users(raw, w.catalog);
  json j;
  j["items"] = w.catalog.size();
  j["users"] = w.users.size();
  j["users_with_missing_gt"] = missing.affected_users();
  j["missing_gt_items"] = std::vector<std::string>(missing.missing_items.begin(), missing.missing_items.end());
  j["users_with_empty_gt"] = missing.users_with_empty_gt;
  if (w.embeddings) {
    std::size_t uncovered = 0;
    for (const auto& item : w.catalog.items()) uncovered += w.embeddings->index_of(item.id) ? 0 : 1;
    j["embeddings"] = {{"rows", w.embeddings->size()}, {"dim", w.embeddings->dim()}, {"items_without_vector", uncovered}};
  }
  if (w.queries) {
    std::size_t uncovered = 0;
    for (const auto& u : w.users) uncovered += w.queries->index_of(u.id) ? 0 : 1;
    j["queries"] = {{"rows", w.queries->size()}, {"dim", w.queries->dim()}, {"users_without_vector", uncovered}};
  }
  if (w.scores) j["scores"] = {{"pairs", w.scores->size()}};
  write_text_file(dir / "ingest_report.json", j.dump(2) + "\n");
  out << fmt::format("ingested {} items and {} users into {}\n", w.catalog.size(), w.users.size(), dir.string());
  return kExitOk;
}

int cmd_synth(const Settings& s, std::ostream& out) {
  const fs::path dir = require(s.out, "--out");
  const WorldSpec spec = world_spec_from_config(s.config.section_or_empty("world"));
  const auto world = generate_world(spec);
  export_world(world, dir);
  out << fmt::format("wrote synthetic world ({} items, {} users, seed {}) to {}\n", spec.catalog_size,
                     spec.user_count, spec.seed, dir.string());
  return kExitOk;
}

int cmd_index(const Settings& s, std::ostream& out, std::ostream& err) {
  const fs::path dir = require(s.out, "--out");
  auto w = load_workspace(s, err, {.scores = false});
  if (!w.embeddings || !w.queries) throw ValidationError("index needs --embeddings and --queries");
  if (w.embeddings->dim() != w.queries->dim()) {
    throw ValidationError(fmt::format("embedding dim {} != query dim {}", w.embeddings->dim(), w.queries->dim()));
  }
  std::size_t depth = 200;
  if (!s.pool_sizes.empty()) depth = *std::max_element(s.pool_sizes.begin(), s.pool_sizes.end());
  depth = std::min(depth, w.catalog.size());
  ensure_dir(dir);

  std::vector<CandidatePool> pools(w.users.size());
  parallel_for(w.users.size(), s.workers, [&](std::size_t u) {
    const auto row = w.queries->index_of(w.users[u].id);
    if (!row) throw ValidationError(fmt::format("no query embedding for user '{}'", w.users[u].id));
    pools[u] = flat_search(w.queries->vector(*row), *w.embeddings, depth, w.users[u].id);
  });

  std::ofstream pool_file(dir / "pools.jsonl", std::ios::binary | std::ios::trunc);
  std::ofstream pair_file(dir / "pair_texts.jsonl", std::ios::binary | std::ios::trunc);
  if (!pool_file || !pair_file) throw IoError(fmt::format("cannot write into '{}'", dir.string()));
  std::size_t pairs = 0;
  for (std::size_t u = 0; u < pools.size(); ++u) {
    json line;
    line["user_id"] = pools[u].user_id;
    json items = json::array();
    for (const auto& e : pools[u].entries) {
      items.push_back({{"item_id", e.item_id}, {"score", e.score}});
      json pair;
      pair["user_id"] = pools[u].user_id;
      pair["item_id"] = e.item_id;
      pair["text"] = build_pair_text(w.users[u].profile_text, w.catalog.at(e.item_id));
      pair_file << pair.dump() << '\n';
      ++pairs;
    }
    line["items"] = std::move(items);
    pool_file << line.dump() << '\n';
  }
  if (!pool_file.flush() || !pair_file.flush()) throw IoError(fmt::format("failed writing into '{}'", dir.string()));
  out << fmt::format("indexed {} users at depth {} ({} pairs) into {}\n", pools.size(), depth, pairs, dir.string());
  return kExitOk;
}

int cmd_run(const Settings& s, std::ostream& out, std::ostream& err) {
  auto pipelines = configured_pipelines(s, s.scores.has_value(), s.world.has_value(), err);
  auto wants = wants_for(pipelines);
  auto w = load_workspace(s, err, wants);
  auto spec = make_run_spec(s, std::move(pipelines));
  const auto agg = run_experiment(spec, w.users, w.inputs());
  out << emit_main_table(agg, TableFormat::text, s.k);
  out << fmt::format("logs and {} written to {}\n", kMasterJson, spec.output_dir.string());
  return kExitOk;
}

int cmd_ablate(const Settings& s, std::ostream& out, std::ostream& err) {
  auto pipelines = configured_pipelines(s, s.scores.has_value(), s.world.has_value(), err);
  auto wants = wants_for(pipelines);
  auto w = load_workspace(s, err, wants);
  auto spec = make_run_spec(s, std::move(pipelines));
  spec.pool_sizes_ablation = s.pool_sizes.empty() ? std::vector<std::size_t>{200, 500, 1000} : s.pool_sizes;
  const auto table = run_ablation(spec, w.users, w.inputs());
  ensure_dir(spec.output_dir);
  write_tables(spec.output_dir, "ablation", [&](TableFormat f) { return emit_ablation_table(table, f); });
  out << emit_ablation_table(table, TableFormat::text);
  return kExitOk;
}

std::map<std::string, PerUserResult> by_user(const fs::path& log) {
  std::map<std::string, PerUserResult> m;
  for (auto& r : read_run_log(log)) {
    auto id = r.user_id;
    m.emplace(std::move(id), std::move(r));
  }
  return m;
}

// Users of the first seed's log, in file order.
std::vector<std::string> logged_users(const AggregateResult& agg) {
  std::vector<std::string> ids;
  if (agg.pipelines.empty() || agg.pipelines.front().logs.empty()) return ids;
  for (const auto& r : read_run_log(agg.pipelines.front().logs.front())) ids.push_back(r.user_id);
  return ids;
}

std::optional<ScoreSeparationReport> separation_for(const Settings& s, const AggregateResult& agg,
                                                    std::ostream& err) {
  if (!s.scores || !s.catalog || !s.users || !s.embeddings || !s.queries) return std::nullopt;
  auto w = load_workspace(s, err, {});
  const auto ids = logged_users(agg);
  const std::size_t depth = std::min(agg.pool_size ? agg.pool_size : 200, w.catalog.size());
  std::vector<CandidatePool> pools;
  for (const auto& id : ids) {
    const auto row = w.queries->index_of(id);
    if (!row) throw ValidationError(fmt::format("no query embedding for user '{}'", id));
    pools.push_back(flat_search(w.queries->vector(*row), *w.embeddings, depth, id));
  }
  return score_separation(*w.scores, pools, gt_map(w.users));
}

int cmd_analyze(const Settings& s, std::ostream& out, std::ostream& err) {
  const fs::path dir = require(s.out, "--out");
  const std::vector<fs::path> dirs = {dir};
  const auto agg = aggregate_runs(dirs, s.k);
  const auto hr_name = fmt::format("HR@{}", s.k);
  const auto ndcg_name = fmt::format("nDCG@{}", s.k);

  const PipelineAggregate* best = nullptr;
  for (const auto& p : agg.pipelines) {
    const auto* m = p.find(hr_name);
    if (m && (!best || m->mean > best->find(hr_name)->mean)) best = &p;
  }
  if (!best) throw ValidationError("no pipelines to analyze");

  std::vector<StatComparison> comparisons;
  for (const auto& p : agg.pipelines) {
    if (&p == best) continue;
    std::vector<double> hr_x, hr_y, ndcg_x, ndcg_y;
    for (std::size_t i = 0; i < agg.seeds.size(); ++i) {
      const auto x = by_user(p.logs.at(i));
      const auto y = by_user(best->logs.at(i));
      if (x.size() != y.size()) {
        throw ValidationError(fmt::format("'{}' and '{}' logs cover different users", p.name, best->name));
      }
      for (const auto& [id, rx] : x) {
        auto it = y.find(id);
        if (it == y.end()) {
          throw ValidationError(fmt::format("user '{}' missing from '{}' logs", id, best->name));
        }
        hr_x.push_back(rx.hit ? 1.0 : 0.0);
        hr_y.push_back(it->second.hit ? 1.0 : 0.0);
        ndcg_x.push_back(rx.ndcg);
        ndcg_y.push_back(it->second.ndcg);
      }
    }
    const auto seed = derive_seed(agg.seeds.front(), {fnv1a64(p.name), fnv1a64(best->name)});
    comparisons.push_back({hr_name, p.name, best->name, compare_paired(hr_x, hr_y, seed, s.bootstrap)});
    comparisons.push_back({ndcg_name, p.name, best->name, compare_paired(ndcg_x, ndcg_y, seed + 1, s.bootstrap)});
  }

  std::optional<RegressionFit> regression;
  {
    std::vector<double> x, y;
    for (const auto& p : agg.pipelines) {
      const auto* r = p.find("Recall@200");
      const auto* h = p.find(hr_name);
      if (!r || !h) continue;
      for (std::size_t i = 0; i < r->per_seed.size(); ++i) {
        x.push_back(r->per_seed[i]);
        y.push_back(h->per_seed[i]);
      }
    }
    try {
      regression = ols_simple(x, y);
    } catch (const ValidationError& e) {
      err << fmt::format("note: coverage regression skipped ({})\n", e.what());
    }
  }
  const auto separation = separation_for(s, agg, err);

  write_text_file(dir / "stat_tests.json", stat_tests_json(comparisons, regression, separation).dump(2) + "\n");
  write_tables(dir, "stat_tests", [&](TableFormat f) { return emit_stat_table(comparisons, f); });
  out << emit_stat_table(comparisons, TableFormat::text);
  if (regression) {
    out << fmt::format("coverage regression: HR = {:.3f} + {:.3f}·Recall@200, r = {:.3f}, R² = {:.3f}, p = {:.3g}\n",
                       regression->intercept, regression->slope, regression->pearson_r, regression->r_squared,
                       regression->p_value);
  }
  if (separation) {
    out << fmt::format("score separation: mean diff {:.3f}, d = {:.3f}, spearman r = {:.3f}, overlap {:.3f}\n",
                       separation->mean_diff, separation->cohens_d, separation->spearman_r,
                       separation->overlap_fraction);
  }
  return kExitOk;
}

std::vector<StatComparison> read_stat_comparisons(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::vector<StatComparison> out;
  try {
    const json j = json::parse(in);
    auto num = [](const json& v) { return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>(); };
    for (const auto& c : j.at("comparisons")) {
      StatComparison sc;
      sc.metric = c.at("metric").get<std::string>();
      sc.pipeline = c.at("pipeline").get<std::string>();
      sc.baseline = c.at("baseline").get<std::string>();
      auto& r = sc.report;
      r.mean_diff = num(c.at("mean_diff"));
      r.ci_low = num(c.at("ci_low"));
      r.ci_high = num(c.at("ci_high"));
      r.t_stat = num(c.at("t_stat"));
      r.p_t = num(c.at("p_t"));
      r.wilcoxon_w = num(c.at("wilcoxon_w"));
      r.p_w = num(c.at("p_w"));
      r.cohens_d = num(c.at("cohens_d"));
      r.effect_size = c.at("effect_size").get<std::string>();
      r.n = c.at("n").get<std::size_t>();
      r.wilcoxon_exact = c.at("wilcoxon_exact").get<bool>();
      out.push_back(std::move(sc));
    }
  } catch (const json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  }
  return out;
}

int cmd_report(const Settings& s, std::ostream& out, std::ostream& err) {
  const fs::path dir = require(s.out, "--out");
  const std::vector<fs::path> dirs = {dir};
  const auto agg = aggregate_runs(dirs, s.k);

  write_tables(dir, "main_results", [&](TableFormat f) { return emit_main_table(agg, f, s.k); });
  write_tables(dir, "exposure", [&](TableFormat f) { return emit_exposure_table(agg, f); });
  if (fs::exists(dir / "stat_tests.json")) {
    const auto comparisons = read_stat_comparisons(dir / "stat_tests.json");
    write_tables(dir, "stat_tests", [&](TableFormat f) { return emit_stat_table(comparisons, f); });
  }

  PlotSources sources;
  sources.aggregate = &agg;
  sources.k = s.k;
  const auto hr_name = fmt::format("HR@{}", s.k);
  for (const auto& p : agg.pipelines) {
    std::map<std::string, std::size_t> top1;
    for (const auto& log : p.logs) {
      for (const auto& r : read_run_log(log)) {
        if (r.top1_item) ++top1[*r.top1_item];
      }
    }
    std::vector<std::size_t> counts;
    for (const auto& [item, c] : top1) counts.push_back(c);
    if (!counts.empty()) sources.exposure_counts.emplace_back(p.name, std::move(counts));
    const auto* r = p.find("Recall@200");
    const auto* h = p.find(hr_name);
    if (r && h) {
      for (std::size_t i = 0; i < r->per_seed.size(); ++i) sources.coverage_points.emplace_back(r->per_seed[i], h->per_seed[i]);
    }
  }
  if (s.catalog && s.users && s.embeddings && s.queries) {
    auto w = load_workspace(s, err, {.scores = false});
    const auto ids = logged_users(agg);
    std::vector<CandidatePool> orderings;
    for (const auto& id : ids) {
      const auto row = w.queries->index_of(id);
      if (!row) throw ValidationError(fmt::format("no query embedding for user '{}'", id));
      orderings.push_back(flat_search(w.queries->vector(*row), *w.embeddings, w.embeddings->size(), id));
    }
    const auto gt = gt_map(w.users);
    sources.gt_positions.emplace_back("vector", gt_position_stats(orderings, gt, kDefaultRecallCutoffs));
  }

  std::size_t written = 0;
  for (auto kind : {"recall_curve", "bar", "cumulative_exposure", "scatter", "histogram"}) {
    const bool available = (std::string_view(kind) != "histogram" || !sources.gt_positions.empty()) &&
                           (std::string_view(kind) != "scatter" || !sources.coverage_points.empty()) &&
                           (std::string_view(kind) != "cumulative_exposure" || !sources.exposure_counts.empty());
    if (!available) continue;
    for (const auto& series : emit_plot_data(sources, kind)) {
      write_plot(series, dir / "plots");
      ++written;
    }
  }
  out << emit_main_table(agg, TableFormat::text, s.k);
  out << fmt::format("tables and {} plot series written to {}\n", written, dir.string());
  return kExitOk;
}

void add_inputs(CLI::App* cmd, Flags& f) {
  cmd->add_option("--catalog", f.catalog, "Catalog file (.csv or .jsonl)");
  cmd->add_option("--users", f.users, "Users JSONL");
  cmd->add_option("--embeddings", f.embeddings, "Item embeddings file");
  cmd->add_option("--queries", f.queries, "User query embeddings file");
  cmd->add_option("--scores", f.scores, "Reranker scores JSONL");
  cmd->add_option("--world", f.world, "Exported synthetic world directory (fills unset inputs)");
}

void add_run_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--n-users", f.n_users, "Users sampled per seed");
  cmd->add_option("--seeds", f.seeds, "Random seeds");
  cmd->add_option("--pool-sizes", f.pool_sizes, "Candidate pool sizes");
  cmd->add_option("--k", f.k, "Cutoff K for HR/nDCG");
  cmd->add_option("--workers", f.workers, "Parallel workers (0 = all cores)");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Diagnostics for retrieve-then-rerank cold-start recommenders", "coldstart"};
  app.require_subcommand(1);
  Flags f;

  auto* ingest = app.add_subcommand("ingest", "Validate and normalize a catalog and users");
  auto* synth = app.add_subcommand("synth", "Generate and export a synthetic world from [world] config");
  auto* index = app.add_subcommand("index", "Write vector candidate pools and pair texts for the model adapter");
  auto* run = app.add_subcommand("run", "Run pipelines over seeds and write per-user logs");
  auto* ablate = app.add_subcommand("ablate", "Pool-size ablation of the reranking pipeline");
  auto* analyze = app.add_subcommand("analyze", "Statistical tests over existing logs");
  auto* report = app.add_subcommand("report", "Emit tables and plot data from existing logs");

  for (auto* cmd : {ingest, synth, index, run, ablate, analyze, report}) {
    cmd->add_option("--config", f.config, "Key-value config file");
    cmd->add_option("--out", f.out, "Output directory");
  }
  add_inputs(ingest, f);
  add_inputs(index, f);
  index->add_option("--pool-sizes", f.pool_sizes, "Pool depth (largest value is used)");
  index->add_option("--workers", f.workers, "Parallel workers (0 = all cores)");
  for (auto* cmd : {run, ablate}) {
    add_inputs(cmd, f);
    add_run_flags(cmd, f);
  }
  for (auto* cmd : {analyze, report}) {
    add_inputs(cmd, f);
    cmd->add_option("--k", f.k, "Cutoff K for HR/nDCG");
  }
  analyze->add_option("--bootstrap", f.bootstrap, "Bootstrap resamples (>= 1000)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    err << app.help();
    return kExitValidation;
  }

  try {
    const Settings s = resolve(f);
    if (ingest->parsed()) return cmd_ingest(s, out, err);
    if (synth->parsed()) return cmd_synth(s, out);
    if (index->parsed()) return cmd_index(s, out, err);
    if (run->parsed()) return cmd_run(s, out, err);
    if (ablate->parsed()) return cmd_ablate(s, out, err);
    if (analyze->parsed()) return cmd_analyze(s, out, err);
    if (report->parsed()) return cmd_report(s, out, err);
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  }
  err << app.help();
  return kExitValidation;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace coldstart
