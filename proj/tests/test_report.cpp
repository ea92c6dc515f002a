#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "coldstart/error.hpp"
#include "coldstart/report.hpp"
#include "support.hpp"

using namespace coldstart;
using Catch::Approx;

namespace {

AggregateResult sample_aggregate(std::vector<std::uint64_t> seeds) {
  AggregateResult agg;
  agg.seeds = seeds;
  agg.n_users = 500;
  agg.pool_size = 200;
  const std::vector<std::pair<std::string, std::vector<double>>> hr = {
      {"Popularity", {0.25, 0.27, 0.284}},
      {"CE Rerank, v2 \"tuned\"", {0.031, 0.045, 0.02}},
  };
  for (const auto& [name, values] : hr) {
    PipelineAggregate p;
    p.name = name;
    const std::vector<double> v(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(seeds.size()));
    p.metrics.push_back(summarize_metric("HR@10", v));
    std::vector<double> half;
    for (double x : v) half.push_back(x / 3);
    p.metrics.push_back(summarize_metric("nDCG@10", half));
    for (std::size_t c : kDefaultRecallCutoffs) {
      std::vector<double> r;
      for (double x : v) r.push_back(std::min(1.0, x * static_cast<double>(c) / 100));
      p.metrics.push_back(summarize_metric("Recall@" + std::to_string(c), r));
    }
    p.metrics.push_back(summarize_metric("UniqueTop1", std::vector<double>(v.size(), 3.0)));
    p.metrics.push_back(summarize_metric("Gini", std::vector<double>(v.size(), 0.5)));
    agg.pipelines.push_back(std::move(p));
  }
  return agg;
}

// RFC 4180 reader for the round-trip check.
std::vector<std::vector<std::string>> read_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows(1);
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      rows.back().push_back(field);
      field.clear();
    } else if (c == '\n') {
      rows.back().push_back(field);
      field.clear();
      rows.emplace_back();
    } else {
      field += c;
    }
  }
  rows.pop_back();
  return rows;
}

}  // namespace

TEST_CASE("mean and sd cells", "[report]") {
  CHECK(format_mean_sd(0.268, 0.018, TableFormat::text) == "0.268 ± 0.018");
  CHECK(format_mean_sd(0.268, 0.018, TableFormat::latex) == "0.268 $\\pm$ 0.018");
  CHECK(format_mean_sd(0.2684, std::nullopt, TableFormat::text) == "0.268");
  CHECK(format_mean_sd(1.0, 0.0, TableFormat::csv, 2) == "1.00 ± 0.00");
  CHECK(parse_table_format("tex") == TableFormat::latex);
  CHECK(extension_for(TableFormat::text) == "txt");
}

TEST_CASE("main table in three formats", "[report]") {
  const auto agg = sample_aggregate({42, 7, 123});
  const auto text = emit_main_table(agg, TableFormat::text);
  const auto* pop = agg.find("Popularity")->find("HR@10");
  CHECK(text.find(format_mean_sd(pop->mean, pop->sd, TableFormat::text)) != std::string::npos);
  CHECK(text.rfind("Method", 0) == 0);
  const auto tex = emit_main_table(agg, TableFormat::latex);
  CHECK(tex.find("$\\pm$") != std::string::npos);
  CHECK(tex.find("\\midrule") != std::string::npos);

  const auto one = sample_aggregate({42});
  const auto single = emit_main_table(one, TableFormat::text);
  CHECK(single.find("±") == std::string::npos);
  CHECK(single.find("0.250") != std::string::npos);
}

TEST_CASE("main table CSV round-trips at full precision", "[report]") {
  const auto agg = sample_aggregate({42, 7, 123});
  const auto csv = emit_main_table(agg, TableFormat::csv);
  CHECK(emit_main_table(agg, TableFormat::csv) == csv);
  const auto rows = read_csv(csv);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0][0] == "Method");
  CHECK(rows[0][1] == "HR@10_mean");
  CHECK(rows[0][2] == "HR@10_sd");
  CHECK(rows[0].size() == 1 + 2 * (2 + kDefaultRecallCutoffs.size()));
  for (std::size_t r = 1; r < rows.size(); ++r) {
    REQUIRE(rows[r].size() == rows[0].size());
    const auto& p = agg.pipelines[r - 1];
    CHECK(rows[r][0] == p.name);
    for (std::size_t c = 1; c < rows[0].size(); c += 2) {
      const std::string metric = rows[0][c].substr(0, rows[0][c].size() - 5);
      const auto* m = p.find(metric);
      REQUIRE(m);
      CHECK(std::stod(rows[r][c]) == m->mean);
      CHECK(std::stod(rows[r][c + 1]) == *m->sd);
    }
  }

  // Through master.json and back, the table is byte-identical.
  testing::TempDir dir("report");
  write_master_json(agg, dir / "master.json");
  const auto back = read_master_json(dir / "master.json");
  CHECK(emit_main_table(back, TableFormat::csv) == csv);
  CHECK(emit_exposure_table(back, TableFormat::csv) == emit_exposure_table(agg, TableFormat::csv));

  const auto one = read_csv(emit_main_table(sample_aggregate({42}), TableFormat::csv));
  CHECK(one[1][2].empty());
}

TEST_CASE("ablation and stat tables", "[report]") {
  AblationTable t;
  t.pipeline = "CE Rerank";
  for (std::size_t pool : {200, 500, 1000}) {
    AblationRow row;
    row.pool_size = pool;
    row.hr = summarize_metric("HR@10", {0.02, 0.03});
    row.ndcg = summarize_metric("nDCG@10", {0.01, 0.015});
    row.rerank_seconds = summarize_metric("RerankSeconds", {0.001 * pool, 0.0011 * pool});
    t.rows.push_back(row);
  }
  const auto csv = read_csv(emit_ablation_table(t, TableFormat::csv));
  REQUIRE(csv.size() == 4);
  CHECK(csv[1][0] == "200");
  CHECK(csv[3][0] == "1000");

  const std::vector<double> x = {0.3, 0.5, 0.4, 0.6, 0.2, 0.7, 0.45, 0.55};
  const std::vector<double> y = {0.1, 0.2, 0.25, 0.3, 0.15, 0.35, 0.2, 0.3};
  const std::vector<StatComparison> cmp = {{"HR@10", "Popularity", "CE Rerank", compare_paired(x, y, 1, 1000)}};
  const auto text = emit_stat_table(cmp, TableFormat::text);
  CHECK(text.find("Popularity") != std::string::npos);
  const auto j = stat_tests_json(cmp, std::nullopt, std::nullopt);
  CHECK(j.dump() == stat_tests_json(cmp, std::nullopt, std::nullopt).dump());
  CHECK(j.dump().find("Popularity") != std::string::npos);
}

TEST_CASE("plot series", "[report]") {
  const auto curve = recall_curve_series("vector", {{200, 0.4}, {50, 0.1}, {1000, 0.8}});
  REQUIRE(curve.points.size() == 3);
  CHECK(curve.points[0] == std::pair<double, double>{50, 0.1});
  CHECK(curve.points[2] == std::pair<double, double>{1000, 0.8});
  CHECK_THROWS_AS(recall_curve_series("bad", {{50, 0.5}, {200, 0.4}}), ValidationError);
  PlotSeries broken{"x", PlotKind::cumulative_exposure, {{1, 0.5}, {2, 0.3}}, {}};
  CHECK_THROWS_AS(validate(broken), ValidationError);
  PlotSeries scatter{"s", PlotKind::scatter, {{1, 0.5}, {2, 0.3}}, {}};
  CHECK_NOTHROW(validate(scatter));

  const auto exposure = cumulative_exposure_series("pop", {250, 150, 100});
  REQUIRE(exposure.points.size() == 3);
  CHECK(exposure.points[0].second == Approx(0.5));
  CHECK(exposure.points[1].second == Approx(0.8));
  CHECK(exposure.points[2].second == 1.0);
  CHECK(exposure.points[2].first == 3.0);

  GtPositionSummary summary;
  summary.positions = {1, 3, 5, 7};
  summary.median = 4;
  summary.q1 = 2.5;
  summary.q3 = 5.5;
  summary.histogram = {{1, 2}, {5, 2}};
  const auto hist = gt_position_series("gt", summary);
  CHECK(hist.kind == PlotKind::histogram);
  CHECK(std::find(hist.metadata.begin(), hist.metadata.end(), std::pair<std::string, std::string>{"median", "4"}) !=
        hist.metadata.end());

  const std::vector<std::pair<std::string, double>> bars = {{"Random", 0.01}, {"Popularity", 0.3}};
  const auto bar = bar_series("hr", bars);
  CHECK(bar.points[1] == std::pair<double, double>{2, 0.3});
  CHECK(bar.metadata[1].second == "Popularity");

  CHECK(plot_csv(curve).rfind("x,y\n50,0.1\n", 0) == 0);
  testing::TempDir dir("plots");
  write_plot(curve, dir.path());
  CHECK(std::filesystem::exists(dir / "vector.csv"));
  CHECK(std::filesystem::exists(dir / "vector.meta.json"));

  const auto agg = sample_aggregate({42, 7});
  PlotSources sources;
  sources.aggregate = &agg;
  CHECK(emit_plot_data(sources, "recall_curve").size() == 2);
  CHECK(emit_plot_data(sources, "bar").size() >= 1);
  CHECK_THROWS_AS(emit_plot_data(sources, "pie"), ValidationError);
  CHECK_THROWS_AS(emit_plot_data(sources, "histogram"), ValidationError);
  CHECK(parse_plot_kind("scatter") == PlotKind::scatter);
}
