#include "coldstart/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/core.h>

#include "coldstart/error.hpp"

namespace coldstart {

using json = nlohmann::ordered_json;

TableFormat parse_table_format(std::string_view text) {
  if (text == "csv") return TableFormat::csv;
  if (text == "text" || text == "txt") return TableFormat::text;
  if (text == "latex" || text == "tex") return TableFormat::latex;
  throw ValidationError(fmt::format("unknown table format '{}' (csv, text, latex)", text));
}

std::string_view extension_for(TableFormat format) {
  switch (format) {
    case TableFormat::csv: return "csv";
    case TableFormat::text: return "txt";
    case TableFormat::latex: return "tex";
  }
  return "txt";
}

std::string format_mean_sd(double mean, const std::optional<double>& sd, TableFormat format, int decimals) {
  if (!sd) return fmt::format("{:.{}f}", mean, decimals);
  const char* pm = format == TableFormat::latex ? " $\\pm$ " : " \u00b1 ";
  return fmt::format("{:.{}f}{}{:.{}f}", mean, decimals, pm, *sd, decimals);
}

namespace {

using Row = std::vector<std::string>;

std::size_t display_width(std::string_view s) {
  // UTF-8 continuation bytes do not advance the cursor
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string latex_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '&' || c == '%' || c == '_' || c == '#' || c == '$' || c == '{' || c == '}') out += '\\';
    out += c;
  }
  return out;
}

std::string render(const Row& header, const std::vector<Row>& rows, TableFormat format) {
  std::string out;
  switch (format) {
    case TableFormat::csv: {
      auto line = [&](const Row& r) {
        for (std::size_t i = 0; i < r.size(); ++i) {
          if (i) out += ',';
          out += csv_field(r[i]);
        }
        out += '\n';
      };
      line(header);
      for (const auto& r : rows) line(r);
      break;
    }
    case TableFormat::text: {
      std::vector<std::size_t> width(header.size(), 0);
      auto measure = [&](const Row& r) {
        for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], display_width(r[i]));
      };
      measure(header);
      for (const auto& r : rows) measure(r);
      auto line = [&](const Row& r) {
        std::string text;
        for (std::size_t i = 0; i < r.size(); ++i) {
          if (i) text += "  ";
          text += r[i];
          if (i + 1 < r.size()) text.append(width[i] - display_width(r[i]), ' ');
        }
        out += text + '\n';
      };
      line(header);
      std::size_t total = 0;
      for (std::size_t w : width) total += w;
      out.append(total + 2 * (width.size() - 1), '-');
      out += '\n';
      for (const auto& r : rows) line(r);
      break;
    }
    case TableFormat::latex: {
      auto line = [&](const Row& r, bool escape) {
        for (std::size_t i = 0; i < r.size(); ++i) {
          if (i) out += " & ";
          out += escape ? latex_escape(r[i]) : r[i];
        }
        out += " \\\\\n";
      };
      line(header, true);
      out += "\\midrule\n";
      for (const auto& r : rows) line(r, false);
      break;
    }
  }
  return out;
}

std::string metric_cell(const PipelineAggregate& p, const std::string& metric, TableFormat format, int decimals = 3) {
  const auto* m = p.find(metric);
  if (!m) return "-";
  return format_mean_sd(m->mean, m->sd, format, decimals);
}

std::string name_cell(const std::string& name, TableFormat format) {
  return format == TableFormat::latex ? latex_escape(name) : name;
}

}  // namespace

std::string emit_main_table(const AggregateResult& agg, TableFormat format, std::size_t k,
                            std::span<const std::size_t> cutoffs) {
  std::vector<std::string> metrics = {fmt::format("HR@{}", k), fmt::format("nDCG@{}", k)};
  for (std::size_t c : cutoffs) metrics.push_back(fmt::format("Recall@{}", c));

  Row header = {"Method"};
  std::vector<Row> rows;
  if (format == TableFormat::csv) {
    for (const auto& m : metrics) {
      header.push_back(m + "_mean");
      header.push_back(m + "_sd");
    }
    for (const auto& p : agg.pipelines) {
      Row r = {p.name};
      for (const auto& name : metrics) {
        const auto* m = p.find(name);
        r.push_back(m ? fmt::format("{}", m->mean) : "");
        r.push_back(m && m->sd ? fmt::format("{}", *m->sd) : "");
      }
      rows.push_back(std::move(r));
    }
  } else {
    header.insert(header.end(), metrics.begin(), metrics.end());
    for (const auto& p : agg.pipelines) {
      Row r = {name_cell(p.name, format)};
      for (const auto& name : metrics) r.push_back(metric_cell(p, name, format));
      rows.push_back(std::move(r));
    }
  }
  return render(header, rows, format);
}

std::string emit_exposure_table(const AggregateResult& agg, TableFormat format) {
  Row header = {"Method"};
  std::vector<Row> rows;
  if (format == TableFormat::csv) {
    header.insert(header.end(), {"UniqueTop1_mean", "UniqueTop1_sd", "Gini_mean", "Gini_sd"});
    for (const auto& p : agg.pipelines) {
      Row r = {p.name};
      for (const char* name : {"UniqueTop1", "Gini"}) {
        const auto* m = p.find(name);
        r.push_back(m ? fmt::format("{}", m->mean) : "");
        r.push_back(m && m->sd ? fmt::format("{}", *m->sd) : "");
      }
      rows.push_back(std::move(r));
    }
  } else {
    header.insert(header.end(), {"Unique Top-1", "Gini"});
    for (const auto& p : agg.pipelines) {
      rows.push_back({name_cell(p.name, format), metric_cell(p, "UniqueTop1", format, 1),
                      metric_cell(p, "Gini", format)});
    }
  }
  return render(header, rows, format);
}

std::string emit_ablation_table(const AblationTable& table, TableFormat format) {
  const auto hr = fmt::format("HR@{}", table.k);
  const auto ndcg = fmt::format("nDCG@{}", table.k);
  Row header = {"pool_size"};
  std::vector<Row> rows;
  if (format == TableFormat::csv) {
    header.insert(header.end(), {hr + "_mean", hr + "_sd", ndcg + "_mean", ndcg + "_sd", "rerank_seconds_mean",
                                 "rerank_seconds_sd"});
    for (const auto& row : table.rows) {
      Row r = {fmt::format("{}", row.pool_size)};
      for (const auto* m : {&row.hr, &row.ndcg, &row.rerank_seconds}) {
        r.push_back(fmt::format("{}", m->mean));
        r.push_back(m->sd ? fmt::format("{}", *m->sd) : "");
      }
      rows.push_back(std::move(r));
    }
  } else {
    header.insert(header.end(), {hr, ndcg, "Time/user (s)"});
    for (const auto& row : table.rows) {
      rows.push_back({fmt::format("{}", row.pool_size), format_mean_sd(row.hr.mean, row.hr.sd, format),
                      format_mean_sd(row.ndcg.mean, row.ndcg.sd, format),
                      format_mean_sd(row.rerank_seconds.mean, row.rerank_seconds.sd, format, 6)});
    }
  }
  return render(header, rows, format);
}

namespace {

std::string number_or_dash(double v, const char* spec) {
  if (!std::isfinite(v)) return "-";
  return fmt::format(fmt::runtime(spec), v);
}

}  // namespace

std::string emit_stat_table(std::span<const StatComparison> comparisons, TableFormat format) {
  Row header = {"Statistic"};
  for (const auto& c : comparisons) header.push_back(fmt::format("{} vs {} ({})", c.pipeline, c.baseline, c.metric));
  const bool csv = format == TableFormat::csv;
  auto row = [&](std::string label, auto cell) {
    Row r = {std::move(label)};
    for (const auto& c : comparisons) r.push_back(cell(c.report));
    return r;
  };
  const char* fixed = csv ? "{}" : "{:.3f}";
  const char* sci = csv ? "{}" : "{:.3g}";
  std::vector<Row> rows;
  rows.push_back(row("Mean difference", [&](const StatTestReport& r) { return number_or_dash(r.mean_diff, fixed); }));
  rows.push_back(row(format == TableFormat::latex ? "95\\% CI" : "95% CI", [&](const StatTestReport& r) {
    return fmt::format("[{}, {}]", number_or_dash(r.ci_low, fixed), number_or_dash(r.ci_high, fixed));
  }));
  rows.push_back(row("t-statistic", [&](const StatTestReport& r) { return number_or_dash(r.t_stat, csv ? "{}" : "{:.2f}"); }));
  rows.push_back(row("p-value (t-test)", [&](const StatTestReport& r) { return number_or_dash(r.p_t, sci); }));
  rows.push_back(row("Wilcoxon W", [&](const StatTestReport& r) { return number_or_dash(r.wilcoxon_w, csv ? "{}" : "{:.1f}"); }));
  rows.push_back(row("p-value (Wilcoxon)", [&](const StatTestReport& r) { return number_or_dash(r.p_w, sci); }));
  rows.push_back(row("Cohen's d", [&](const StatTestReport& r) { return number_or_dash(r.cohens_d, fixed); }));
  rows.push_back(row("Effect Size", [](const StatTestReport& r) { return r.effect_size; }));
  rows.push_back(row("n", [](const StatTestReport& r) { return fmt::format("{}", r.n); }));
  return render(header, rows, format);
}

json stat_tests_json(std::span<const StatComparison> comparisons, const std::optional<RegressionFit>& regression,
                     const std::optional<ScoreSeparationReport>& separation) {
  json j;
  json list = json::array();
  for (const auto& c : comparisons) {
    json entry;
    entry["metric"] = c.metric;
    entry["pipeline"] = c.pipeline;
    entry["baseline"] = c.baseline;
    const json stats = to_json(c.report);
    for (auto& [key, value] : stats.items()) entry[key] = value;
    list.push_back(std::move(entry));
  }
  j["comparisons"] = std::move(list);
  j["coverage_regression"] = regression ? to_json(*regression) : json(nullptr);
  j["score_separation"] = separation ? to_json(*separation) : json(nullptr);
  return j;
}

PlotKind parse_plot_kind(std::string_view text) {
  for (auto kind : {PlotKind::recall_curve, PlotKind::histogram, PlotKind::cumulative_exposure, PlotKind::scatter,
                    PlotKind::bar}) {
    if (text == to_string(kind)) return kind;
  }
  throw ValidationError(
      fmt::format("unknown plot kind '{}' (recall_curve, histogram, cumulative_exposure, scatter, bar)", text));
}

std::string_view to_string(PlotKind kind) {
  switch (kind) {
    case PlotKind::recall_curve: return "recall_curve";
    case PlotKind::histogram: return "histogram";
    case PlotKind::cumulative_exposure: return "cumulative_exposure";
    case PlotKind::scatter: return "scatter";
    case PlotKind::bar: return "bar";
  }
  return "?";
}

void validate(const PlotSeries& s) {
  if (s.kind != PlotKind::recall_curve && s.kind != PlotKind::cumulative_exposure) return;
  for (std::size_t i = 1; i < s.points.size(); ++i) {
    if (s.points[i].first < s.points[i - 1].first || s.points[i].second < s.points[i - 1].second) {
      throw ValidationError(fmt::format("plot '{}': {} series must be non-decreasing", s.name, to_string(s.kind)));
    }
  }
}

PlotSeries recall_curve_series(std::string name, const std::map<std::size_t, double>& recall_at) {
  PlotSeries s{std::move(name), PlotKind::recall_curve, {}, {}};
  for (const auto& [k, v] : recall_at) s.points.emplace_back(static_cast<double>(k), v);
  validate(s);
  return s;
}

PlotSeries cumulative_exposure_series(std::string name, std::vector<std::size_t> counts) {
  PlotSeries s{std::move(name), PlotKind::cumulative_exposure, {}, {}};
  std::size_t total = 0;
  for (std::size_t c : counts) total += c;
  for (const auto& [rank, share] : cumulative_exposure(std::move(counts))) {
    s.points.emplace_back(static_cast<double>(rank), share);
  }
  s.metadata.emplace_back("items", fmt::format("{}", s.points.size()));
  s.metadata.emplace_back("exposures", fmt::format("{}", total));
  validate(s);
  return s;
}

PlotSeries gt_position_series(std::string name, const GtPositionSummary& summary) {
  PlotSeries s{std::move(name), PlotKind::histogram, {}, {}};
  for (const auto& [edge, count] : summary.histogram) s.points.emplace_back(edge, static_cast<double>(count));
  s.metadata.emplace_back("median", fmt::format("{}", summary.median));
  s.metadata.emplace_back("q1", fmt::format("{}", summary.q1));
  s.metadata.emplace_back("q3", fmt::format("{}", summary.q3));
  s.metadata.emplace_back("positions", fmt::format("{}", summary.positions.size()));
  for (const auto& [cutoff, fraction] : summary.fraction_within) {
    s.metadata.emplace_back(fmt::format("within_{}", cutoff), fmt::format("{}", fraction));
  }
  return s;
}

PlotSeries scatter_series(std::string name, std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("scatter_series: x and y differ in length");
  PlotSeries s{std::move(name), PlotKind::scatter, {}, {}};
  for (std::size_t i = 0; i < x.size(); ++i) s.points.emplace_back(x[i], y[i]);
  return s;
}

PlotSeries bar_series(std::string name, std::span<const std::pair<std::string, double>> bars) {
  PlotSeries s{std::move(name), PlotKind::bar, {}, {}};
  for (std::size_t i = 0; i < bars.size(); ++i) {
    s.points.emplace_back(static_cast<double>(i + 1), bars[i].second);
    s.metadata.emplace_back(fmt::format("label_{}", i + 1), bars[i].first);
  }
  return s;
}

namespace {

std::string plot_stem(std::string_view text) {
  std::string out;
  for (char c : text) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-' || c == '.';
    if (c >= 'A' && c <= 'Z') {
      out += static_cast<char>(c - 'A' + 'a');
    } else {
      out += ok ? c : '_';
    }
  }
  return out;
}

}  // namespace

std::vector<PlotSeries> emit_plot_data(const PlotSources& src, std::string_view kind_text) {
  const PlotKind kind = parse_plot_kind(kind_text);
  std::vector<PlotSeries> out;
  auto need = [&](bool ok, std::string_view what) {
    if (!ok) throw ValidationError(fmt::format("{} plot needs {}", kind_text, what));
  };
  switch (kind) {
    case PlotKind::recall_curve:
      need(src.aggregate != nullptr, "aggregate results");
      for (const auto& p : src.aggregate->pipelines) {
        std::map<std::size_t, double> recall;
        for (const auto& m : p.metrics) {
          if (m.name.starts_with("Recall@")) recall[std::stoul(m.name.substr(7))] = m.mean;
        }
        if (!recall.empty()) out.push_back(recall_curve_series("recall_curve_" + plot_stem(p.name), recall));
      }
      break;
    case PlotKind::bar: {
      need(src.aggregate != nullptr, "aggregate results");
      const auto metric = fmt::format("HR@{}", src.k);
      std::vector<std::pair<std::string, double>> bars;
      for (const auto& p : src.aggregate->pipelines) {
        if (const auto* m = p.find(metric)) bars.emplace_back(p.name, m->mean);
      }
      out.push_back(bar_series(plot_stem(metric), bars));
      break;
    }
    case PlotKind::histogram:
      need(!src.gt_positions.empty(), "ground-truth positions (catalog, users, embeddings and queries)");
      for (const auto& [name, summary] : src.gt_positions) {
        out.push_back(gt_position_series("gt_positions_" + plot_stem(name), summary));
      }
      break;
    case PlotKind::cumulative_exposure:
      need(!src.exposure_counts.empty(), "per-user logs");
      for (const auto& [name, counts] : src.exposure_counts) {
        out.push_back(cumulative_exposure_series("exposure_" + plot_stem(name), counts));
      }
      break;
    case PlotKind::scatter: {
      need(!src.coverage_points.empty(), "per-user logs with Recall@200");
      std::vector<double> x, y;
      for (const auto& [a, b] : src.coverage_points) {
        x.push_back(a);
        y.push_back(b);
      }
      out.push_back(scatter_series("coverage_vs_hr", x, y));
      break;
    }
  }
  return out;
}

std::string plot_csv(const PlotSeries& series) {
  std::string out = "x,y\n";
  for (const auto& [x, y] : series.points) out += fmt::format("{},{}\n", x, y);
  return out;
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  out << content;
  out.flush();
  if (!out) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

void write_plot(const PlotSeries& series, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
  write_text_file(dir / (series.name + ".csv"), plot_csv(series));
  json meta;
  meta["name"] = series.name;
  meta["kind"] = std::string(to_string(series.kind));
  meta["points"] = series.points.size();
  json extra = json::object();
  for (const auto& [key, value] : series.metadata) extra[key] = value;
  meta["metadata"] = std::move(extra);
  write_text_file(dir / (series.name + ".meta.json"), meta.dump(2) + "\n");
}

}  // namespace coldstart
