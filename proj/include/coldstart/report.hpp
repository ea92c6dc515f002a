#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "coldstart/harness.hpp"
#include "coldstart/metrics.hpp"
#include "coldstart/stats.hpp"
#include "json.hpp"

namespace coldstart {

enum class TableFormat { csv, text, latex };

TableFormat parse_table_format(std::string_view text);
std::string_view extension_for(TableFormat format);

// "0.250 ± 0.020" (text/csv) or "0.250 $\pm$ 0.020" (latex); just the mean
// when sd is absent.
std::string format_mean_sd(double mean, const std::optional<double>& sd, TableFormat format, int decimals = 3);

// Main results: one row per pipeline; HR@K, nDCG@K and Recall@<c>.
// CSV carries full-precision <metric>_mean and <metric>_sd columns (sd empty
// when absent); text and LaTeX print 3 decimals.
std::string emit_main_table(const AggregateResult& agg, TableFormat format, std::size_t k = kDefaultK,
                            std::span<const std::size_t> cutoffs = kDefaultRecallCutoffs);

// Exposure: unique top-1 items and Gini per pipeline.
std::string emit_exposure_table(const AggregateResult& agg, TableFormat format);

// Ablation: pool size, HR@K, nDCG@K, rerank seconds per user.
std::string emit_ablation_table(const AblationTable& table, TableFormat format);

struct StatComparison {
  std::string metric;     // e.g. HR@10
  std::string pipeline;   // x
  std::string baseline;   // y; differences are pipeline − baseline
  StatTestReport report;
};

// Paired comparisons: one column per comparison.
std::string emit_stat_table(std::span<const StatComparison> comparisons, TableFormat format);

nlohmann::ordered_json stat_tests_json(std::span<const StatComparison> comparisons,
                                       const std::optional<RegressionFit>& coverage_regression,
                                       const std::optional<ScoreSeparationReport>& separation);

// ---- plot data ------------------------------------------------------------------

enum class PlotKind { recall_curve, histogram, cumulative_exposure, scatter, bar };

PlotKind parse_plot_kind(std::string_view text);
std::string_view to_string(PlotKind kind);

struct PlotSeries {
  std::string name;
  PlotKind kind = PlotKind::scatter;
  std::vector<std::pair<double, double>> points;
  std::vector<std::pair<std::string, std::string>> metadata;
};

// Throws ValidationError when a recall_curve or cumulative_exposure series is
// not non-decreasing in y (x ascending).
void validate(const PlotSeries& series);

PlotSeries recall_curve_series(std::string name, const std::map<std::size_t, double>& recall_at);
PlotSeries cumulative_exposure_series(std::string name, std::vector<std::size_t> counts);
// Bin lower edge vs count; median/q1/q3 in metadata.
PlotSeries gt_position_series(std::string name, const GtPositionSummary& summary);
PlotSeries scatter_series(std::string name, std::span<const double> x, std::span<const double> y);
// x = 1-based category index; categories listed in metadata as label_<i>.
PlotSeries bar_series(std::string name, std::span<const std::pair<std::string, double>> bars);

struct PlotSources {
  const AggregateResult* aggregate = nullptr;
  std::vector<std::pair<std::string, GtPositionSummary>> gt_positions;
  std::vector<std::pair<std::string, std::vector<std::size_t>>> exposure_counts;
  // (recall@200, HR@K) per (pipeline, seed)
  std::vector<std::pair<double, double>> coverage_points;
  std::size_t k = kDefaultK;
};

// Builds every series of `kind` that the sources support. Throws
// ValidationError for unknown kinds or when the needed payload is missing.
std::vector<PlotSeries> emit_plot_data(const PlotSources& sources, std::string_view kind);

// header "x,y", one point per line, full precision
std::string plot_csv(const PlotSeries& series);
// Writes <dir>/<name>.csv and <dir>/<name>.meta.json.
void write_plot(const PlotSeries& series, const std::filesystem::path& dir);

void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace coldstart
