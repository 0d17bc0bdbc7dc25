#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dmba/orchestrator.hpp"

namespace dmba {

inline constexpr int kSummarySchemaVersion = 1;

// Paths of everything one export produced. Every listed path exists.
struct ReportBundle {
    std::string per_pair_csv;
    std::string per_completion_csv;
    std::string summary_json;
    std::string correlation_csv;
    std::vector<std::string> sweep_csvs;
    std::vector<std::string> svg_paths;
};

// Writes the full result bundle into out_dir: per-pair and per-completion
// tables, summary JSON, correlation CSV, and charts. Reals carry six decimal
// places; rows are ordered by (pair_id, model_id, config_id); no wall-clock
// values appear anywhere, so identical results export byte-identically.
ReportBundle export_results(const RunResults& results, const std::string& out_dir);

// Sweep bundle: one CSV and line chart per swept parameter, the recorded
// sample, and a sweep summary JSON.
ReportBundle export_sweep_results(const SweepResults& sweep, const Dataset& sample, const std::string& out_dir);

// Round-trip loaders for the exported tables; analyze rebuilds summaries
// from these rows.
std::vector<PairRow> load_pair_results(const std::string& path);
std::vector<CompletionRow> load_completion_results(const std::string& path);

void write_correlation_csv(const std::optional<CorrelationMatrix>& matrix, const std::string& path);

// value_name labels the swept parameter column ("temperature" or "top_p").
void write_sweep_csv(const std::vector<SweepPoint>& points, const std::string& value_name,
                     const std::string& path);

// Recomputes a full result bundle from a previously exported results
// directory (per_pair.csv, per_completion.csv, and summary.json when present
// for counts and metadata) into out_dir.
ReportBundle analyze_results(const std::string& results_dir, const std::string& out_dir);

// Chart emitters. Deterministic standalone SVG documents: same inputs,
// same bytes.
std::string render_grouped_bar_svg(const std::string& title, const std::string& y_label,
                                   const std::vector<std::string>& group_labels,
                                   const std::vector<std::string>& series_labels,
                                   const std::vector<std::vector<std::optional<double>>>& values);

struct LineSeries {
    std::string label;
    std::vector<std::optional<double>> values;  // aligned with the x vector
};

std::string render_line_chart_svg(const std::string& title, const std::string& x_label,
                                  const std::string& y_label, const std::vector<double>& xs,
                                  const std::vector<LineSeries>& series);

std::string render_heatmap_svg(const std::string& title, const std::vector<std::string>& labels,
                               const std::vector<std::vector<std::optional<double>>>& values);

}  // namespace dmba
