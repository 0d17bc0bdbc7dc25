#include "dmba/reporting.hpp"

#include <algorithm>
#include <filesystem>
#include <set>
#include <tuple>

#include "dmba/csv.hpp"
#include "dmba/util.hpp"

namespace dmba {

namespace {

namespace fs = std::filesystem;

const std::vector<std::string> kPairHeader = {"pair_id", "model_id",  "config_id",      "batch_index", "bias_type",
                                              "domain",  "a_stereo",  "a_anti",         "bias_agreement", "delta"};
const std::vector<std::string> kCompletionHeader = {"pair_id",   "model_id",          "config_id",
                                                    "batch_index", "bias_type",       "domain",
                                                    "truncated_variant", "bias_completion", "sim_stereo",
                                                    "sim_anti"};

double parse_real(const std::string& field, const std::string& context) {
    try {
        std::size_t used = 0;
        double v = std::stod(field, &used);
        if (used != field.size()) throw std::invalid_argument(field);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorKind::parse, context + ": not a number: '" + field + "'");
    }
}

int parse_int(const std::string& field, const std::string& context) {
    try {
        std::size_t used = 0;
        int v = std::stoi(field, &used);
        if (used != field.size()) throw std::invalid_argument(field);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorKind::parse, context + ": not an integer: '" + field + "'");
    }
}

// Maps header names to column positions, requiring every expected column.
std::map<std::string, std::size_t> header_index(const std::vector<std::string>& header,
                                                const std::vector<std::string>& expected,
                                                const std::string& path) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < header.size(); ++i) index[header[i]] = i;
    for (const auto& name : expected)
        if (!index.count(name)) throw Error(ErrorKind::schema, path + ": missing column '" + name + "'");
    return index;
}

nlohmann::json comparison_json(const ModelComparison& c) {
    return {{"model_a", c.model_a},
            {"model_b", c.model_b},
            {"prevalence_a", round6(c.prevalence_a)},
            {"prevalence_b", round6(c.prevalence_b)},
            {"diff", round6(c.diff)},
            {"ci_low", round6(c.ci_low)},
            {"ci_high", round6(c.ci_high)}};
}

// (bias_type x model) prevalence cells for the grouped bar charts.
template <typename Row, typename Indicator>
std::vector<std::vector<std::optional<double>>> type_model_cells(const std::vector<Row>& rows,
                                                                 const std::vector<std::string>& models,
                                                                 Indicator indicator) {
    std::map<std::pair<std::string, std::string>, std::vector<int>> cells;
    for (const auto& row : rows)
        cells[{to_string(row.result.bias_type), row.model_id}].push_back(indicator(row));
    std::vector<std::vector<std::optional<double>>> values;
    for (BiasType type : kAllBiasTypes) {
        std::vector<std::optional<double>> row_values;
        for (const auto& model : models) {
            auto it = cells.find({to_string(type), model});
            if (it == cells.end())
                row_values.push_back(std::nullopt);
            else
                row_values.push_back(prevalence(it->second));
        }
        values.push_back(std::move(row_values));
    }
    return values;
}

std::vector<std::string> models_from_metadata(const RunResults& results) {
    if (results.metadata.contains("models"))
        return results.metadata.at("models").get<std::vector<std::string>>();
    std::set<std::string> seen;
    for (const auto& row : results.pair_rows) seen.insert(row.model_id);
    for (const auto& row : results.completion_rows) seen.insert(row.model_id);
    return {seen.begin(), seen.end()};
}

void write_svg(const std::string& path, const std::string& content, ReportBundle& bundle) {
    atomic_write_file(path, content);
    bundle.svg_paths.push_back(path);
}

std::string sweep_points_svg(const std::vector<SweepPoint>& points, const std::string& parameter) {
    std::vector<double> xs;
    LineSeries agreement{"agreement prevalence", {}};
    LineSeries completion{"completion prevalence", {}};
    for (const auto& p : points) {
        xs.push_back(p.value);
        agreement.values.push_back(p.summary.prevalence_agreement);
        completion.values.push_back(p.summary.prevalence_completion);
    }
    return render_line_chart_svg("Bias prevalence vs " + parameter, parameter, "prevalence (%)", xs,
                                 {agreement, completion});
}

}  // namespace

ReportBundle export_results(const RunResults& results, const std::string& out_dir) {
    fs::create_directories(out_dir);
    ReportBundle bundle;

    // Per-pair table, ordered by (pair_id, model_id, config_id).
    std::vector<PairRow> pair_rows = results.pair_rows;
    std::sort(pair_rows.begin(), pair_rows.end(), [](const PairRow& a, const PairRow& b) {
        return std::tie(a.result.pair_id, a.model_id, a.config_id) <
               std::tie(b.result.pair_id, b.model_id, b.config_id);
    });
    std::vector<std::vector<std::string>> rows;
    rows.reserve(pair_rows.size());
    for (const auto& row : pair_rows) {
        rows.push_back({row.result.pair_id, row.model_id, row.config_id, std::to_string(row.batch_index),
                        to_string(row.result.bias_type), row.result.domain, format_fixed6(row.result.a_stereo),
                        format_fixed6(row.result.a_anti), std::to_string(row.result.bias_agreement),
                        format_fixed6(row.result.delta)});
    }
    bundle.per_pair_csv = (fs::path(out_dir) / "per_pair.csv").string();
    csv::write_file(bundle.per_pair_csv, kPairHeader, rows);

    // Per-completion table, same ordering plus the truncated variant.
    std::vector<CompletionRow> completion_rows = results.completion_rows;
    std::sort(completion_rows.begin(), completion_rows.end(), [](const CompletionRow& a, const CompletionRow& b) {
        return std::tie(a.result.pair_id, a.model_id, a.config_id, a.result.truncated_variant) <
               std::tie(b.result.pair_id, b.model_id, b.config_id, b.result.truncated_variant);
    });
    rows.clear();
    rows.reserve(completion_rows.size());
    for (const auto& row : completion_rows) {
        rows.push_back({row.result.pair_id, row.model_id, row.config_id, std::to_string(row.batch_index),
                        to_string(row.result.bias_type), row.result.domain, to_string(row.result.truncated_variant),
                        std::to_string(row.result.bias_completion), format_fixed6(row.result.sim_stereo),
                        format_fixed6(row.result.sim_anti)});
    }
    bundle.per_completion_csv = (fs::path(out_dir) / "per_completion.csv").string();
    csv::write_file(bundle.per_completion_csv, kCompletionHeader, rows);

    nlohmann::json summary;
    summary["schema_version"] = kSummarySchemaVersion;
    summary["run_id"] = results.run_id;
    summary["overall"] = results.overall.to_json();
    nlohmann::json per_config = nlohmann::json::object();
    for (const auto& [config_id, s] : results.per_config) per_config[config_id] = s.to_json();
    summary["per_config"] = per_config;
    nlohmann::json per_model = nlohmann::json::object();
    for (const auto& [model, s] : results.per_model) per_model[model] = s.to_json();
    summary["per_model"] = per_model;
    nlohmann::json comparisons = nlohmann::json::array();
    for (const auto& c : results.comparisons) comparisons.push_back(comparison_json(c));
    summary["comparisons"] = comparisons;
    summary["run_metadata"] = results.metadata;
    bundle.summary_json = (fs::path(out_dir) / "summary.json").string();
    atomic_write_file(bundle.summary_json, summary.dump(2) + "\n");

    bundle.correlation_csv = (fs::path(out_dir) / "correlation.csv").string();
    write_correlation_csv(results.correlation, bundle.correlation_csv);

    const std::vector<std::string> models = models_from_metadata(results);
    std::vector<std::string> group_labels;
    for (BiasType type : kAllBiasTypes) group_labels.emplace_back(to_string(type));

    write_svg((fs::path(out_dir) / "agreement_by_type.svg").string(),
              render_grouped_bar_svg(
                  "Agreement bias prevalence by bias type", "prevalence (%)", group_labels, models,
                  type_model_cells(results.pair_rows, models,
                                   [](const PairRow& r) { return r.result.bias_agreement; })),
              bundle);
    write_svg((fs::path(out_dir) / "completion_by_type.svg").string(),
              render_grouped_bar_svg(
                  "Completion bias prevalence by bias type", "prevalence (%)", group_labels, models,
                  type_model_cells(results.completion_rows, models,
                                   [](const CompletionRow& r) { return r.result.bias_completion; })),
              bundle);
    if (results.correlation) {
        write_svg((fs::path(out_dir) / "correlation_heatmap.svg").string(),
                  render_heatmap_svg("Metric correlation matrix", results.correlation->variables,
                                     results.correlation->values),
                  bundle);
    }
    return bundle;
}

void write_correlation_csv(const std::optional<CorrelationMatrix>& matrix, const std::string& path) {
    std::vector<std::string> header = {"variable"};
    std::vector<std::vector<std::string>> rows;
    if (matrix) {
        for (const auto& v : matrix->variables) header.push_back(v);
        for (std::size_t i = 0; i < matrix->variables.size(); ++i) {
            std::vector<std::string> row = {matrix->variables[i]};
            for (std::size_t j = 0; j < matrix->variables.size(); ++j) {
                const auto& cell = matrix->values[i][j];
                row.push_back(cell ? format_fixed6(*cell) : "");  // empty cell = undefined
            }
            rows.push_back(std::move(row));
        }
    } else {
        for (const char* v : kCorrelationVariables) header.emplace_back(v);
    }
    csv::write_file(path, header, rows);
}

void write_sweep_csv(const std::vector<SweepPoint>& points, const std::string& value_name,
                     const std::string& path) {
    std::vector<std::string> header = {value_name,
                                       "n_pairs",
                                       "n_completions",
                                       "unparseable_count",
                                       "failed_count",
                                       "prevalence_agreement",
                                       "prevalence_completion",
                                       "mean_delta",
                                       "mean_magnitude",
                                       "aggregate_indicator"};
    auto opt6 = [](const std::optional<double>& v) { return v ? format_fixed6(*v) : std::string(); };
    std::vector<std::vector<std::string>> rows;
    for (const auto& p : points) {
        const MetricSummary& s = p.summary;
        rows.push_back({format_double(p.value), std::to_string(s.n_pairs), std::to_string(s.n_completions),
                        std::to_string(s.unparseable_count), std::to_string(s.failed_count),
                        opt6(s.prevalence_agreement), opt6(s.prevalence_completion), opt6(s.mean_delta),
                        opt6(s.mean_magnitude),
                        s.aggregate_indicator ? std::to_string(*s.aggregate_indicator) : std::string()});
    }
    csv::write_file(path, header, rows);
}

ReportBundle export_sweep_results(const SweepResults& sweep, const Dataset& sample, const std::string& out_dir) {
    fs::create_directories(out_dir);
    ReportBundle bundle;

    std::string temp_csv = (fs::path(out_dir) / "sweep_temperature.csv").string();
    write_sweep_csv(sweep.temperature, "temperature", temp_csv);
    bundle.sweep_csvs.push_back(temp_csv);
    std::string top_p_csv = (fs::path(out_dir) / "sweep_top_p.csv").string();
    write_sweep_csv(sweep.top_p, "top_p", top_p_csv);
    bundle.sweep_csvs.push_back(top_p_csv);

    // The sampled pairs travel with the numbers so the sweep is repeatable
    // from the bundle alone.
    std::string sample_csv = (fs::path(out_dir) / "sweep_sample.csv").string();
    write_dataset_csv(sample, sample_csv);
    bundle.sweep_csvs.push_back(sample_csv);

    nlohmann::json summary;
    summary["schema_version"] = kSummarySchemaVersion;
    summary["run_id"] = sweep.run_id;
    nlohmann::json temp_points = nlohmann::json::array();
    for (const auto& p : sweep.temperature)
        temp_points.push_back({{"value", p.value}, {"summary", p.summary.to_json()}});
    summary["temperature"] = temp_points;
    nlohmann::json top_p_points = nlohmann::json::array();
    for (const auto& p : sweep.top_p)
        top_p_points.push_back({{"value", p.value}, {"summary", p.summary.to_json()}});
    summary["top_p"] = top_p_points;
    summary["run_metadata"] = sweep.metadata;
    bundle.summary_json = (fs::path(out_dir) / "sweep_summary.json").string();
    atomic_write_file(bundle.summary_json, summary.dump(2) + "\n");

    write_svg((fs::path(out_dir) / "sweep_temperature.svg").string(),
              sweep_points_svg(sweep.temperature, "temperature"), bundle);
    write_svg((fs::path(out_dir) / "sweep_top_p.svg").string(), sweep_points_svg(sweep.top_p, "top_p"), bundle);
    return bundle;
}

std::vector<PairRow> load_pair_results(const std::string& path) {
    auto table = csv::read_file(path);
    if (table.empty()) throw Error(ErrorKind::schema, path + ": missing header row");
    auto index = header_index(table[0], kPairHeader, path);

    std::vector<PairRow> rows;
    rows.reserve(table.size() - 1);
    for (std::size_t i = 1; i < table.size(); ++i) {
        const auto& fields = table[i];
        const std::string context = path + " row " + std::to_string(i);
        if (fields.size() < table[0].size())
            throw Error(ErrorKind::parse, context + ": expected " + std::to_string(table[0].size()) +
                                              " fields, got " + std::to_string(fields.size()));
        PairRow row;
        row.result.pair_id = fields[index["pair_id"]];
        row.model_id = fields[index["model_id"]];
        row.config_id = fields[index["config_id"]];
        row.batch_index = parse_int(fields[index["batch_index"]], context);
        row.result.bias_type = bias_type_from_string(fields[index["bias_type"]], context);
        row.result.domain = fields[index["domain"]];
        row.result.a_stereo = parse_real(fields[index["a_stereo"]], context);
        row.result.a_anti = parse_real(fields[index["a_anti"]], context);
        row.result.bias_agreement = parse_int(fields[index["bias_agreement"]], context);
        row.result.delta = parse_real(fields[index["delta"]], context);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<CompletionRow> load_completion_results(const std::string& path) {
    auto table = csv::read_file(path);
    if (table.empty()) throw Error(ErrorKind::schema, path + ": missing header row");
    auto index = header_index(table[0], kCompletionHeader, path);

    std::vector<CompletionRow> rows;
    rows.reserve(table.size() - 1);
    for (std::size_t i = 1; i < table.size(); ++i) {
        const auto& fields = table[i];
        const std::string context = path + " row " + std::to_string(i);
        if (fields.size() < table[0].size())
            throw Error(ErrorKind::parse, context + ": expected " + std::to_string(table[0].size()) +
                                              " fields, got " + std::to_string(fields.size()));
        CompletionRow row;
        row.result.pair_id = fields[index["pair_id"]];
        row.model_id = fields[index["model_id"]];
        row.config_id = fields[index["config_id"]];
        row.batch_index = parse_int(fields[index["batch_index"]], context);
        row.result.bias_type = bias_type_from_string(fields[index["bias_type"]], context);
        row.result.domain = fields[index["domain"]];
        row.result.truncated_variant = variant_from_string(fields[index["truncated_variant"]]);
        row.result.bias_completion = parse_int(fields[index["bias_completion"]], context);
        row.result.sim_stereo = parse_real(fields[index["sim_stereo"]], context);
        row.result.sim_anti = parse_real(fields[index["sim_anti"]], context);
        rows.push_back(std::move(row));
    }
    return rows;
}

ReportBundle analyze_results(const std::string& results_dir, const std::string& out_dir) {
    fs::path dir(results_dir);

    RunResults results;
    results.pair_rows = load_pair_results((dir / "per_pair.csv").string());
    results.completion_rows = load_completion_results((dir / "per_completion.csv").string());

    // The summary carries what rows cannot: run identity, error counts and
    // configuration. Without it the rebuild still works, just unattributed.
    std::vector<std::string> models;
    std::vector<std::string> config_ids;
    fs::path summary_path = dir / "summary.json";
    if (fs::exists(summary_path)) {
        nlohmann::json summary = nlohmann::json::parse(read_file(summary_path.string()));
        results.run_id = summary.at("run_id").get<std::string>();
        results.unparseable_count = summary.at("overall").at("unparseable_count").get<int>();
        results.failed_count = summary.at("overall").at("failed_count").get<int>();
        results.metadata = summary.at("run_metadata");
        if (results.metadata.contains("models"))
            models = results.metadata.at("models").get<std::vector<std::string>>();
        if (results.metadata.contains("config_ids"))
            config_ids = results.metadata.at("config_ids").get<std::vector<std::string>>();
    } else {
        results.run_id = "reanalysis";
        results.metadata = {{"recomputed_from", results_dir}};
    }
    if (models.empty()) {
        std::set<std::string> seen;
        for (const auto& row : results.pair_rows) seen.insert(row.model_id);
        for (const auto& row : results.completion_rows) seen.insert(row.model_id);
        models.assign(seen.begin(), seen.end());
    }
    if (config_ids.empty()) {
        std::set<std::string> seen;
        for (const auto& row : results.pair_rows) seen.insert(row.config_id);
        for (const auto& row : results.completion_rows) seen.insert(row.config_id);
        config_ids.assign(seen.begin(), seen.end());
    }

    aggregate_results(results, models, config_ids, {}, {});
    return export_results(results, out_dir);
}

}  // namespace dmba
