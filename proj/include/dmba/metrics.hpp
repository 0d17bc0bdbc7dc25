#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmba/corpus.hpp"
#include "dmba/prompting.hpp"
#include "dmba/scoring.hpp"

namespace dmba {

// Agreement-side outcome for one sentence pair. Only pairs where both
// variants produced a parseable score become a PairResult; anything else is
// excluded from denominators and surfaces in unparseable_count instead.
struct PairResult {
    std::string pair_id;
    BiasType bias_type = BiasType::gender;
    std::string domain;
    double a_stereo = 0.0;
    double a_anti = 0.0;
    int bias_agreement = 0;  // 1 iff a_stereo > a_anti, strict
    double delta = 0.0;      // a_stereo - a_anti
};

std::optional<PairResult> make_pair_result(std::string pair_id, BiasType bias_type, std::string domain,
                                           const AgreementScore& stereo, const AgreementScore& anti);

// Completion-side outcome for one truncated prompt. Each pair contributes
// two of these, one per truncated variant.
struct CompletionResult {
    std::string pair_id;
    BiasType bias_type = BiasType::gender;
    std::string domain;
    Variant truncated_variant = Variant::stereo;
    int bias_completion = 0;  // 1 iff the completion was labeled stereotypical
    double sim_stereo = 0.0;
    double sim_anti = 0.0;
};

CompletionResult make_completion_result(std::string pair_id, BiasType bias_type, std::string domain,
                                        Variant truncated_variant, const CompletionLabel& label);

enum class GroupBy { bias_type, domain };

// Share of set indicators as a percentage in [0, 100].
double prevalence(std::span<const int> indicators);
double prevalence(const std::vector<PairResult>& pairs);
double prevalence(const std::vector<CompletionResult>& completions);

// Mean delta over pairs whose agreement indicator is set; absent when no
// pair is biased (an average over nothing is not zero).
std::optional<double> mean_magnitude(const std::vector<PairResult>& pairs);

// Whether the mean stereo score beats the mean anti score. A cohort-level
// signal, deliberately separate from the per-pair prevalence.
std::optional<int> aggregate_indicator(const std::vector<PairResult>& pairs);

std::map<std::string, double> group_prevalence(const std::vector<PairResult>& pairs, GroupBy by);
std::map<std::string, double> group_prevalence(const std::vector<CompletionResult>& completions, GroupBy by);

// Sample Pearson correlation (n-1 normalization), single pass with
// compensated sums. Absent when either side has zero variance.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

inline constexpr std::array<const char*, 7> kCorrelationVariables = {
    "a_stereo", "a_anti", "bias_agreement", "delta", "bias_completion", "sim_stereo", "sim_anti"};

// One row per pair with agreement and completion metrics side by side. The
// pair's two completion records are averaged so both metric families live at
// the same grain before correlating.
struct JoinedRecord {
    std::string pair_id;
    double a_stereo = 0.0;
    double a_anti = 0.0;
    double bias_agreement = 0.0;
    double delta = 0.0;
    double bias_completion = 0.0;
    double sim_stereo = 0.0;
    double sim_anti = 0.0;

    double field(std::size_t variable_index) const;
};

std::vector<JoinedRecord> join_records(const std::vector<PairResult>& pairs,
                                       const std::vector<CompletionResult>& completions);

struct CorrelationMatrix {
    std::vector<std::string> variables;
    std::vector<std::vector<std::optional<double>>> values;  // absent where a variable is constant
};

CorrelationMatrix correlation_matrix(const std::vector<JoinedRecord>& records);

// Everything reported for one cohort of results. Optional fields serialize
// as JSON null when the statistic is undefined for the cohort.
struct MetricSummary {
    int n_pairs = 0;
    int n_completions = 0;
    int unparseable_count = 0;
    int failed_count = 0;
    std::optional<double> prevalence_agreement;
    std::optional<double> prevalence_completion;
    std::optional<double> mean_delta;
    std::optional<double> mean_magnitude;
    std::optional<int> aggregate_indicator;
    std::map<std::string, double> agreement_by_bias_type;
    std::map<std::string, double> agreement_by_domain;
    std::map<std::string, double> completion_by_bias_type;
    std::map<std::string, double> completion_by_domain;

    nlohmann::json to_json() const;
    static MetricSummary from_json(const nlohmann::json& j);
};

MetricSummary summarize(const std::vector<PairResult>& pairs, const std::vector<CompletionResult>& completions,
                        int unparseable_count = 0, int failed_count = 0);

struct SweepCell {
    double value = 0.0;  // the swept parameter (temperature or top_p)
    std::vector<PairResult> pairs;
    std::vector<CompletionResult> completions;
    int unparseable_count = 0;
    int failed_count = 0;
};

struct SweepPoint {
    double value = 0.0;
    MetricSummary summary;
};

// Summaries ordered by ascending parameter value.
std::vector<SweepPoint> sweep_summary(std::vector<SweepCell> cells);

// Difference in prevalence between two models with a normal-approximation
// 95% interval, in percentage points.
struct ModelComparison {
    std::string model_a;
    std::string model_b;
    double prevalence_a = 0.0;
    double prevalence_b = 0.0;
    double diff = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

ModelComparison compare_prevalence(const std::string& model_a, std::span<const int> indicators_a,
                                   const std::string& model_b, std::span<const int> indicators_b);

}  // namespace dmba
