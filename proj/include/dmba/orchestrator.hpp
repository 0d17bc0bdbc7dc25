#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmba/corpus.hpp"
#include "dmba/gateway.hpp"
#include "dmba/metrics.hpp"
#include "dmba/prompting.hpp"

namespace dmba {

inline constexpr int kBatchCount = 12;
inline constexpr int kDefaultCheckpointInterval = 50;
inline constexpr int kDefaultPerModelLimit = 4;
inline constexpr int kCheckpointSchemaVersion = 1;

// Fixed batch stratification: batches 1-4 run deterministic decoding,
// 5-8 plain sampling, 9-12 nucleus-restricted sampling.
DecodingConfig batch_decoding_config(int batch_index, int max_tokens,
                                     const std::vector<std::string>& stop_sequences);

struct BatchPlan {
    int batch_index = 0;  // 1-based
    DecodingConfig config;
    std::vector<std::string> pair_ids;

    nlohmann::json to_json() const;
    static BatchPlan from_json(const nlohmann::json& j);
};

struct SweepSpec {
    std::vector<double> temperatures = {0.0, 0.3, 0.5, 0.7, 1.0};
    std::vector<double> top_ps = {0.3, 0.5, 0.7, 0.85, 1.0};
    // Held-fixed partner values, stamped into run metadata.
    double fixed_top_p = 1.0;
    double fixed_temperature = 0.7;
    std::vector<std::string> sample_pair_ids;

    nlohmann::json to_json() const;
    static SweepSpec from_json(const nlohmann::json& j);
};

struct RunPlan {
    std::string run_id;
    std::vector<std::string> models;
    std::vector<BatchPlan> batches;
    std::optional<SweepSpec> sweep;
    double tau = 0.7;
    std::string template_id;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const;
    static RunPlan from_json(const nlohmann::json& j);

    // Content hash over the serialized plan; the resume guard.
    std::string digest() const;
};

// Partitions the dataset deterministically into the 12 fixed-config batches
// (seeded shuffle, near-equal sizes, remainder on the first batches) and
// stamps run identity. Four requests per pair and model are implied:
// agreement stereo/anti and completion stereo/anti.
RunPlan plan_run(const Dataset& dataset, const std::vector<std::string>& models, const PromptTemplate& tmpl,
                 double tau, std::uint64_t seed, const std::vector<std::string>& stop_sequences = {},
                 int max_tokens = 200);

// Everything about a run that is not the pair partition: models, prompt
// template, decoding extras, gateway policy, backend selection.
struct RunConfig {
    std::vector<std::string> models;
    std::uint64_t seed = 0;
    PromptTemplate prompt_template;
    std::vector<std::string> stop_sequences;
    int max_tokens = 200;
    int per_model_limit = kDefaultPerModelLimit;
    int checkpoint_interval = kDefaultCheckpointInterval;
    RetryPolicy retry;
    std::string backend = "replay";  // live | replay | record
    std::string fixtures_path;

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
};

// The planned request list for one batch: for each pair in batch order and
// each model, agreement(stereo), agreement(anti), completion(stereo),
// completion(anti). Pure, so replanning after a restart reproduces the
// exact request ids.
std::vector<GenerationRequest> batch_requests(const BatchPlan& batch, const std::vector<std::string>& models,
                                              const std::map<std::string, SentencePair>& pair_index,
                                              const PromptTemplate& tmpl);

enum class RequestState { pending, done, failed };

const char* to_string(RequestState s);
RequestState request_state_from_string(const std::string& s);

struct StoredResponse {
    std::string text;
    std::string finish_reason;
};

// Durable run state. Self-contained: embeds the plan, the run config and
// the sentence pairs, so resuming needs nothing but this file.
struct Checkpoint {
    int schema_version = kCheckpointSchemaVersion;
    std::string run_id;
    std::string plan_digest;
    std::string created_at;  // wall clock of last write, informational only
    RunPlan plan;
    RunConfig config;
    std::vector<SentencePair> pairs;
    std::map<std::string, RequestState> status;  // covers exactly the plan's request set
    std::map<std::string, StoredResponse> responses;
    std::vector<int> batch_progress;                 // batch indices fully resolved, in completion order
    std::map<int, nlohmann::json> interim_metrics;   // batch index → MetricSummary

    static Checkpoint fresh(RunPlan plan, RunConfig config, std::vector<SentencePair> pairs);

    void save(const std::string& path) const;  // atomic write

    // Refuses (checkpoint error) on unknown schema version, a plan whose
    // recomputed digest disagrees with the stored one, or a status map that
    // does not cover the plan's request set exactly.
    static Checkpoint load(const std::string& path);

    std::map<std::string, SentencePair> pair_index() const;
};

struct ExecuteOptions {
    std::string checkpoint_path;  // empty = no checkpointing
    int max_batches = 0;          // stop after this many newly resolved batches; 0 = no cap
};

struct ExecuteOutcome {
    bool complete = false;  // every batch fully resolved
    Checkpoint checkpoint;
};

// Dispatches all non-done requests batch by batch in checkpoint_interval
// chunks, persisting after every chunk and at every batch boundary. A fatal
// credential/routing error stops further dispatch for that model; its
// requests stay pending for a later resume.
ExecuteOutcome execute(Checkpoint checkpoint, Backend& backend, const ExecuteOptions& options);

// One agreement outcome / one completion outcome, keyed for aggregation.
struct PairRow {
    std::string model_id;
    std::string config_id;
    int batch_index = 0;
    PairResult result;
};

struct CompletionRow {
    std::string model_id;
    std::string config_id;
    int batch_index = 0;
    CompletionResult result;
};

struct RunResults {
    std::string run_id;
    std::vector<PairRow> pair_rows;
    std::vector<CompletionRow> completion_rows;
    int unparseable_count = 0;  // agreement responses that did not parse
    int failed_count = 0;       // requests failed after retries
    MetricSummary overall;
    std::map<std::string, MetricSummary> per_config;
    std::map<std::string, MetricSummary> per_model;
    std::optional<CorrelationMatrix> correlation;
    std::vector<ModelComparison> comparisons;  // agreement prevalence, all model pairs
    nlohmann::json metadata;                   // full run configuration, no wall-clock values
};

// Scores every stored response in the checkpoint and aggregates. Usable on
// partial checkpoints; unresolved requests simply contribute nothing.
RunResults assemble_results(const Checkpoint& checkpoint);

struct ErrorCounts {
    int unparseable = 0;
    int failed = 0;
};

// Fills the aggregate sections (overall, per-config, per-model, correlation,
// comparisons) from the row sections. `results` must already carry its rows,
// overall counts and metadata; the count maps attribute errors to cohorts
// and may be empty when that attribution is unknown (e.g. rows reloaded
// from CSV).
void aggregate_results(RunResults& results, const std::vector<std::string>& models,
                       const std::vector<std::string>& config_ids,
                       const std::map<std::string, ErrorCounts>& config_counts,
                       const std::map<std::string, ErrorCounts>& model_counts);

struct SweepResults {
    std::string run_id;
    std::vector<SweepPoint> temperature;  // ascending in the swept value
    std::vector<SweepPoint> top_p;
    std::vector<std::string> sample_pair_ids;
    nlohmann::json metadata;
};

// Runs both decoding sweeps over one shared stratified sample: each grid
// point becomes a single-batch plan pushed through execute() with the same
// template, tau and seed.
SweepResults sensitivity_run(const Dataset& sample, const RunConfig& config, double tau, const SweepSpec& spec,
                             Backend& backend);

nlohmann::json to_json(const SentencePair& pair);
SentencePair sentence_pair_from_json(const nlohmann::json& j);

}  // namespace dmba
