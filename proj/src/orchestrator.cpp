#include "dmba/orchestrator.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <set>

#include "dmba/scoring.hpp"
#include "dmba/util.hpp"

namespace dmba {

namespace {

// Exclusive advisory lock beside the checkpoint so two orchestrators never
// interleave writes to the same run.
class FileLock {
  public:
    explicit FileLock(const std::string& path) : path_(path) {
        fd_ = ::open(path.c_str(), O_CREAT | O_RDWR, 0644);
        if (fd_ < 0) throw Error(ErrorKind::storage, "cannot open lock file: " + path);
        if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
            ::close(fd_);
            fd_ = -1;
            throw Error(ErrorKind::storage, "checkpoint is locked by another process: " + path);
        }
    }

    ~FileLock() {
        if (fd_ >= 0) {
            ::flock(fd_, LOCK_UN);
            ::close(fd_);
        }
    }

    FileLock(const FileLock&) = delete;
    FileLock& operator=(const FileLock&) = delete;

  private:
    std::string path_;
    int fd_ = -1;
};

nlohmann::json retry_to_json(const RetryPolicy& p) {
    return {{"max_attempts", p.max_attempts},
            {"base_delay_ms", p.base_delay_ms},
            {"multiplier", p.multiplier},
            {"jitter_fraction", p.jitter_fraction},
            {"request_timeout_ms", p.request_timeout_ms}};
}

RetryPolicy retry_from_json(const nlohmann::json& j) {
    RetryPolicy p;
    p.max_attempts = j.at("max_attempts").get<int>();
    p.base_delay_ms = j.at("base_delay_ms").get<double>();
    p.multiplier = j.at("multiplier").get<double>();
    p.jitter_fraction = j.at("jitter_fraction").get<double>();
    p.request_timeout_ms = j.at("request_timeout_ms").get<double>();
    return p;
}

std::vector<std::string> dataset_pair_ids(const Dataset& d) {
    std::vector<std::string> ids;
    ids.reserve(d.pairs.size());
    for (const auto& p : d.pairs) ids.push_back(p.pair_id);
    return ids;
}

// Per-batch scoring shared by interim metrics and final assembly.
struct ScoredBatch {
    std::vector<PairRow> pair_rows;
    std::vector<CompletionRow> completion_rows;
    int unparseable = 0;
    int failed = 0;
    std::map<std::string, int> unparseable_by_model;
    std::map<std::string, int> failed_by_model;
};

ScoredBatch score_batch(const Checkpoint& ckpt, const BatchPlan& batch,
                        const std::map<std::string, SentencePair>& pair_index) {
    auto requests = batch_requests(batch, ckpt.plan.models, pair_index, ckpt.config.prompt_template);
    const std::string config_id = batch.config.config_id();

    ScoredBatch out;
    // batch_requests emits exactly four requests per (pair, model):
    // agreement stereo/anti, completion stereo/anti, in that order.
    for (std::size_t base = 0; base + 3 < requests.size(); base += 4) {
        const GenerationRequest& ag_s = requests[base];
        const GenerationRequest& ag_a = requests[base + 1];
        const GenerationRequest& co_s = requests[base + 2];
        const GenerationRequest& co_a = requests[base + 3];
        const std::string& model = ag_s.model_id;
        const SentencePair& pair = pair_index.at(ag_s.stimulus.pair_id);

        for (const GenerationRequest* r : {&ag_s, &ag_a, &co_s, &co_a}) {
            if (ckpt.status.at(r->request_id) == RequestState::failed) {
                ++out.failed;
                ++out.failed_by_model[model];
            }
        }

        auto response_text = [&](const GenerationRequest& r) -> const std::string* {
            if (ckpt.status.at(r.request_id) != RequestState::done) return nullptr;
            return &ckpt.responses.at(r.request_id).text;
        };

        if (const std::string* ts = response_text(ag_s)) {
            if (const std::string* ta = response_text(ag_a)) {
                AgreementScore ss = parse_agreement(*ts);
                AgreementScore sa = parse_agreement(*ta);
                if (!ss.ok()) {
                    ++out.unparseable;
                    ++out.unparseable_by_model[model];
                }
                if (!sa.ok()) {
                    ++out.unparseable;
                    ++out.unparseable_by_model[model];
                }
                if (auto pr = make_pair_result(pair.pair_id, pair.bias_type, pair.domain, ss, sa))
                    out.pair_rows.push_back({model, config_id, batch.batch_index, std::move(*pr)});
            }
        }

        auto score_completion = [&](const GenerationRequest& r, Variant variant) {
            const std::string* text = response_text(r);
            if (!text) return;
            CompletionLabel label = classify_completion(*text, pair.stereo_text, pair.anti_text, ckpt.plan.tau);
            out.completion_rows.push_back({model, config_id, batch.batch_index,
                                           make_completion_result(pair.pair_id, pair.bias_type, pair.domain,
                                                                  variant, label)});
        };
        score_completion(co_s, Variant::stereo);
        score_completion(co_a, Variant::anti);
    }
    return out;
}

std::vector<PairResult> strip_keys(const std::vector<PairRow>& rows) {
    std::vector<PairResult> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.result);
    return out;
}

std::vector<CompletionResult> strip_keys(const std::vector<CompletionRow>& rows) {
    std::vector<CompletionResult> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.result);
    return out;
}

}  // namespace

DecodingConfig batch_decoding_config(int batch_index, int max_tokens,
                                     const std::vector<std::string>& stop_sequences) {
    if (batch_index < 1 || batch_index > kBatchCount)
        throw Error(ErrorKind::value, "batch index must be in [1,12], got " + std::to_string(batch_index));
    DecodingConfig c;
    c.max_tokens = max_tokens;
    c.stop_sequences = stop_sequences;
    if (batch_index <= 4) {
        c.temperature = 0.0;
        c.top_p = 1.0;
    } else if (batch_index <= 8) {
        c.temperature = 0.7;
        c.top_p = 1.0;
    } else {
        c.temperature = 0.7;
        c.top_p = 0.85;
    }
    return c;
}

nlohmann::json BatchPlan::to_json() const {
    return {{"batch_index", batch_index}, {"config", config.to_json()}, {"pair_ids", pair_ids}};
}

BatchPlan BatchPlan::from_json(const nlohmann::json& j) {
    BatchPlan b;
    b.batch_index = j.at("batch_index").get<int>();
    b.config = DecodingConfig::from_json(j.at("config"));
    b.pair_ids = j.at("pair_ids").get<std::vector<std::string>>();
    return b;
}

nlohmann::json SweepSpec::to_json() const {
    return {{"temperatures", temperatures},
            {"top_ps", top_ps},
            {"fixed_top_p", fixed_top_p},
            {"fixed_temperature", fixed_temperature},
            {"sample_pair_ids", sample_pair_ids}};
}

SweepSpec SweepSpec::from_json(const nlohmann::json& j) {
    SweepSpec s;
    s.temperatures = j.at("temperatures").get<std::vector<double>>();
    s.top_ps = j.at("top_ps").get<std::vector<double>>();
    s.fixed_top_p = j.at("fixed_top_p").get<double>();
    s.fixed_temperature = j.at("fixed_temperature").get<double>();
    s.sample_pair_ids = j.at("sample_pair_ids").get<std::vector<std::string>>();
    return s;
}

nlohmann::json RunPlan::to_json() const {
    nlohmann::json jbatches = nlohmann::json::array();
    for (const auto& b : batches) jbatches.push_back(b.to_json());
    return {{"run_id", run_id},
            {"models", models},
            {"batches", jbatches},
            {"sweep", sweep ? sweep->to_json() : nlohmann::json(nullptr)},
            {"tau", tau},
            {"template_id", template_id},
            {"seed", seed}};
}

RunPlan RunPlan::from_json(const nlohmann::json& j) {
    RunPlan p;
    p.run_id = j.at("run_id").get<std::string>();
    p.models = j.at("models").get<std::vector<std::string>>();
    for (const auto& jb : j.at("batches")) p.batches.push_back(BatchPlan::from_json(jb));
    if (!j.at("sweep").is_null()) p.sweep = SweepSpec::from_json(j.at("sweep"));
    p.tau = j.at("tau").get<double>();
    p.template_id = j.at("template_id").get<std::string>();
    p.seed = j.at("seed").get<std::uint64_t>();
    return p;
}

std::string RunPlan::digest() const { return fnv1a128(to_json().dump()).hex(); }

RunPlan plan_run(const Dataset& dataset, const std::vector<std::string>& models, const PromptTemplate& tmpl,
                 double tau, std::uint64_t seed, const std::vector<std::string>& stop_sequences,
                 int max_tokens) {
    if (dataset.pairs.empty()) throw Error(ErrorKind::precondition, "plan_run: dataset is empty");
    if (models.empty()) throw Error(ErrorKind::precondition, "plan_run: no models given");
    if (tau < 0.0 || tau > 1.0)
        throw Error(ErrorKind::value, "tau must be in [0,1], got " + format_double(tau));

    RunPlan plan;
    plan.models = models;
    plan.tau = tau;
    plan.template_id = tmpl.template_id;
    plan.seed = seed;

    // Seeded shuffle then near-equal split, remainder on the first batches.
    std::vector<std::size_t> order(dataset.pairs.size());
    std::iota(order.begin(), order.end(), 0);
    SplitMix64 rng(seed);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.bounded(i)]);

    const std::size_t n = order.size();
    const std::size_t base = n / kBatchCount;
    const std::size_t remainder = n % kBatchCount;
    std::size_t pos = 0;
    for (int b = 1; b <= kBatchCount; ++b) {
        BatchPlan batch;
        batch.batch_index = b;
        batch.config = batch_decoding_config(b, max_tokens, stop_sequences);
        std::size_t size = base + (static_cast<std::size_t>(b) <= remainder ? 1 : 0);
        for (std::size_t k = 0; k < size; ++k) batch.pair_ids.push_back(dataset.pairs[order[pos + k]].pair_id);
        pos += size;
        plan.batches.push_back(std::move(batch));
    }

    // run_id derives from the plan content itself, so identical inputs and
    // seed name the same run.
    plan.run_id = "run-" + plan.digest().substr(0, 12);
    return plan;
}

nlohmann::json RunConfig::to_json() const {
    return {{"models", models},
            {"seed", seed},
            {"template", {{"template_id", prompt_template.template_id}, {"body", prompt_template.body}}},
            {"stop_sequences", stop_sequences},
            {"max_tokens", max_tokens},
            {"per_model_limit", per_model_limit},
            {"checkpoint_interval", checkpoint_interval},
            {"retry", retry_to_json(retry)},
            {"backend", backend},
            {"fixtures_path", fixtures_path}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig c;
    c.models = j.at("models").get<std::vector<std::string>>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.prompt_template = make_template(j.at("template").at("template_id").get<std::string>(),
                                      j.at("template").at("body").get<std::string>());
    c.stop_sequences = j.at("stop_sequences").get<std::vector<std::string>>();
    c.max_tokens = j.at("max_tokens").get<int>();
    c.per_model_limit = j.at("per_model_limit").get<int>();
    c.checkpoint_interval = j.at("checkpoint_interval").get<int>();
    c.retry = retry_from_json(j.at("retry"));
    c.backend = j.at("backend").get<std::string>();
    c.fixtures_path = j.at("fixtures_path").get<std::string>();
    return c;
}

std::vector<GenerationRequest> batch_requests(const BatchPlan& batch, const std::vector<std::string>& models,
                                              const std::map<std::string, SentencePair>& pair_index,
                                              const PromptTemplate& tmpl) {
    std::vector<GenerationRequest> out;
    out.reserve(batch.pair_ids.size() * models.size() * 4);
    for (const auto& pair_id : batch.pair_ids) {
        auto it = pair_index.find(pair_id);
        if (it == pair_index.end())
            throw Error(ErrorKind::integrity, "plan references unknown pair id: " + pair_id);
        const SentencePair& pair = it->second;
        for (const auto& model : models) {
            out.push_back(GenerationRequest::make(
                model, render_agreement_prompt(tmpl, pair.stereo_text, pair_id, Variant::stereo), batch.config));
            out.push_back(GenerationRequest::make(
                model, render_agreement_prompt(tmpl, pair.anti_text, pair_id, Variant::anti), batch.config));
            out.push_back(
                GenerationRequest::make(model, truncate_prompt(pair.stereo_text, pair_id, Variant::stereo),
                                        batch.config));
            out.push_back(GenerationRequest::make(
                model, truncate_prompt(pair.anti_text, pair_id, Variant::anti), batch.config));
        }
    }
    return out;
}

const char* to_string(RequestState s) {
    switch (s) {
        case RequestState::pending: return "pending";
        case RequestState::done: return "done";
        case RequestState::failed: return "failed";
    }
    return "pending";
}

RequestState request_state_from_string(const std::string& s) {
    if (s == "pending") return RequestState::pending;
    if (s == "done") return RequestState::done;
    if (s == "failed") return RequestState::failed;
    throw Error(ErrorKind::value, "unknown request state: '" + s + "'");
}

nlohmann::json to_json(const SentencePair& pair) {
    return {{"pair_id", pair.pair_id},
            {"bias_type", to_string(pair.bias_type)},
            {"domain", pair.domain},
            {"stereo_text", pair.stereo_text},
            {"anti_text", pair.anti_text}};
}

SentencePair sentence_pair_from_json(const nlohmann::json& j) {
    SentencePair p;
    p.pair_id = j.at("pair_id").get<std::string>();
    p.bias_type = bias_type_from_string(j.at("bias_type").get<std::string>(), p.pair_id);
    p.domain = j.at("domain").get<std::string>();
    p.stereo_text = j.at("stereo_text").get<std::string>();
    p.anti_text = j.at("anti_text").get<std::string>();
    return p;
}

Checkpoint Checkpoint::fresh(RunPlan plan, RunConfig config, std::vector<SentencePair> pairs) {
    Checkpoint c;
    c.run_id = plan.run_id;
    c.plan_digest = plan.digest();
    c.plan = std::move(plan);
    c.config = std::move(config);
    c.pairs = std::move(pairs);

    auto index = c.pair_index();
    for (const auto& batch : c.plan.batches)
        for (const auto& r : batch_requests(batch, c.plan.models, index, c.config.prompt_template))
            c.status.emplace(r.request_id, RequestState::pending);
    return c;
}

std::map<std::string, SentencePair> Checkpoint::pair_index() const {
    std::map<std::string, SentencePair> index;
    for (const auto& p : pairs) index.emplace(p.pair_id, p);
    return index;
}

void Checkpoint::save(const std::string& path) const {
    nlohmann::json j;
    j["schema_version"] = schema_version;
    j["run_id"] = run_id;
    j["plan_digest"] = plan_digest;
    j["created_at"] = iso8601_utc_now();
    j["plan"] = plan.to_json();
    j["run_config"] = config.to_json();
    nlohmann::json jpairs = nlohmann::json::array();
    for (const auto& p : pairs) jpairs.push_back(to_json(p));
    j["pairs"] = jpairs;
    nlohmann::json jstatus = nlohmann::json::object();
    for (const auto& [id, state] : status) jstatus[id] = to_string(state);
    j["status"] = jstatus;
    nlohmann::json jresp = nlohmann::json::object();
    for (const auto& [id, resp] : responses)
        jresp[id] = {{"text", resp.text}, {"finish_reason", resp.finish_reason}};
    j["responses"] = jresp;
    j["batch_progress"] = batch_progress;
    nlohmann::json jinterim = nlohmann::json::object();
    for (const auto& [batch_index, summary] : interim_metrics) jinterim[std::to_string(batch_index)] = summary;
    j["interim_metrics"] = jinterim;

    atomic_write_file(path, j.dump(2) + "\n");
}

Checkpoint Checkpoint::load(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::checkpoint, path + ": not valid JSON: " + e.what());
    }

    Checkpoint c;
    if (!j.contains("schema_version"))
        throw Error(ErrorKind::checkpoint, path + ": missing schema_version");
    c.schema_version = j.at("schema_version").get<int>();
    if (c.schema_version != kCheckpointSchemaVersion)
        throw Error(ErrorKind::checkpoint, path + ": unsupported schema version " +
                                               std::to_string(c.schema_version) + " (expected " +
                                               std::to_string(kCheckpointSchemaVersion) + ")");

    c.run_id = j.at("run_id").get<std::string>();
    c.plan_digest = j.at("plan_digest").get<std::string>();
    c.created_at = j.at("created_at").get<std::string>();
    c.plan = RunPlan::from_json(j.at("plan"));
    if (c.plan.digest() != c.plan_digest)
        throw Error(ErrorKind::checkpoint,
                    path + ": plan digest mismatch, checkpoint belongs to a different plan");
    c.config = RunConfig::from_json(j.at("run_config"));
    for (const auto& jp : j.at("pairs")) c.pairs.push_back(sentence_pair_from_json(jp));
    for (const auto& [id, state] : j.at("status").items())
        c.status.emplace(id, request_state_from_string(state.get<std::string>()));
    for (const auto& [id, resp] : j.at("responses").items())
        c.responses.emplace(id, StoredResponse{resp.at("text").get<std::string>(),
                                               resp.at("finish_reason").get<std::string>()});
    c.batch_progress = j.at("batch_progress").get<std::vector<int>>();
    for (const auto& [key, summary] : j.at("interim_metrics").items())
        c.interim_metrics.emplace(std::stoi(key), summary);

    // The status map must mirror the plan's request universe exactly; any
    // drift means the checkpoint was edited or belongs elsewhere.
    auto index = c.pair_index();
    std::set<std::string> planned;
    for (const auto& batch : c.plan.batches)
        for (const auto& r : batch_requests(batch, c.plan.models, index, c.config.prompt_template))
            planned.insert(r.request_id);
    std::set<std::string> recorded;
    for (const auto& [id, _] : c.status) recorded.insert(id);
    if (planned != recorded)
        throw Error(ErrorKind::checkpoint, path + ": status map does not cover the plan's request set");

    return c;
}

ExecuteOutcome execute(Checkpoint checkpoint, Backend& backend, const ExecuteOptions& options) {
    std::optional<FileLock> lock;
    if (!options.checkpoint_path.empty()) lock.emplace(options.checkpoint_path + ".lock");

    auto save = [&] {
        if (!options.checkpoint_path.empty()) checkpoint.save(options.checkpoint_path);
    };

    const auto pair_index = checkpoint.pair_index();
    std::set<std::string> dead_models;  // hit a fatal error during this call
    int resolved_this_call = 0;
    bool capped = false;

    for (const auto& batch : checkpoint.plan.batches) {
        if (capped) break;
        if (std::find(checkpoint.batch_progress.begin(), checkpoint.batch_progress.end(), batch.batch_index) !=
            checkpoint.batch_progress.end())
            continue;

        const auto requests = batch_requests(batch, checkpoint.plan.models, pair_index,
                                             checkpoint.config.prompt_template);
        std::vector<GenerationRequest> todo;
        for (const auto& r : requests)
            if (checkpoint.status.at(r.request_id) != RequestState::done) todo.push_back(r);

        const std::size_t interval = checkpoint.config.checkpoint_interval > 0
                                         ? static_cast<std::size_t>(checkpoint.config.checkpoint_interval)
                                         : std::max<std::size_t>(todo.size(), 1);

        std::size_t cursor = 0;
        while (cursor < todo.size()) {
            std::vector<GenerationRequest> chunk;
            while (cursor < todo.size() && chunk.size() < interval) {
                if (dead_models.count(todo[cursor].model_id)) {
                    ++cursor;  // model is dead for this call, leave its requests pending
                    continue;
                }
                chunk.push_back(todo[cursor++]);
            }
            if (chunk.empty()) break;

            auto outcomes = bounded_dispatch(backend, chunk, checkpoint.config.per_model_limit);
            for (std::size_t i = 0; i < chunk.size(); ++i) {
                const auto& id = chunk[i].request_id;
                if (outcomes[i].ok()) {
                    checkpoint.status[id] = RequestState::done;
                    checkpoint.responses[id] = {outcomes[i].response->text,
                                                to_string(outcomes[i].response->finish_reason)};
                } else if (outcomes[i].aborted) {
                    // never attempted; stays pending for a later resume
                } else if (outcomes[i].error_kind == ErrorKind::credential ||
                           outcomes[i].error_kind == ErrorKind::routing) {
                    // The model is unusable, not this one request: keep the
                    // whole queue pending so a resume retries all of it.
                    dead_models.insert(chunk[i].model_id);
                } else {
                    checkpoint.status[id] = RequestState::failed;
                }
            }
            save();
        }

        bool resolved = true;
        for (const auto& r : requests) {
            if (checkpoint.status.at(r.request_id) == RequestState::pending) {
                resolved = false;
                break;
            }
        }

        if (resolved) {
            ScoredBatch scored = score_batch(checkpoint, batch, pair_index);
            checkpoint.interim_metrics[batch.batch_index] =
                summarize(strip_keys(scored.pair_rows), strip_keys(scored.completion_rows), scored.unparseable,
                          scored.failed)
                    .to_json();
            checkpoint.batch_progress.push_back(batch.batch_index);
            ++resolved_this_call;
        }
        save();

        if (options.max_batches > 0 && resolved_this_call >= options.max_batches) capped = true;
    }

    ExecuteOutcome outcome;
    outcome.complete = checkpoint.batch_progress.size() == checkpoint.plan.batches.size();
    outcome.checkpoint = std::move(checkpoint);
    return outcome;
}

void aggregate_results(RunResults& results, const std::vector<std::string>& models,
                       const std::vector<std::string>& config_ids,
                       const std::map<std::string, ErrorCounts>& config_counts,
                       const std::map<std::string, ErrorCounts>& model_counts) {
    results.overall = summarize(strip_keys(results.pair_rows), strip_keys(results.completion_rows),
                                results.unparseable_count, results.failed_count);

    // Per-config and per-model cuts reuse the same summarize path.
    std::map<std::string, std::vector<PairResult>> config_pairs;
    std::map<std::string, std::vector<CompletionResult>> config_completions;
    std::map<std::string, std::vector<PairResult>> model_pairs;
    std::map<std::string, std::vector<CompletionResult>> model_completions;
    for (const auto& row : results.pair_rows) {
        config_pairs[row.config_id].push_back(row.result);
        model_pairs[row.model_id].push_back(row.result);
    }
    for (const auto& row : results.completion_rows) {
        config_completions[row.config_id].push_back(row.result);
        model_completions[row.model_id].push_back(row.result);
    }
    auto counts_for = [](const std::map<std::string, ErrorCounts>& m, const std::string& key) {
        auto it = m.find(key);
        return it == m.end() ? ErrorCounts{} : it->second;
    };
    for (const auto& config_id : config_ids) {
        if (results.per_config.count(config_id)) continue;
        ErrorCounts counts = counts_for(config_counts, config_id);
        results.per_config[config_id] = summarize(config_pairs[config_id], config_completions[config_id],
                                                  counts.unparseable, counts.failed);
    }
    for (const auto& model : models) {
        ErrorCounts counts = counts_for(model_counts, model);
        results.per_model[model] =
            summarize(model_pairs[model], model_completions[model], counts.unparseable, counts.failed);
    }

    // Correlation joins at the (model, config) grain so a pair's agreement
    // and completion rows always describe the same cohort.
    std::map<std::pair<std::string, std::string>, std::vector<PairResult>> join_pairs;
    std::map<std::pair<std::string, std::string>, std::vector<CompletionResult>> join_completions;
    for (const auto& row : results.pair_rows) join_pairs[{row.model_id, row.config_id}].push_back(row.result);
    for (const auto& row : results.completion_rows)
        join_completions[{row.model_id, row.config_id}].push_back(row.result);
    std::vector<JoinedRecord> joined;
    for (const auto& [key, pairs] : join_pairs) {
        auto it = join_completions.find(key);
        if (it == join_completions.end()) continue;
        try {
            for (auto& rec : join_records(pairs, it->second)) joined.push_back(std::move(rec));
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::alignment) throw;  // empty overlap in one cohort is not fatal here
        }
    }
    if (joined.size() >= 2) results.correlation = correlation_matrix(joined);

    // Pairwise model contrasts on agreement prevalence.
    for (std::size_t i = 0; i < models.size(); ++i) {
        for (std::size_t j = i + 1; j < models.size(); ++j) {
            std::vector<int> a, b;
            for (const auto& row : results.pair_rows) {
                if (row.model_id == models[i]) a.push_back(row.result.bias_agreement);
                if (row.model_id == models[j]) b.push_back(row.result.bias_agreement);
            }
            if (a.empty() || b.empty()) continue;
            results.comparisons.push_back(compare_prevalence(models[i], a, models[j], b));
        }
    }
}

RunResults assemble_results(const Checkpoint& checkpoint) {
    const auto pair_index = checkpoint.pair_index();

    RunResults results;
    results.run_id = checkpoint.run_id;

    std::map<std::string, ErrorCounts> by_config;
    std::map<std::string, ErrorCounts> by_model;

    for (const auto& batch : checkpoint.plan.batches) {
        ScoredBatch scored = score_batch(checkpoint, batch, pair_index);
        const std::string config_id = batch.config.config_id();
        by_config[config_id].unparseable += scored.unparseable;
        by_config[config_id].failed += scored.failed;
        for (const auto& [model, n] : scored.unparseable_by_model) by_model[model].unparseable += n;
        for (const auto& [model, n] : scored.failed_by_model) by_model[model].failed += n;
        results.unparseable_count += scored.unparseable;
        results.failed_count += scored.failed;
        for (auto& row : scored.pair_rows) results.pair_rows.push_back(std::move(row));
        for (auto& row : scored.completion_rows) results.completion_rows.push_back(std::move(row));
    }

    std::vector<std::string> config_ids;
    for (const auto& batch : checkpoint.plan.batches) {
        std::string id = batch.config.config_id();
        if (std::find(config_ids.begin(), config_ids.end(), id) == config_ids.end())
            config_ids.push_back(std::move(id));
    }
    aggregate_results(results, checkpoint.plan.models, config_ids, by_config, by_model);

    nlohmann::json meta;
    meta["run_id"] = checkpoint.run_id;
    meta["models"] = checkpoint.plan.models;
    meta["tau"] = checkpoint.plan.tau;
    meta["seed"] = checkpoint.plan.seed;
    meta["template_id"] = checkpoint.config.prompt_template.template_id;
    meta["template_body"] = checkpoint.config.prompt_template.body;
    meta["stop_sequences"] = checkpoint.config.stop_sequences;
    meta["max_tokens"] = checkpoint.config.max_tokens;
    meta["per_model_limit"] = checkpoint.config.per_model_limit;
    meta["checkpoint_interval"] = checkpoint.config.checkpoint_interval;
    meta["retry"] = retry_to_json(checkpoint.config.retry);
    meta["backend"] = checkpoint.config.backend;
    meta["fixtures_path"] = checkpoint.config.fixtures_path;
    meta["tokenizer_version"] = kTokenizerVersion;
    meta["n_sentence_pairs"] = checkpoint.pairs.size();
    meta["batch_count"] = checkpoint.plan.batches.size();
    meta["config_ids"] = config_ids;
    if (checkpoint.plan.sweep) meta["sweep"] = checkpoint.plan.sweep->to_json();
    results.metadata = std::move(meta);

    return results;
}

SweepResults sensitivity_run(const Dataset& sample, const RunConfig& config, double tau, const SweepSpec& spec,
                             Backend& backend) {
    if (sample.pairs.empty()) throw Error(ErrorKind::precondition, "sensitivity_run: sample is empty");
    if (spec.temperatures.empty()) throw Error(ErrorKind::precondition, "sensitivity_run: temperature grid is empty");
    if (spec.top_ps.empty()) throw Error(ErrorKind::precondition, "sensitivity_run: top_p grid is empty");

    SweepSpec stamped = spec;
    stamped.sample_pair_ids = dataset_pair_ids(sample);

    auto run_point = [&](double temperature, double top_p) {
        RunPlan plan;
        plan.models = config.models;
        plan.tau = tau;
        plan.template_id = config.prompt_template.template_id;
        plan.seed = config.seed;
        plan.sweep = stamped;
        BatchPlan batch;
        batch.batch_index = 1;
        batch.config = DecodingConfig{temperature, top_p, config.max_tokens, config.stop_sequences};
        batch.config.validate();
        batch.pair_ids = stamped.sample_pair_ids;
        plan.batches.push_back(std::move(batch));
        plan.run_id = "sweep-" + plan.digest().substr(0, 12);

        Checkpoint ckpt = Checkpoint::fresh(std::move(plan), config, sample.pairs);
        ExecuteOutcome outcome = execute(std::move(ckpt), backend, ExecuteOptions{});
        RunResults rr = assemble_results(outcome.checkpoint);
        SweepCell cell;
        cell.pairs = strip_keys(rr.pair_rows);
        cell.completions = strip_keys(rr.completion_rows);
        cell.unparseable_count = rr.unparseable_count;
        cell.failed_count = rr.failed_count;
        return cell;
    };

    std::vector<SweepCell> temp_cells, top_p_cells;
    for (double t : spec.temperatures) {
        SweepCell cell = run_point(t, spec.fixed_top_p);
        cell.value = t;
        temp_cells.push_back(std::move(cell));
    }
    for (double p : spec.top_ps) {
        SweepCell cell = run_point(spec.fixed_temperature, p);
        cell.value = p;
        top_p_cells.push_back(std::move(cell));
    }

    SweepResults out;
    out.temperature = sweep_summary(std::move(temp_cells));
    out.top_p = sweep_summary(std::move(top_p_cells));
    out.sample_pair_ids = stamped.sample_pair_ids;

    nlohmann::json meta;
    meta["models"] = config.models;
    meta["tau"] = tau;
    meta["seed"] = config.seed;
    meta["template_id"] = config.prompt_template.template_id;
    meta["temperatures"] = spec.temperatures;
    meta["top_ps"] = spec.top_ps;
    meta["fixed_top_p"] = spec.fixed_top_p;
    meta["fixed_temperature"] = spec.fixed_temperature;
    meta["sample_size"] = sample.pairs.size();
    meta["tokenizer_version"] = kTokenizerVersion;
    out.run_id = "sweep-" + fnv1a128(meta.dump()).hex().substr(0, 12);
    meta["run_id"] = out.run_id;
    out.metadata = std::move(meta);
    return out;
}

}  // namespace dmba
