#include "dmba/gateway.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "dmba/util.hpp"

namespace dmba {

void DecodingConfig::validate() const {
    if (temperature < 0.0 || temperature > 2.0)
        throw Error(ErrorKind::value, "temperature must be in [0,2], got " + format_double(temperature));
    if (!(top_p > 0.0) || top_p > 1.0)
        throw Error(ErrorKind::value, "top_p must be in (0,1], got " + format_double(top_p));
    if (max_tokens < 1)
        throw Error(ErrorKind::value, "max_tokens must be >= 1, got " + std::to_string(max_tokens));
}

std::string DecodingConfig::config_id() const {
    return "t" + format_double(temperature) + "-p" + format_double(top_p);
}

std::string DecodingConfig::canonical() const {
    std::string s = "t=" + format_double(temperature) + ";p=" + format_double(top_p) +
                    ";max=" + std::to_string(max_tokens) + ";stop=";
    for (std::size_t i = 0; i < stop_sequences.size(); ++i) {
        if (i) s.push_back('\x1f');
        s += stop_sequences[i];
    }
    return s;
}

nlohmann::json DecodingConfig::to_json() const {
    return {{"temperature", temperature},
            {"top_p", top_p},
            {"max_tokens", max_tokens},
            {"stop_sequences", stop_sequences}};
}

DecodingConfig DecodingConfig::from_json(const nlohmann::json& j) {
    DecodingConfig c;
    c.temperature = j.at("temperature").get<double>();
    c.top_p = j.at("top_p").get<double>();
    c.max_tokens = j.at("max_tokens").get<int>();
    if (j.contains("stop_sequences")) c.stop_sequences = j.at("stop_sequences").get<std::vector<std::string>>();
    c.validate();
    return c;
}

GenerationRequest GenerationRequest::make(std::string model_id, Stimulus stimulus, DecodingConfig config) {
    config.validate();
    GenerationRequest r;
    // \x1f separators keep the hash input unambiguous when fields could
    // otherwise run together.
    r.request_id = fnv1a128(model_id + '\x1f' + stimulus.text + '\x1f' + config.canonical()).hex();
    r.model_id = std::move(model_id);
    r.stimulus = std::move(stimulus);
    r.config = std::move(config);
    return r;
}

const char* to_string(FinishReason r) {
    switch (r) {
        case FinishReason::stop: return "stop";
        case FinishReason::length: return "length";
        case FinishReason::error: return "error";
    }
    return "error";
}

FinishReason finish_reason_from_string(const std::string& s) {
    if (s == "stop") return FinishReason::stop;
    if (s == "length") return FinishReason::length;
    return FinishReason::error;
}

double nominal_backoff_delay_ms(const RetryPolicy& policy, int failed_attempt) {
    return policy.base_delay_ms * std::pow(policy.multiplier, failed_attempt - 1);
}

HttpBackend::HttpBackend(HttpOptions options, Sleeper sleeper)
    : options_(std::move(options)), sleeper_(std::move(sleeper)) {
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

nlohmann::json HttpBackend::request_body(const GenerationRequest& request) {
    nlohmann::json body{
        {"model", request.model_id},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.stimulus.text}}})},
        {"temperature", request.config.temperature},
        {"top_p", request.config.top_p},
        {"max_tokens", request.config.max_tokens},
    };
    if (!request.config.stop_sequences.empty()) body["stop"] = request.config.stop_sequences;
    return body;
}

HttpBackend::Attempt HttpBackend::attempt_once(const GenerationRequest& request) const {
    // Split "scheme://host[:port]/path". httplib takes the origin and the
    // path separately.
    const std::string& url = options_.endpoint_url;
    std::size_t scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw Error(ErrorKind::value, "endpoint url missing scheme: " + url);
    std::size_t path_start = url.find('/', scheme_end + 3);
    std::string origin = path_start == std::string::npos ? url : url.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    // A fresh client per attempt: httplib clients are not safe for
    // concurrent use and bounded_dispatch calls us from several threads.
    httplib::Client client(origin);
    auto timeout = std::chrono::milliseconds(static_cast<long long>(options_.retry.request_timeout_ms));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    if (!options_.api_key.empty()) client.set_bearer_token_auth(options_.api_key);

    Attempt att;
    auto res = client.Post(path, request_body(request).dump(), "application/json");
    if (!res) {
        att.error = httplib::to_string(res.error());
        return att;
    }
    att.transport_ok = true;
    att.status = res->status;
    att.body = res->body;
    return att;
}

GenerationResponse HttpBackend::generate(const GenerationRequest& request) {
    const RetryPolicy& policy = options_.retry;
    // Jitter is deterministic per request so a rerun sleeps the same way.
    SplitMix64 rng(fnv1a128(request.request_id).lo);

    int last_status = 0;
    std::string last_error;
    for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
        auto t0 = std::chrono::steady_clock::now();
        Attempt att = attempt_once(request);
        double latency_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

        if (att.transport_ok && att.status == 200) {
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(att.body);
            } catch (const nlohmann::json::parse_error& e) {
                Error err(ErrorKind::delivery, "malformed response body: " + std::string(e.what()));
                err.attempts = attempt;
                err.last_status = att.status;
                throw err;
            }
            if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
                Error err(ErrorKind::delivery, "response carries no choices");
                err.attempts = attempt;
                err.last_status = att.status;
                throw err;
            }
            const auto& choice = j["choices"][0];
            GenerationResponse resp;
            resp.request_id = request.request_id;
            resp.text = choice.at("message").at("content").get<std::string>();
            resp.finish_reason = finish_reason_from_string(choice.value("finish_reason", "stop"));
            resp.latency_ms = latency_ms;
            resp.attempt_count = attempt;
            return resp;
        }

        bool retryable = false;
        if (!att.transport_ok) {
            // Timeouts and connection failures are transient by assumption.
            retryable = true;
            last_error = att.error;
        } else {
            last_status = att.status;
            last_error = att.body;
            if (att.status == 401 || att.status == 403) {
                Error err(ErrorKind::credential, "authentication rejected (HTTP " + std::to_string(att.status) +
                                                     ") for model " + request.model_id);
                err.attempts = attempt;
                err.last_status = att.status;
                throw err;
            }
            if (att.status == 404 || (att.status == 400 && att.body.find("model") != std::string::npos)) {
                Error err(ErrorKind::routing, "model not routable: " + request.model_id + " (HTTP " +
                                                  std::to_string(att.status) + ")");
                err.attempts = attempt;
                err.last_status = att.status;
                throw err;
            }
            retryable = att.status == 429 || att.status >= 500;
            if (!retryable) {
                Error err(ErrorKind::delivery, "request rejected (HTTP " + std::to_string(att.status) + "): " +
                                                   att.body.substr(0, 200));
                err.attempts = attempt;
                err.last_status = att.status;
                throw err;
            }
        }

        if (attempt == policy.max_attempts) break;
        double nominal = nominal_backoff_delay_ms(policy, attempt);
        double factor = 1.0 - policy.jitter_fraction + 2.0 * policy.jitter_fraction * rng.next_double();
        sleeper_(std::chrono::milliseconds(static_cast<long long>(nominal * factor)));
    }

    Error err(ErrorKind::delivery, "request " + request.request_id + " failed after " +
                                       std::to_string(policy.max_attempts) + " attempts" +
                                       (last_status ? " (last HTTP " + std::to_string(last_status) + ")"
                                                    : " (" + last_error + ")"));
    err.attempts = policy.max_attempts;
    err.last_status = last_status;
    throw err;
}

nlohmann::json FixtureRecord::to_json() const {
    return {{"request_id", request_id},   {"model_id", model_id},
            {"config", config.to_json()}, {"prompt_text", prompt_text},
            {"response_text", response_text}, {"finish_reason", finish_reason}};
}

FixtureRecord FixtureRecord::from_json(const nlohmann::json& j) {
    FixtureRecord r;
    r.request_id = j.at("request_id").get<std::string>();
    r.model_id = j.at("model_id").get<std::string>();
    r.config = DecodingConfig::from_json(j.at("config"));
    r.prompt_text = j.at("prompt_text").get<std::string>();
    r.response_text = j.at("response_text").get<std::string>();
    r.finish_reason = j.at("finish_reason").get<std::string>();
    return r;
}

std::shared_ptr<FixtureStore> FixtureStore::load(const std::string& path) {
    std::shared_ptr<FixtureStore> store(new FixtureStore(path));
    std::string content = read_file(path);
    std::istringstream in(content);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorKind::parse, path + " line " + std::to_string(line_no) + ": " + e.what());
        }
        FixtureRecord rec = FixtureRecord::from_json(j);
        store->records_.insert_or_assign(rec.request_id, std::move(rec));
    }
    return store;
}

std::shared_ptr<FixtureStore> FixtureStore::open_or_create(const std::string& path) {
    if (std::ifstream probe(path); probe.good()) return load(path);
    return std::shared_ptr<FixtureStore>(new FixtureStore(path));
}

std::optional<FixtureRecord> FixtureStore::find(const std::string& request_id) const {
    std::shared_lock lock(mutex_);
    auto it = records_.find(request_id);
    if (it == records_.end()) return std::nullopt;
    return it->second;
}

void FixtureStore::append(const FixtureRecord& record) {
    std::unique_lock lock(mutex_);
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw Error(ErrorKind::storage, "cannot append fixtures: " + path_);
    out << record.to_json().dump() << '\n';
    out.flush();
    if (!out) throw Error(ErrorKind::storage, "fixture write failed: " + path_);
    records_.insert_or_assign(record.request_id, record);
}

std::size_t FixtureStore::size() const {
    std::shared_lock lock(mutex_);
    return records_.size();
}

ReplayBackend::ReplayBackend(std::shared_ptr<FixtureStore> store) : store_(std::move(store)) {}

GenerationResponse ReplayBackend::generate(const GenerationRequest& request) {
    std::optional<FixtureRecord> rec = store_->find(request.request_id);
    if (!rec)
        throw Error(ErrorKind::delivery, "no fixture for request " + request.request_id + " (model " +
                                             request.model_id + ")");
    GenerationResponse resp;
    resp.request_id = request.request_id;
    resp.text = rec->response_text;
    resp.finish_reason = finish_reason_from_string(rec->finish_reason);
    resp.latency_ms = 0.0;
    resp.attempt_count = 1;
    return resp;
}

RecordingBackend::RecordingBackend(std::unique_ptr<Backend> inner, std::shared_ptr<FixtureStore> store)
    : inner_(std::move(inner)), store_(std::move(store)) {}

GenerationResponse RecordingBackend::generate(const GenerationRequest& request) {
    GenerationResponse resp = inner_->generate(request);
    FixtureRecord rec;
    rec.request_id = request.request_id;
    rec.model_id = request.model_id;
    rec.config = request.config;
    rec.prompt_text = request.stimulus.text;
    rec.response_text = resp.text;
    rec.finish_reason = to_string(resp.finish_reason);
    store_->append(rec);
    return resp;
}

std::vector<DispatchOutcome> bounded_dispatch(Backend& backend, const std::vector<GenerationRequest>& requests,
                                              int per_model_limit) {
    if (per_model_limit < 1)
        throw Error(ErrorKind::precondition, "per_model_limit must be >= 1, got " + std::to_string(per_model_limit));

    std::vector<DispatchOutcome> outcomes(requests.size());

    // Indices grouped by model, original order preserved within each group.
    std::map<std::string, std::vector<std::size_t>> by_model;
    for (std::size_t i = 0; i < requests.size(); ++i) by_model[requests[i].model_id].push_back(i);

    struct ModelGroup {
        std::vector<std::size_t> indices;
        std::atomic<std::size_t> cursor{0};
        std::atomic<bool> abort{false};
    };
    std::vector<std::unique_ptr<ModelGroup>> groups;
    groups.reserve(by_model.size());
    for (auto& [model, indices] : by_model) {
        auto g = std::make_unique<ModelGroup>();
        g->indices = std::move(indices);
        groups.push_back(std::move(g));
    }

    // One worker pool per model caps that model's in-flight requests at the
    // pool size; different models proceed independently.
    std::vector<std::thread> workers;
    for (auto& group : groups) {
        std::size_t n_workers = std::min<std::size_t>(static_cast<std::size_t>(per_model_limit),
                                                      group->indices.size());
        for (std::size_t w = 0; w < n_workers; ++w) {
            workers.emplace_back([&backend, &requests, &outcomes, g = group.get()] {
                while (true) {
                    std::size_t slot = g->cursor.fetch_add(1);
                    if (slot >= g->indices.size()) return;
                    std::size_t idx = g->indices[slot];
                    if (g->abort.load()) {
                        outcomes[idx].aborted = true;
                        continue;
                    }
                    try {
                        outcomes[idx].response = backend.generate(requests[idx]);
                    } catch (const Error& e) {
                        outcomes[idx].error_kind = e.kind();
                        outcomes[idx].error_message = e.what();
                        if (e.kind() == ErrorKind::credential || e.kind() == ErrorKind::routing)
                            g->abort.store(true);
                    }
                }
            });
        }
    }
    for (auto& t : workers) t.join();
    return outcomes;
}

}  // namespace dmba
