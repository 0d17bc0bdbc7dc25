#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmba/errors.hpp"
#include "dmba/prompting.hpp"

namespace dmba {

struct DecodingConfig {
    double temperature = 0.0;
    double top_p = 1.0;
    int max_tokens = 200;
    std::vector<std::string> stop_sequences;

    void validate() const;  // value error when a field is out of range

    // Short stable tag like "t0.7-p0.85", used in file names and result keys.
    std::string config_id() const;

    // Canonical serialization used for request hashing. Field order and
    // number formatting are frozen; changing either would orphan existing
    // fixtures and checkpoints.
    std::string canonical() const;

    nlohmann::json to_json() const;
    static DecodingConfig from_json(const nlohmann::json& j);

    bool operator==(const DecodingConfig&) const = default;
};

struct GenerationRequest {
    std::string request_id;  // 32-hex content hash, pure function of the fields below
    std::string model_id;
    Stimulus stimulus;
    DecodingConfig config;

    static GenerationRequest make(std::string model_id, Stimulus stimulus, DecodingConfig config);
};

enum class FinishReason { stop, length, error };

const char* to_string(FinishReason r);
// Maps provider strings; anything unrecognized degrades to `error`.
FinishReason finish_reason_from_string(const std::string& s);

struct GenerationResponse {
    std::string request_id;
    std::string text;  // raw assistant message, untrimmed
    FinishReason finish_reason = FinishReason::stop;
    double latency_ms = 0.0;
    int attempt_count = 1;
};

struct RetryPolicy {
    int max_attempts = 5;
    double base_delay_ms = 500.0;
    double multiplier = 2.0;
    double jitter_fraction = 0.2;
    double request_timeout_ms = 60000.0;
};

// Backoff midpoint before jitter for the delay preceding attempt k+1
// (k = 1-based index of the attempt that just failed).
double nominal_backoff_delay_ms(const RetryPolicy& policy, int failed_attempt);

// Injectable sleep so retry timing is testable without wall-clock waits.
using Sleeper = std::function<void(std::chrono::milliseconds)>;

class Backend {
  public:
    virtual ~Backend() = default;

    // Returns the first successful response for the request. Transient
    // failures (HTTP 429/5xx, transport timeouts) are retried per policy;
    // auth failures raise credential errors and unknown models raise routing
    // errors, both without retry. Exhausted retries raise a delivery error
    // carrying the attempt count and last status.
    virtual GenerationResponse generate(const GenerationRequest& request) = 0;
};

inline constexpr const char* kDefaultEndpoint = "https://openrouter.ai/api/v1/chat/completions";

struct HttpOptions {
    std::string endpoint_url = kDefaultEndpoint;
    std::string api_key;
    RetryPolicy retry;
};

class HttpBackend : public Backend {
  public:
    explicit HttpBackend(HttpOptions options, Sleeper sleeper = {});

    GenerationResponse generate(const GenerationRequest& request) override;

    // The chat-completion request body for one request (single user turn).
    static nlohmann::json request_body(const GenerationRequest& request);

  private:
    struct Attempt {
        bool transport_ok = false;
        int status = 0;
        std::string body;
        std::string error;
    };

    Attempt attempt_once(const GenerationRequest& request) const;

    HttpOptions options_;
    Sleeper sleeper_;
};

// One recorded exchange, the unit of the JSONL fixture file.
struct FixtureRecord {
    std::string request_id;
    std::string model_id;
    DecodingConfig config;
    std::string prompt_text;
    std::string response_text;
    std::string finish_reason;

    nlohmann::json to_json() const;
    static FixtureRecord from_json(const nlohmann::json& j);
};

// In-memory fixture map bound to a JSONL file. Reads are concurrent;
// appends are serialized and flushed per record so a crash mid-recording
// loses at most the in-flight entry.
class FixtureStore {
  public:
    // Parses an existing fixture file; storage error when unreadable.
    static std::shared_ptr<FixtureStore> load(const std::string& path);

    // Loads the file when present, otherwise starts empty; either way
    // appends go to `path`.
    static std::shared_ptr<FixtureStore> open_or_create(const std::string& path);

    std::optional<FixtureRecord> find(const std::string& request_id) const;
    void append(const FixtureRecord& record);
    std::size_t size() const;
    const std::string& path() const { return path_; }

  private:
    explicit FixtureStore(std::string path) : path_(std::move(path)) {}

    mutable std::shared_mutex mutex_;
    std::string path_;
    std::map<std::string, FixtureRecord> records_;
};

class ReplayBackend : public Backend {
  public:
    explicit ReplayBackend(std::shared_ptr<FixtureStore> store);

    // Missing fixture → delivery error naming the request id.
    GenerationResponse generate(const GenerationRequest& request) override;

  private:
    std::shared_ptr<FixtureStore> store_;
};

// Passes requests through to a live backend and records each successful
// exchange, enabling bit-identical replay later.
class RecordingBackend : public Backend {
  public:
    RecordingBackend(std::unique_ptr<Backend> inner, std::shared_ptr<FixtureStore> store);

    GenerationResponse generate(const GenerationRequest& request) override;

  private:
    std::unique_ptr<Backend> inner_;
    std::shared_ptr<FixtureStore> store_;
};

// Per-request outcome of bounded_dispatch, aligned with the input order.
struct DispatchOutcome {
    std::optional<GenerationResponse> response;
    std::optional<ErrorKind> error_kind;  // set when this request was attempted and failed
    std::string error_message;
    bool aborted = false;  // skipped because an earlier fatal error hit the same model

    bool ok() const { return response.has_value(); }
};

// Dispatches requests concurrently while keeping at most per_model_limit
// in flight for any single model. A fatal (credential/routing) error stops
// further dispatch for that model only; its unattempted requests come back
// marked aborted. Output order always matches input order.
std::vector<DispatchOutcome> bounded_dispatch(Backend& backend, const std::vector<GenerationRequest>& requests,
                                              int per_model_limit);

}  // namespace dmba
