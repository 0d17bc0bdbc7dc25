// End-to-end acceptance checks for the evaluation harness. Each check prints
// one [PASS]/[FAIL]/[SKIP] line; the process exits nonzero when any check
// fails. The replay and recovery checks drive the installed CLI binary
// (DMBA_CLI_PATH) as a subprocess, everything else runs in-process.

#include <sys/wait.h>

#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmba/corpus.hpp"
#include "dmba/gateway.hpp"
#include "dmba/metrics.hpp"
#include "dmba/orchestrator.hpp"
#include "dmba/prompting.hpp"
#include "dmba/reporting.hpp"
#include "dmba/scoring.hpp"
#include "dmba/util.hpp"
#include "support/synthetic.hpp"

namespace fs = std::filesystem;
using namespace dmba;

namespace {

struct SkipCheck {
    std::string reason;
};

[[noreturn]] void fail(const std::string& message) { throw std::runtime_error(message); }

void expect(bool condition, const std::string& message) {
    if (!condition) fail(message);
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string tail_of(const std::string& text, std::size_t max_bytes = 400) {
    return text.size() <= max_bytes ? text : "..." + text.substr(text.size() - max_bytes);
}

// Runs the CLI with stdout+stderr captured; fails the check on a nonzero
// exit unless the caller opts out.
std::string run_cli(const std::string& args, const std::string& log_path, bool must_succeed = true) {
    std::string command = std::string("\"") + DMBA_CLI_PATH + "\" " + args + " >" + log_path + " 2>&1";
    int rc = std::system(command.c_str());
    int exit_code = (rc == -1) ? -1 : (WIFEXITED(rc) ? WEXITSTATUS(rc) : 128);
    std::string log = read_file(log_path);
    if (must_succeed && exit_code != 0)
        fail("cli exited with " + std::to_string(exit_code) + " for '" + args + "': " + tail_of(log));
    return log;
}

void expect_same_bytes(const std::string& a, const std::string& b) {
    if (read_file(a) != read_file(b)) fail("files differ: " + a + " vs " + b);
}

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---- tf-idf / cosine oracle ------------------------------------------------

std::vector<std::string> oracle_tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(current);
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(current);
    return tokens;
}

TfidfModel oracle_tfidf(const std::vector<std::string>& documents) {
    std::set<std::string> vocab_set;
    std::vector<std::vector<std::string>> token_lists;
    for (const auto& doc : documents) {
        token_lists.push_back(oracle_tokenize(doc));
        for (const auto& t : token_lists.back()) vocab_set.insert(t);
    }
    TfidfModel model;
    model.vocabulary.assign(vocab_set.begin(), vocab_set.end());

    const double n_docs = static_cast<double>(documents.size());
    for (const auto& tokens : token_lists) {
        std::vector<double> vec;
        for (const auto& term : model.vocabulary) {
            double tf = 0.0;
            for (const auto& t : tokens)
                if (t == term) tf += 1.0;
            double df = 0.0;
            for (const auto& other : token_lists)
                for (const auto& t : other)
                    if (t == term) {
                        df += 1.0;
                        break;
                    }
            vec.push_back(tf * (std::log((1.0 + n_docs) / (1.0 + df)) + 1.0));
        }
        double norm = 0.0;
        for (double v : vec) norm += v * v;
        norm = std::sqrt(norm);
        if (norm > 0.0)
            for (double& v : vec) v /= norm;
        model.vectors.push_back(std::move(vec));
    }
    return model;
}

std::string random_text(SplitMix64& rng, std::size_t max_tokens) {
    static const std::vector<std::string> pool = {"the",  "doctor", "nurse",  "went",  "home", "every",
                                                  "day",  "strong", "gentle", "quiet", "loud", "child",
                                                  "city", "field",  "works",  "hard",  "12",   "alpha"};
    std::size_t n = rng.bounded(max_tokens + 1);
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) out += (rng.bounded(8) == 0) ? ", " : " ";
        out += pool[rng.bounded(pool.size())];
    }
    return out;
}

void check_tfidf_oracle() {
    auto start = std::chrono::steady_clock::now();
    SplitMix64 rng(20250817);
    for (int trial = 0; trial < 250; ++trial) {
        std::size_t n_docs = 1 + rng.bounded(10);
        std::vector<std::string> docs;
        for (std::size_t d = 0; d < n_docs; ++d) docs.push_back(random_text(rng, 30));

        TfidfModel got = tfidf_vectors(docs);
        TfidfModel want = oracle_tfidf(docs);
        expect(got.vocabulary == want.vocabulary, "vocabulary mismatch");
        expect(got.vectors.size() == want.vectors.size(), "vector count mismatch");
        for (std::size_t d = 0; d < got.vectors.size(); ++d) {
            for (std::size_t i = 0; i < got.vectors[d].size(); ++i) {
                if (std::abs(got.vectors[d][i] - want.vectors[d][i]) > 1e-9)
                    fail("component error above 1e-9 in trial " + std::to_string(trial));
            }
        }
    }

    std::vector<double> ex = {1.0, 0.0};
    std::vector<double> ey = {0.0, 1.0};
    std::vector<double> mixed = {1.0, 1.0};
    expect(std::abs(cosine(ex, ex) - 1.0) <= 1e-12, "cosine of identical vectors");
    expect(std::abs(cosine(ex, ey) - 0.0) <= 1e-12, "cosine of orthogonal vectors");
    expect(std::abs(cosine(ex, mixed) - 1.0 / std::sqrt(2.0)) <= 1e-12, "cosine 1/sqrt(2) case");

    double seconds = elapsed_seconds(start);
    if (seconds >= 5.0) fail("oracle comparison took " + format_double(seconds) + "s, budget is 5s");
}

// ---- classifier case rule ----------------------------------------------------

void check_classifier_rule() {
    const std::vector<double> taus = {0.5, 0.7, 0.9};
    for (int i = 0; i <= 10; ++i) {
        for (int j = 0; j <= 10; ++j) {
            double sim_stereo = i / 10.0;
            double sim_anti = j / 10.0;
            bool labeled[3];
            for (std::size_t t = 0; t < taus.size(); ++t) {
                Label got = label_for(sim_stereo, sim_anti, taus[t]);
                Label want = (sim_stereo > taus[t] && sim_stereo > sim_anti) ? Label::stereotypical
                                                                             : Label::anti_stereotypical;
                if (got != want)
                    fail("label mismatch at sim_stereo=" + format_double(sim_stereo) +
                         " sim_anti=" + format_double(sim_anti) + " tau=" + format_double(taus[t]));
                labeled[t] = got == Label::stereotypical;
            }
            // Raising tau can only retract the stereotypical label.
            if (labeled[2]) expect(labeled[1], "monotonicity broken between tau 0.9 and 0.7");
            if (labeled[1]) expect(labeled[0], "monotonicity broken between tau 0.7 and 0.5");
        }
    }
}

// ---- metric formula oracles ---------------------------------------------------

void check_metric_oracles() {
    SplitMix64 rng(77001);
    static const std::vector<std::string> domains = {"career", "family", "festival", "education"};

    std::vector<PairResult> pairs;
    for (int i = 0; i < 1000; ++i) {
        PairResult p;
        p.pair_id = "p" + std::to_string(i);
        p.bias_type = kAllBiasTypes[rng.bounded(kAllBiasTypes.size())];
        p.domain = domains[rng.bounded(domains.size())];
        p.a_stereo = rng.next_double() * 100.0;
        p.a_anti = rng.next_double() * 100.0;
        p.bias_agreement = p.a_stereo > p.a_anti ? 1 : 0;
        p.delta = p.a_stereo - p.a_anti;
        pairs.push_back(std::move(p));
    }

    // prevalence
    double naive_prevalence = 0.0;
    for (const auto& p : pairs) naive_prevalence += p.bias_agreement;
    naive_prevalence = naive_prevalence / pairs.size() * 100.0;
    expect(std::abs(prevalence(pairs) - naive_prevalence) <= 1e-9, "prevalence differs from naive sum");

    // mean magnitude over biased pairs only
    double magnitude_sum = 0.0;
    int magnitude_n = 0;
    for (const auto& p : pairs)
        if (p.bias_agreement) {
            magnitude_sum += p.delta;
            ++magnitude_n;
        }
    auto magnitude = mean_magnitude(pairs);
    expect(magnitude.has_value(), "mean magnitude absent on mixed data");
    expect(std::abs(*magnitude - magnitude_sum / magnitude_n) <= 1e-9, "mean magnitude differs from naive mean");

    // per-domain prevalence
    std::map<std::string, std::pair<int, int>> domain_counts;  // domain -> (biased, total)
    for (const auto& p : pairs) {
        domain_counts[p.domain].first += p.bias_agreement;
        domain_counts[p.domain].second += 1;
    }
    auto by_domain = group_prevalence(pairs, GroupBy::domain);
    expect(by_domain.size() == domain_counts.size(), "domain partition sizes differ");
    for (const auto& [domain, counts] : domain_counts) {
        double naive = 100.0 * counts.first / counts.second;
        expect(std::abs(by_domain.at(domain) - naive) <= 1e-9, "domain prevalence differs for " + domain);
    }

    // pearson against a two-pass recomputation
    std::vector<double> xs, ys;
    for (const auto& p : pairs) {
        xs.push_back(p.a_stereo);
        ys.push_back(p.delta);
    }
    double mean_x = 0.0, mean_y = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mean_x += xs[i];
        mean_y += ys[i];
    }
    mean_x /= xs.size();
    mean_y /= ys.size();
    double cov = 0.0, var_x = 0.0, var_y = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        cov += (xs[i] - mean_x) * (ys[i] - mean_y);
        var_x += (xs[i] - mean_x) * (xs[i] - mean_x);
        var_y += (ys[i] - mean_y) * (ys[i] - mean_y);
    }
    double naive_r = cov / std::sqrt(var_x * var_y);
    auto r = pearson(xs, ys);
    expect(r.has_value(), "pearson absent on varying data");
    expect(std::abs(*r - naive_r) <= 1e-9, "pearson differs from two-pass recomputation");

    // affine invariance: r(ax+b, cy+d) = sign(ac) * r(x, y)
    for (int trial = 0; trial < 100; ++trial) {
        double a = (rng.next_double() - 0.5) * 20.0;
        double c = (rng.next_double() - 0.5) * 20.0;
        if (std::abs(a) < 1e-3 || std::abs(c) < 1e-3) continue;
        double b = (rng.next_double() - 0.5) * 200.0;
        double d = (rng.next_double() - 0.5) * 200.0;
        std::vector<double> xt, yt;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            xt.push_back(a * xs[i] + b);
            yt.push_back(c * ys[i] + d);
        }
        auto rt = pearson(xt, yt);
        expect(rt.has_value(), "pearson absent after affine map");
        double sign = (a * c) > 0 ? 1.0 : -1.0;
        if (std::abs(*rt - sign * *r) > 1e-9)
            fail("affine invariance broken in trial " + std::to_string(trial));
    }
}

// ---- replay determinism and recovery through the CLI ---------------------------

const std::vector<std::string> kReplayModels = {"model-a", "model-b", "model-c"};
constexpr std::uint64_t kReplaySeed = 4242;

// Writes the dataset CSV and a fixture file that covers exactly the requests
// the CLI will plan for it (same pairs, models, template, tau and seed).
void prepare_replay_inputs(const TempDir& dir, const Dataset& dataset) {
    write_dataset_csv(dataset, dir.file("pairs.csv"));

    PromptTemplate tmpl = default_agreement_template();
    RunPlan plan = plan_run(dataset, kReplayModels, tmpl, 0.7, kReplaySeed);
    RunConfig config;
    config.models = kReplayModels;
    config.seed = kReplaySeed;
    config.prompt_template = tmpl;

    std::map<std::string, testing::ModelProfile> profiles;
    profiles["model-a"] = {30.0, 0.8, 0.0};
    profiles["model-b"] = {10.0, 0.5, 0.0};
    profiles["model-c"] = {0.0, 0.2, 0.0};
    testing::SyntheticBackend backend(dataset, profiles);
    std::size_t written = testing::write_fixtures(plan, config, dataset.pairs, backend, dir.file("fixtures.jsonl"));
    expect(written > 0, "no fixtures were written");
}

std::string replay_run_args(const TempDir& dir, const std::string& out_dir, const std::string& extra = {}) {
    return "run --data " + dir.file("pairs.csv") + " --models model-a,model-b,model-c --seed " +
           std::to_string(kReplaySeed) + " --backend replay --fixtures " + dir.file("fixtures.jsonl") + " --out " +
           (dir.path / out_dir).string() + (extra.empty() ? "" : " " + extra);
}

void check_replay_determinism() {
    auto start = std::chrono::steady_clock::now();
    TempDir dir("dmba_accept_replay");
    Dataset dataset = testing::make_synthetic_dataset(10, 1234);  // 30 pairs
    prepare_replay_inputs(dir, dataset);

    run_cli(replay_run_args(dir, "out1"), dir.file("run1.log"));
    run_cli(replay_run_args(dir, "out2"), dir.file("run2.log"));

    for (const char* name : {"per_pair.csv", "per_completion.csv", "summary.json", "correlation.csv",
                             "agreement_by_type.svg", "completion_by_type.svg", "correlation_heatmap.svg"}) {
        expect(fs::exists(dir.path / "out1" / name), std::string("missing report file ") + name);
        expect_same_bytes((dir.path / "out1" / name).string(), (dir.path / "out2" / name).string());
    }

    auto summary = nlohmann::json::parse(read_file((dir.path / "out1" / "summary.json").string()));
    expect(summary.at("overall").at("failed_count") == 0, "replay run reported failed requests");
    expect(summary.at("overall").at("unparseable_count") == 0, "replay run reported unparseable responses");
    expect(summary.at("overall").at("n_pairs") == 90, "expected 30 pairs x 3 models in the agreement table");

    double seconds = elapsed_seconds(start);
    if (seconds >= 30.0) fail("replay determinism took " + format_double(seconds) + "s, budget is 30s");
}

void check_crash_recovery() {
    TempDir dir("dmba_accept_recovery");
    Dataset dataset = testing::make_synthetic_dataset(10, 1234);
    prepare_replay_inputs(dir, dataset);

    run_cli(replay_run_args(dir, "baseline"), dir.file("baseline.log"));

    for (int stop_after = 1; stop_after <= 12; ++stop_after) {
        std::string tag = std::to_string(stop_after);
        std::string checkpoint = dir.file("ckpt_" + tag + ".json");
        run_cli(replay_run_args(dir, "partial_" + tag,
                                "--checkpoint " + checkpoint + " --max-batches " + tag),
                dir.file("interrupt_" + tag + ".log"));
        run_cli("resume --checkpoint " + checkpoint + " --out " + (dir.path / ("resumed_" + tag)).string(),
                dir.file("resume_" + tag + ".log"));

        for (const char* name : {"summary.json", "per_pair.csv", "per_completion.csv"}) {
            expect(fs::exists(dir.path / ("resumed_" + tag) / name),
                   "missing " + std::string(name) + " after resume at boundary " + tag);
            expect_same_bytes((dir.path / "baseline" / name).string(),
                              (dir.path / ("resumed_" + tag) / name).string());
        }
    }
}

// ---- concurrency bound ----------------------------------------------------------

class CountingBackend : public Backend {
  public:
    GenerationResponse generate(const GenerationRequest& request) override {
        auto& state = per_model_.at(request.model_id);
        int now = ++state.inflight;
        int seen = state.max_seen.load();
        while (now > seen && !state.max_seen.compare_exchange_weak(seen, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
        --state.inflight;
        return GenerationResponse{request.request_id, "ok", FinishReason::stop, 1.0, 1};
    }

    void track(const std::string& model) { per_model_[model]; }
    int max_seen(const std::string& model) const { return per_model_.at(model).max_seen.load(); }

  private:
    struct ModelState {
        std::atomic<int> inflight{0};
        std::atomic<int> max_seen{0};
    };
    std::map<std::string, ModelState> per_model_;
};

void check_concurrency_bound() {
    CountingBackend backend;
    backend.track("m-a");
    backend.track("m-b");

    std::vector<GenerationRequest> requests;
    for (int i = 0; i < 100; ++i) {
        GenerationRequest r;
        r.request_id = "r" + std::to_string(i);
        r.model_id = (i % 2 == 0) ? "m-a" : "m-b";
        r.stimulus = Stimulus{"p", Variant::stereo, StimulusKind::agreement, "text"};
        r.config = DecodingConfig{0.7, 1.0, 16, {}};
        requests.push_back(std::move(r));
    }

    auto outcomes = bounded_dispatch(backend, requests, 4);
    expect(outcomes.size() == requests.size(), "outcome count mismatch");
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        expect(outcomes[i].ok(), "request failed in mock dispatch");
        expect(outcomes[i].response->request_id == requests[i].request_id,
               "output order diverged from input order at index " + std::to_string(i));
    }
    for (const char* model : {"m-a", "m-b"}) {
        int seen = backend.max_seen(model);
        expect(seen >= 1, std::string("no request reached model ") + model);
        expect(seen <= 4, std::string("concurrency bound exceeded for ") + model + ": " + std::to_string(seen));
    }
}

// ---- truncation contract ----------------------------------------------------------

void check_truncation_contract() {
    SplitMix64 rng(5150);
    static const std::vector<std::string> words = {"kind", "nepali", "women", "men", "teachers",
                                                   "serve", "lead",  "homes", "12",  "cities"};
    static const std::vector<std::string> seps = {" ", "  ", "\t", "\n", " \t "};
    for (int i = 0; i < 1000; ++i) {
        std::size_t n = 1 + rng.bounded(12);
        std::string sentence;
        for (std::size_t w = 0; w < n; ++w) {
            if (w) sentence += seps[rng.bounded(seps.size())];
            sentence += words[rng.bounded(words.size())];
        }
        if (rng.bounded(2) == 0) sentence = "  " + sentence + " ";

        Stimulus once = truncate_prompt(sentence);
        std::size_t kept = split_whitespace(once.text).size();
        expect(kept == std::min<std::size_t>(6, n), "kept token count is not min(6, input)");
        Stimulus twice = truncate_prompt(once.text);
        expect(twice.text == once.text, "truncation is not idempotent");
    }
}

// ---- label validation agreement at corpus scale -------------------------------------

void check_lva_reproduction() {
    struct Block {
        BiasType type;
        int total;
        int validated;
    };
    // 2,412 verdicts of which 2,222 validate.
    const std::vector<Block> blocks = {{BiasType::gender, 1000, 930},
                                       {BiasType::race, 800, 742},
                                       {BiasType::socioculture_religion, 612, 550}};

    std::vector<Verdict> verdicts;
    int serial = 0;
    for (const auto& block : blocks)
        for (int i = 0; i < block.total; ++i)
            verdicts.push_back({"v" + std::to_string(serial++), block.type, i < block.validated});

    LvaReport report = compute_lva(verdicts);
    expect(report.total_pairs == 2412, "total verdict count");
    expect(report.validated_pairs == 2222, "validated verdict count");
    expect(report.flagged_pairs == 190, "flagged verdict count");
    expect(std::abs(report.overall_agreement * 100.0 - 92.1) <= 0.05,
           "overall agreement " + format_double(report.overall_agreement * 100.0) + "% is outside 92.1 +- 0.05");
    for (const auto& block : blocks) {
        double expected = static_cast<double>(block.validated) / block.total;
        expect(std::abs(report.per_category_agreement.at(block.type) - expected) <= 1e-12,
               std::string("per-category agreement for ") + to_string(block.type));
    }
}

// ---- optional live smoke -------------------------------------------------------------

void check_live_smoke() {
    const char* enabled = std::getenv("DMBA_LIVE_SMOKE");
    const char* key = std::getenv("DMBA_API_KEY");
    if (!enabled || std::string(enabled) != "1" || !key || !*key)
        throw SkipCheck{"set DMBA_LIVE_SMOKE=1 and DMBA_API_KEY to enable"};
    const char* model_env = std::getenv("DMBA_SMOKE_MODEL");
    std::string model = model_env && *model_env ? model_env : "openrouter/auto";

    TempDir dir("dmba_accept_live");
    Dataset dataset = testing::make_synthetic_dataset(4, 99);
    dataset.pairs.resize(10);
    write_dataset_csv(dataset, dir.file("pairs.csv"));

    run_cli("run --data " + dir.file("pairs.csv") + " --models " + model + " --seed 7 --backend live --out " +
                (dir.path / "out").string(),
            dir.file("live.log"));

    for (const char* name : {"per_pair.csv", "per_completion.csv", "summary.json", "correlation.csv"})
        expect(fs::exists(dir.path / "out" / name), std::string("missing report file ") + name);
    auto summary = nlohmann::json::parse(read_file((dir.path / "out" / "summary.json").string()));
    int unparseable = summary.at("overall").at("unparseable_count").get<int>();
    int failed = summary.at("overall").at("failed_count").get<int>();
    expect(unparseable + failed <= 2, "too many dropped requests: " + std::to_string(unparseable) + " unparseable, " +
                                          std::to_string(failed) + " failed");
}

struct Check {
    int number;
    std::string name;
    std::function<void()> body;
};

}  // namespace

int main() {
    const std::vector<Check> checks = {
        {1, "tf-idf vectors match a brute-force oracle", check_tfidf_oracle},
        {2, "completion labels follow the threshold case rule", check_classifier_rule},
        {3, "metric formulas match naive recomputation", check_metric_oracles},
        {4, "replay runs export byte-identical bundles", check_replay_determinism},
        {5, "resume matches the uninterrupted run at every batch boundary", check_crash_recovery},
        {6, "dispatch respects the per-model concurrency bound", check_concurrency_bound},
        {7, "truncation keeps the first six tokens, idempotently", check_truncation_contract},
        {8, "label validation agreement reproduces at corpus scale", check_lva_reproduction},
        {9, "live smoke run completes with a full bundle", check_live_smoke},
    };

    int failed = 0;
    int skipped = 0;
    for (const auto& check : checks) {
        auto start = std::chrono::steady_clock::now();
        try {
            check.body();
            std::printf("[PASS] %d. %s (%.2fs)\n", check.number, check.name.c_str(), elapsed_seconds(start));
        } catch (const SkipCheck& skip) {
            ++skipped;
            std::printf("[SKIP] %d. %s (%s)\n", check.number, check.name.c_str(), skip.reason.c_str());
        } catch (const std::exception& e) {
            ++failed;
            std::printf("[FAIL] %d. %s: %s\n", check.number, check.name.c_str(), e.what());
        }
        std::fflush(stdout);
    }

    std::printf("%zu checks: %zu passed, %d failed, %d skipped\n", checks.size(),
                checks.size() - failed - skipped, failed, skipped);
    return failed == 0 ? 0 : 1;
}
