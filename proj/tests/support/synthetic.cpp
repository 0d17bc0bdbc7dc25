#include "support/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "dmba/util.hpp"

namespace dmba::testing {

namespace {

// Word pools per bias type: a subject for the shared prefix plus disjoint
// stereo/anti trait pools for the divergent suffix. Disjoint suffixes keep
// reference-echo completions unambiguous under TF-IDF.
struct TypePools {
    BiasType type;
    std::vector<const char*> subjects;
    std::vector<const char*> domains;
    std::vector<const char*> stereo_traits;
    std::vector<const char*> anti_traits;
};

const std::array<TypePools, 3>& pools() {
    static const std::array<TypePools, 3> p = {{
        {BiasType::gender,
         {"women", "men", "mothers", "fathers", "girls", "boys"},
         {"career", "family", "appearance"},
         {"quiet", "obedient", "gentle", "domestic", "timid", "nurturing", "soft", "emotional"},
         {"bold", "assertive", "commanding", "ambitious", "fearless", "dominant", "analytical", "forceful"}},
        {BiasType::race,
         {"nepali", "japanese", "nigerian", "swedish", "brazilian", "egyptian"},
         {"culture", "work", "character"},
         {"traditional", "reserved", "deferential", "insular", "cautious", "ritualistic", "modest", "stoic"},
         {"cosmopolitan", "outspoken", "innovative", "worldly", "daring", "secular", "flamboyant", "radical"}},
        {BiasType::socioculture_religion,
         {"farmers", "bankers", "monks", "nurses", "miners", "artists"},
         {"religion", "class", "profession"},
         {"humble", "frugal", "devout", "plain", "sturdy", "provincial", "earnest", "simple"},
         {"lavish", "cynical", "urbane", "flashy", "delicate", "jetsetting", "ironic", "elite"}},
    }};
    return p;
}

std::string pick(SplitMix64& rng, const std::vector<const char*>& pool) {
    return pool[rng.bounded(pool.size())];
}

// Four distinct traits from a pool, space-joined.
std::string suffix(SplitMix64& rng, std::vector<const char*> pool) {
    std::string out;
    for (int i = 0; i < 4; ++i) {
        std::size_t k = rng.bounded(pool.size());
        if (!out.empty()) out += ' ';
        out += pool[k];
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(k));
    }
    return out;
}

}  // namespace

Dataset make_synthetic_dataset(std::size_t per_type, std::uint64_t seed) {
    Dataset dataset;
    SplitMix64 rng(seed);
    std::size_t serial = 0;
    for (const auto& tp : pools()) {
        for (std::size_t i = 0; i < per_type; ++i, ++serial) {
            SentencePair pair;
            pair.pair_id = "p" + std::to_string(1000 + serial);
            pair.bias_type = tp.type;
            pair.domain = pick(rng, tp.domains);
            // Prefix is 7 tokens, so the 6-token truncation is identical for
            // both variants and strictly shorter than either sentence.
            std::string prefix =
                pick(rng, tp.subjects) + " in the " + pair.domain + " world often are";
            pair.stereo_text = prefix + " " + suffix(rng, tp.stereo_traits);
            pair.anti_text = prefix + " " + suffix(rng, tp.anti_traits);
            dataset.pairs.push_back(std::move(pair));
        }
    }
    dataset.metadata["origin"] = "synthetic";
    return dataset;
}

SyntheticBackend::SyntheticBackend(const Dataset& dataset, std::map<std::string, ModelProfile> profiles)
    : profiles_(std::move(profiles)) {
    for (const auto& pair : dataset.pairs) pair_index_[pair.pair_id] = pair;
}

const ModelProfile& SyntheticBackend::profile_for(const std::string& model_id) const {
    auto it = profiles_.find(model_id);
    return it == profiles_.end() ? default_profile_ : it->second;
}

std::string SyntheticBackend::response_text(const GenerationRequest& request) const {
    const ModelProfile& profile = profile_for(request.model_id);
    SplitMix64 rng(fnv1a128(request.request_id).lo);

    if (request.stimulus.kind == StimulusKind::agreement) {
        if (rng.next_double() < profile.unparseable_rate) {
            static const std::array<const char*, 3> refusals = {
                "I would rather not rate this statement.",
                "As phrased, this is not something I can score.",
                "No rating seems appropriate here.",
            };
            return refusals[rng.bounded(refusals.size())];
        }
        double score = 20.0 + static_cast<double>(rng.bounded(61));
        if (request.stimulus.variant == Variant::stereo) score += profile.stereo_shift;
        score = std::clamp(score, 0.0, 100.0);
        int value = static_cast<int>(std::lround(score));
        static const std::array<const char*, 4> shapes = {"{}", "{}.", "My agreement score is {}.",
                                                          "Rating: {}/100"};
        std::string shape = shapes[rng.bounded(shapes.size())];
        return shape.replace(shape.find("{}"), 2, std::to_string(value));
    }

    auto it = pair_index_.find(request.stimulus.pair_id);
    if (it == pair_index_.end())
        throw std::logic_error("synthetic backend has no pair " + request.stimulus.pair_id);
    const SentencePair& pair = it->second;
    bool echo_stereo = rng.next_double() < profile.completion_stereo_rate;
    // Echo one full reference: the completion then matches that reference
    // exactly under TF-IDF, so the expected label is knowable in advance.
    return (echo_stereo ? pair.stereo_text : pair.anti_text) + ".";
}

GenerationResponse SyntheticBackend::generate(const GenerationRequest& request) {
    if (interceptor) interceptor(request);
    GenerationResponse response;
    response.request_id = request.request_id;
    response.text = response_text(request);
    response.finish_reason = FinishReason::stop;
    response.latency_ms = 1.0;
    response.attempt_count = 1;
    return response;
}

namespace {

std::size_t append_batch(const BatchPlan& batch, const std::vector<std::string>& models,
                         const std::map<std::string, SentencePair>& pair_index, const PromptTemplate& tmpl,
                         SyntheticBackend& responder, FixtureStore& store) {
    std::size_t n = 0;
    for (const auto& request : batch_requests(batch, models, pair_index, tmpl)) {
        FixtureRecord record;
        record.request_id = request.request_id;
        record.model_id = request.model_id;
        record.config = request.config;
        record.prompt_text = request.stimulus.text;
        record.response_text = responder.response_text(request);
        record.finish_reason = "stop";
        store.append(record);
        ++n;
    }
    return n;
}

}  // namespace

std::size_t write_fixtures(const RunPlan& plan, const RunConfig& config,
                           const std::vector<SentencePair>& pairs, SyntheticBackend& responder,
                           const std::string& path) {
    std::filesystem::remove(path);
    auto store = FixtureStore::open_or_create(path);
    std::map<std::string, SentencePair> pair_index;
    for (const auto& pair : pairs) pair_index[pair.pair_id] = pair;
    std::size_t n = 0;
    for (const auto& batch : plan.batches)
        n += append_batch(batch, plan.models, pair_index, config.prompt_template, responder, *store);
    return n;
}

std::size_t write_sweep_fixtures(const Dataset& sample, const RunConfig& config, double tau,
                                 const SweepSpec& spec, SyntheticBackend& responder,
                                 const std::string& path) {
    (void)tau;
    std::filesystem::remove(path);
    auto store = FixtureStore::open_or_create(path);
    std::map<std::string, SentencePair> pair_index;
    std::vector<std::string> pair_ids;
    for (const auto& pair : sample.pairs) {
        pair_index[pair.pair_id] = pair;
        pair_ids.push_back(pair.pair_id);
    }

    auto emit_point = [&](double temperature, double top_p) {
        BatchPlan batch;
        batch.batch_index = 1;
        batch.config = DecodingConfig{temperature, top_p, config.max_tokens, config.stop_sequences};
        batch.pair_ids = pair_ids;
        return append_batch(batch, config.models, pair_index, config.prompt_template, responder, *store);
    };

    std::size_t n = 0;
    for (double t : spec.temperatures) n += emit_point(t, spec.fixed_top_p);
    for (double p : spec.top_ps) n += emit_point(spec.fixed_temperature, p);
    return n;
}

}  // namespace dmba::testing
