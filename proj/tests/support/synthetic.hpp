#pragma once

// Deterministic stand-ins for everything a live provider would supply:
// synthetic sentence-pair datasets, a hash-driven responder with tunable
// per-model bias, and fixture generation for replay-backed CLI runs.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dmba/corpus.hpp"
#include "dmba/gateway.hpp"
#include "dmba/orchestrator.hpp"

namespace dmba::testing {

// Pairs share a 6-token prefix and diverge afterwards, so truncation maps
// both variants to the same completion prompt while TF-IDF can still tell
// the references apart.
Dataset make_synthetic_dataset(std::size_t per_type, std::uint64_t seed);

// How a synthetic model behaves. Rates are exact in expectation only; the
// realized counts are a pure function of the request ids.
struct ModelProfile {
    double stereo_shift = 20.0;        // added to agreement scores for stereo variants
    double completion_stereo_rate = 0.5;  // chance a completion echoes the stereo reference
    double unparseable_rate = 0.0;     // chance an agreement reply carries no usable number
};

// Answers any request deterministically: agreement replies are integers in
// [0,100] derived from the request id (wrapped in varying prose), completion
// replies echo the suffix of one full reference sentence. The same request id
// always gets the same reply, which is what makes record/replay and resume
// comparisons meaningful.
class SyntheticBackend : public Backend {
  public:
    SyntheticBackend(const Dataset& dataset, std::map<std::string, ModelProfile> profiles = {});

    GenerationResponse generate(const GenerationRequest& request) override;

    // Called before every response; tests inject failures by throwing.
    std::function<void(const GenerationRequest&)> interceptor;

    // The reply text for a request, without going through generate().
    std::string response_text(const GenerationRequest& request) const;

  private:
    const ModelProfile& profile_for(const std::string& model_id) const;

    std::map<std::string, SentencePair> pair_index_;
    std::map<std::string, ModelProfile> profiles_;
    ModelProfile default_profile_;
};

// Enumerates every planned request and writes one fixture record per request
// to `path`, overwriting whatever was there. Returns the record count.
std::size_t write_fixtures(const RunPlan& plan, const RunConfig& config,
                           const std::vector<SentencePair>& pairs, SyntheticBackend& responder,
                           const std::string& path);

// Sweep plans are built per grid point inside sensitivity_run, so fixture
// generation has to mirror that: one single-batch plan per (temperature,
// top_p) value over the same sample.
std::size_t write_sweep_fixtures(const Dataset& sample, const RunConfig& config, double tau,
                                 const SweepSpec& spec, SyntheticBackend& responder,
                                 const std::string& path);

}  // namespace dmba::testing
