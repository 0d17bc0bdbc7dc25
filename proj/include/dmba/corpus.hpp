#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dmba {

enum class BiasType { gender, race, socioculture_religion };

constexpr std::array<BiasType, 3> kAllBiasTypes = {BiasType::gender, BiasType::race,
                                                   BiasType::socioculture_religion};

const char* to_string(BiasType type);
// Throws a value error on unknown labels; `context` names the offending row.
BiasType bias_type_from_string(const std::string& label, const std::string& context = {});

// One stereotypical / anti-stereotypical sentence pair. The stereo/anti
// labeling is carried by field position.
struct SentencePair {
    std::string pair_id;
    BiasType bias_type = BiasType::gender;
    std::string domain;
    std::string stereo_text;
    std::string anti_text;

    bool operator==(const SentencePair&) const = default;
};

struct Dataset {
    std::vector<SentencePair> pairs;
    std::map<std::string, std::string> metadata;
    std::string source_path;

    // Counts per bias type, indexed as kAllBiasTypes; always sums to pairs.size().
    std::array<std::size_t, 3> counts_by_type() const;
};

enum class DatasetFormat { csv, jsonl };

DatasetFormat dataset_format_from_string(const std::string& name);
// Guesses from the file extension, defaulting to csv.
DatasetFormat guess_dataset_format(const std::string& path);

// Loads and validates a sentence-pair file.
// CSV header / JSONL keys: pair_id,bias_type,domain,stereo_text,anti_text.
// Row order is preserved.
Dataset load_dataset(const std::string& path, DatasetFormat format);

// Writes pairs back out in the standard CSV schema; load_dataset reads the
// result unchanged.
void write_dataset_csv(const Dataset& dataset, const std::string& path);

// Draws exactly `per_type` pairs for each of the three bias types, without
// replacement, using a splitmix64 stream seeded from `seed`. Selected pairs
// keep their original dataset order. Identical seed, identical sample.
Dataset stratified_sample(const Dataset& dataset, std::size_t per_type, std::uint64_t seed);

// One annotator verdict on the author-assigned bias type of a pair.
struct Verdict {
    std::string pair_id;
    BiasType assigned_type = BiasType::gender;
    bool validated = false;  // false = flagged for reassignment
};

struct LvaReport {
    std::size_t total_pairs = 0;
    std::size_t validated_pairs = 0;
    std::size_t flagged_pairs = 0;
    double overall_agreement = 0.0;
    std::map<BiasType, double> per_category_agreement;
};

// Label Validation Agreement over annotator verdicts. Every pair_id must
// appear exactly once.
LvaReport compute_lva(const std::vector<Verdict>& verdicts);

// Reads a verdict sheet: CSV pair_id,assigned_type,verdict with
// verdict in {validated, flagged}.
std::vector<Verdict> load_lva_sheet(const std::string& path);

}  // namespace dmba
