#include "dmba/corpus.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "dmba/csv.hpp"
#include "dmba/errors.hpp"
#include "dmba/util.hpp"

namespace dmba {

namespace {

constexpr std::array<const char*, 5> kColumns = {"pair_id", "bias_type", "domain", "stereo_text",
                                                 "anti_text"};

std::size_t type_index(BiasType t) { return static_cast<std::size_t>(t); }

void validate_pair(const SentencePair& pair, std::size_t row) {
    if (pair.pair_id.empty())
        throw Error(ErrorKind::value, "row " + std::to_string(row) + ": empty pair_id");
    if (pair.stereo_text.empty())
        throw Error(ErrorKind::value, "row " + std::to_string(row) + ": empty stereo_text");
    if (pair.anti_text.empty())
        throw Error(ErrorKind::value, "row " + std::to_string(row) + ": empty anti_text");
    if (pair.stereo_text == pair.anti_text)
        throw Error(ErrorKind::value,
                    "row " + std::to_string(row) + ": stereo_text equals anti_text");
}

void check_duplicates(const std::vector<SentencePair>& pairs) {
    std::unordered_set<std::string> seen;
    std::set<std::string> dup;
    for (const auto& p : pairs)
        if (!seen.insert(p.pair_id).second) dup.insert(p.pair_id);
    if (!dup.empty()) {
        std::ostringstream msg;
        msg << "duplicate pair_id(s):";
        for (const auto& id : dup) msg << ' ' << id;
        throw Error(ErrorKind::integrity, msg.str());
    }
}

Dataset load_csv(const std::string& path) {
    auto rows = csv::read_file(path);
    if (rows.empty()) throw Error(ErrorKind::schema, "missing header row in " + path);

    const auto& header = rows.front();
    std::unordered_map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[trim(header[i])] = i;
    for (const char* name : kColumns)
        if (!col.count(name)) throw Error(ErrorKind::schema, std::string("missing column: ") + name);

    Dataset ds;
    ds.source_path = path;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() == 1 && row[0].empty()) continue;  // trailing blank line
        if (row.size() < header.size())
            throw Error(ErrorKind::parse,
                        "row " + std::to_string(r) + ": expected " + std::to_string(header.size()) +
                            " fields, got " + std::to_string(row.size()));
        SentencePair p;
        p.pair_id = row[col["pair_id"]];
        p.bias_type = bias_type_from_string(row[col["bias_type"]], "row " + std::to_string(r));
        p.domain = row[col["domain"]];
        p.stereo_text = row[col["stereo_text"]];
        p.anti_text = row[col["anti_text"]];
        validate_pair(p, r);
        ds.pairs.push_back(std::move(p));
    }
    check_duplicates(ds.pairs);
    return ds;
}

Dataset load_jsonl(const std::string& path) {
    Dataset ds;
    ds.source_path = path;
    std::istringstream in(dmba::read_file(path));
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorKind::parse, "line " + std::to_string(row) + ": " + e.what());
        }
        if (!obj.is_object())
            throw Error(ErrorKind::parse, "line " + std::to_string(row) + ": not a JSON object");
        for (const char* name : kColumns)
            if (!obj.contains(name))
                throw Error(ErrorKind::schema, std::string("missing column: ") + name +
                                                   " (line " + std::to_string(row) + ")");
        SentencePair p;
        p.pair_id = obj["pair_id"].get<std::string>();
        p.bias_type =
            bias_type_from_string(obj["bias_type"].get<std::string>(), "line " + std::to_string(row));
        p.domain = obj["domain"].get<std::string>();
        p.stereo_text = obj["stereo_text"].get<std::string>();
        p.anti_text = obj["anti_text"].get<std::string>();
        validate_pair(p, row);
        ds.pairs.push_back(std::move(p));
    }
    check_duplicates(ds.pairs);
    return ds;
}

}  // namespace

const char* to_string(BiasType type) {
    switch (type) {
        case BiasType::gender: return "gender";
        case BiasType::race: return "race";
        case BiasType::socioculture_religion: return "socioculture_religion";
    }
    return "unknown";
}

BiasType bias_type_from_string(const std::string& label, const std::string& context) {
    if (label == "gender") return BiasType::gender;
    if (label == "race") return BiasType::race;
    if (label == "socioculture_religion") return BiasType::socioculture_religion;
    std::string where = context.empty() ? "" : context + ": ";
    throw Error(ErrorKind::value, where + "unknown bias_type '" + label + "'");
}

std::array<std::size_t, 3> Dataset::counts_by_type() const {
    std::array<std::size_t, 3> counts{0, 0, 0};
    for (const auto& p : pairs) ++counts[type_index(p.bias_type)];
    return counts;
}

DatasetFormat dataset_format_from_string(const std::string& name) {
    if (name == "csv") return DatasetFormat::csv;
    if (name == "jsonl") return DatasetFormat::jsonl;
    throw Error(ErrorKind::value, "unknown dataset format '" + name + "'");
}

DatasetFormat guess_dataset_format(const std::string& path) {
    auto dot = path.rfind('.');
    if (dot != std::string::npos && to_lower(path.substr(dot)) == ".jsonl")
        return DatasetFormat::jsonl;
    return DatasetFormat::csv;
}

Dataset load_dataset(const std::string& path, DatasetFormat format) {
    return format == DatasetFormat::csv ? load_csv(path) : load_jsonl(path);
}

void write_dataset_csv(const Dataset& dataset, const std::string& path) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(dataset.pairs.size());
    for (const auto& p : dataset.pairs)
        rows.push_back({p.pair_id, to_string(p.bias_type), p.domain, p.stereo_text, p.anti_text});
    csv::write_file(path, {"pair_id", "bias_type", "domain", "stereo_text", "anti_text"}, rows);
}

Dataset stratified_sample(const Dataset& dataset, std::size_t per_type, std::uint64_t seed) {
    std::array<std::vector<std::size_t>, 3> by_type;
    for (std::size_t i = 0; i < dataset.pairs.size(); ++i)
        by_type[type_index(dataset.pairs[i].bias_type)].push_back(i);

    for (BiasType t : kAllBiasTypes) {
        const auto& idx = by_type[type_index(t)];
        if (idx.size() < per_type)
            throw Error(ErrorKind::capacity, std::string("bias type '") + to_string(t) + "' has " +
                                                 std::to_string(idx.size()) + " pairs, need " +
                                                 std::to_string(per_type) + " (short by " +
                                                 std::to_string(per_type - idx.size()) + ")");
    }

    std::vector<bool> selected(dataset.pairs.size(), false);
    for (BiasType t : kAllBiasTypes) {
        auto idx = by_type[type_index(t)];
        // One independent stream per type keeps each type's draw stable even
        // if another type's pool changes.
        SplitMix64 rng(seed ^ fnv1a128(to_string(t)).lo);
        for (std::size_t i = 0; i < per_type; ++i) {
            std::size_t j = i + rng.bounded(idx.size() - i);
            std::swap(idx[i], idx[j]);
            selected[idx[i]] = true;
        }
    }

    Dataset out;
    out.metadata = dataset.metadata;
    out.source_path = dataset.source_path;
    for (std::size_t i = 0; i < dataset.pairs.size(); ++i)
        if (selected[i]) out.pairs.push_back(dataset.pairs[i]);
    return out;
}

LvaReport compute_lva(const std::vector<Verdict>& verdicts) {
    std::unordered_set<std::string> seen;
    for (const auto& v : verdicts)
        if (!seen.insert(v.pair_id).second)
            throw Error(ErrorKind::integrity, "pair_id '" + v.pair_id + "' appears more than once");

    LvaReport report;
    report.total_pairs = verdicts.size();
    std::array<std::size_t, 3> total{0, 0, 0};
    std::array<std::size_t, 3> validated{0, 0, 0};
    for (const auto& v : verdicts) {
        ++total[type_index(v.assigned_type)];
        if (v.validated) {
            ++validated[type_index(v.assigned_type)];
            ++report.validated_pairs;
        }
    }
    report.flagged_pairs = report.total_pairs - report.validated_pairs;
    report.overall_agreement =
        report.total_pairs == 0
            ? 0.0
            : static_cast<double>(report.validated_pairs) / static_cast<double>(report.total_pairs);
    for (BiasType t : kAllBiasTypes) {
        std::size_t n = total[type_index(t)];
        if (n > 0)
            report.per_category_agreement[t] =
                static_cast<double>(validated[type_index(t)]) / static_cast<double>(n);
    }
    return report;
}

std::vector<Verdict> load_lva_sheet(const std::string& path) {
    auto rows = csv::read_file(path);
    if (rows.empty()) throw Error(ErrorKind::schema, "missing header row in " + path);

    const auto& header = rows.front();
    std::unordered_map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[trim(header[i])] = i;
    for (const char* name : {"pair_id", "assigned_type", "verdict"})
        if (!col.count(name)) throw Error(ErrorKind::schema, std::string("missing column: ") + name);

    std::vector<Verdict> verdicts;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() == 1 && row[0].empty()) continue;
        Verdict v;
        v.pair_id = row[col["pair_id"]];
        v.assigned_type =
            bias_type_from_string(row[col["assigned_type"]], "row " + std::to_string(r));
        const std::string& verdict = row[col["verdict"]];
        if (verdict == "validated")
            v.validated = true;
        else if (verdict == "flagged")
            v.validated = false;
        else
            throw Error(ErrorKind::value,
                        "row " + std::to_string(r) + ": verdict must be validated or flagged, got '" +
                            verdict + "'");
        verdicts.push_back(std::move(v));
    }
    return verdicts;
}

}  // namespace dmba
