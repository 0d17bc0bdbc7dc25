#include "dmba/croissant.hpp"

#include <array>
#include <set>

#include "dmba/errors.hpp"
#include "dmba/util.hpp"

namespace dmba {

namespace {

constexpr std::array<const char*, 5> kDatasetColumns = {"pair_id", "bias_type", "domain",
                                                        "stereo_text", "anti_text"};

bool is_nonempty_string(const nlohmann::json& doc, const char* key) {
    return doc.contains(key) && doc[key].is_string() && !doc[key].get<std::string>().empty();
}

// JSON-LD types may be a string or an array of strings.
bool has_type(const nlohmann::json& node, const std::string& suffix) {
    if (!node.is_object() || !node.contains("@type")) return false;
    const auto& t = node["@type"];
    auto matches = [&](const nlohmann::json& v) {
        if (!v.is_string()) return false;
        std::string s = v.get<std::string>();
        return s == suffix || (s.size() > suffix.size() && s.ends_with(":" + suffix));
    };
    if (t.is_string()) return matches(t);
    if (t.is_array())
        for (const auto& v : t)
            if (matches(v)) return true;
    return false;
}

bool looks_like_file_object(const nlohmann::json& node) {
    if (!node.is_object()) return false;
    return has_type(node, "FileObject") || has_type(node, "FileSet") || node.contains("contentUrl");
}

// Field names in record sets appear as "name", or as the tail of "@id"
// ("pairs/pair_id" -> "pair_id").
void collect_field_names(const nlohmann::json& record_set, std::set<std::string>& names) {
    if (!record_set.is_object() || !record_set.contains("field")) return;
    const auto& fields = record_set["field"];
    if (!fields.is_array()) return;
    for (const auto& f : fields) {
        if (!f.is_object()) continue;
        if (f.contains("name") && f["name"].is_string()) names.insert(f["name"].get<std::string>());
        if (f.contains("@id") && f["@id"].is_string()) {
            std::string id = f["@id"].get<std::string>();
            auto slash = id.rfind('/');
            names.insert(slash == std::string::npos ? id : id.substr(slash + 1));
        }
    }
}

}  // namespace

std::vector<Finding> validate_croissant_document(const nlohmann::json& doc) {
    std::vector<Finding> findings;
    if (!doc.is_object()) {
        findings.push_back({"document", "descriptor root is not a JSON object"});
        return findings;
    }

    if (!doc.contains("@context")) findings.push_back({"@context", "absent"});
    if (!is_nonempty_string(doc, "name")) findings.push_back({"name", "absent or empty"});
    if (!is_nonempty_string(doc, "description"))
        findings.push_back({"description", "absent or empty"});

    if (!doc.contains("distribution")) {
        findings.push_back({"distribution", "absent"});
    } else {
        const auto& dist = doc["distribution"];
        bool has_file = false;
        if (dist.is_array())
            for (const auto& entry : dist) has_file = has_file || looks_like_file_object(entry);
        else
            has_file = looks_like_file_object(dist);
        if (!has_file) findings.push_back({"distribution", "contains no file object"});
    }

    if (!doc.contains("recordSet")) {
        findings.push_back({"recordSet", "absent"});
    } else {
        const auto& rs = doc["recordSet"];
        std::set<std::string> names;
        if (rs.is_array())
            for (const auto& entry : rs) collect_field_names(entry, names);
        else
            collect_field_names(rs, names);
        for (const char* column : kDatasetColumns)
            if (!names.count(column))
                findings.push_back({"recordSet", std::string("does not describe column '") + column +
                                                     "'"});
    }
    return findings;
}

std::vector<Finding> validate_croissant(const std::string& descriptor_path) {
    std::string text = read_file(descriptor_path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::parse, "descriptor is not valid JSON (byte " +
                                          std::to_string(e.byte) + "): " + e.what());
    }
    return validate_croissant_document(doc);
}

}  // namespace dmba
