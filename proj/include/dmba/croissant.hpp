#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace dmba {

// One structural problem found in a dataset descriptor.
struct Finding {
    std::string field;
    std::string message;

    std::string to_string() const { return field + ": " + message; }
    bool operator==(const Finding&) const = default;
};

// Structural validation of a Croissant (JSON-LD) dataset descriptor.
// Checks presence of the discoverability fields the harness relies on:
// name, description, a distribution with at least one file object, and a
// recordSet describing the five sentence-pair columns. Returns one finding
// per missing or malformed field, empty when the descriptor is acceptable.
// The descriptor is never modified. Full JSON-LD vocabulary conformance is
// deliberately out of scope.
std::vector<Finding> validate_croissant_document(const nlohmann::json& doc);

// File variant; throws a parse error carrying the byte offset when the file
// is not valid JSON.
std::vector<Finding> validate_croissant(const std::string& descriptor_path);

}  // namespace dmba
