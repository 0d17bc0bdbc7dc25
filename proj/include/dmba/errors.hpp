#pragma once

#include <stdexcept>
#include <string>

namespace dmba {

// One exception type for the whole library; the kind tells callers (and
// tests) which contract was violated.
enum class ErrorKind {
    schema,               // missing/extra column or field
    integrity,            // duplicate ids, broken uniqueness
    value,                // bad field value (unknown enum, empty text)
    capacity,             // not enough pairs to sample
    parse,                // unparseable file content
    template_error,       // prompt template malformed
    precondition,         // caller violated an operation precondition
    delivery,             // request could not be delivered after retries
    credential,           // authentication failure, never retried
    routing,              // unknown model or endpoint
    storage,              // file write/read failure
    shape,                // dimension/length mismatch
    alignment,            // record join produced no rows
    undefined_statistic,  // statistic requested over an empty set
    checkpoint,           // checkpoint refused (digest/schema mismatch)
    input,                // generic bad argument
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + " error: " + message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

    // Attempts made before a delivery error was raised; 0 when not applicable.
    int attempts = 0;
    // Last HTTP status observed, 0 when not applicable.
    int last_status = 0;

  private:
    ErrorKind kind_;
};

}  // namespace dmba
