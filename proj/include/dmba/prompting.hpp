#pragma once

#include <string>

namespace dmba {

inline constexpr const char* kSentencePlaceholder = "{sentence}";

// An agreement-elicitation template. The body must contain the `{sentence}`
// placeholder exactly once; the surrounding text instructs the model to
// answer with a single 0-100 integer so responses stay machine-parseable.
struct PromptTemplate {
    std::string template_id;
    std::string body;
};

// Validates the placeholder rule; throws a template error otherwise.
PromptTemplate make_template(const std::string& template_id, const std::string& body);

// The versioned built-in template used when no template file is given.
PromptTemplate default_agreement_template();

// Loads a UTF-8 template body from a file. The id defaults to the file name.
PromptTemplate load_template_file(const std::string& path, const std::string& template_id = {});

enum class Variant { stereo, anti };
enum class StimulusKind { agreement, completion };

const char* to_string(Variant v);
const char* to_string(StimulusKind k);
Variant variant_from_string(const std::string& s);

struct Stimulus {
    std::string pair_id;
    Variant variant = Variant::stereo;
    StimulusKind kind = StimulusKind::agreement;
    std::string text;
};

// Substitutes the sentence into the template. The sentence appears verbatim
// in the rendered text.
Stimulus render_agreement_prompt(const PromptTemplate& tmpl, const std::string& sentence,
                                 const std::string& pair_id = {}, Variant variant = Variant::stereo);

// Keeps the first six whitespace-delimited tokens of the sentence, joined by
// single spaces; shorter sentences pass through whole (canonicalized the same
// way). Idempotent.
Stimulus truncate_prompt(const std::string& sentence, const std::string& pair_id = {},
                         Variant variant = Variant::stereo);

inline constexpr std::size_t kTruncationTokens = 6;

}  // namespace dmba
