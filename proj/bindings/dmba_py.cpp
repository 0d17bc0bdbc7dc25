#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "dmba/corpus.hpp"
#include "dmba/metrics.hpp"
#include "dmba/prompting.hpp"
#include "dmba/scoring.hpp"

namespace py = pybind11;
using namespace dmba;

PYBIND11_MODULE(_dmba, m) {
    m.doc() = "Scoring and metric primitives of the dual-metric bias harness";

    m.attr("TOKENIZER_VERSION") = kTokenizerVersion;
    m.attr("TRUNCATION_TOKENS") = static_cast<int>(kTruncationTokens);

    m.def("tokenize", [](const std::string& text) { return tokenize(text); }, py::arg("text"),
          "Lowercase and split on runs of non-alphanumeric bytes.");

    m.def(
        "parse_agreement",
        [](const std::string& text) {
            AgreementScore s = parse_agreement(text);
            py::dict d;
            d["ok"] = s.ok();
            d["value"] = s.ok() ? py::object(py::float_(s.value)) : py::none();
            d["raw_text"] = s.raw_text;
            return d;
        },
        py::arg("text"), "First in-range decimal number of a model reply, or ok=False.");

    m.def(
        "tfidf_vectors",
        [](const std::vector<std::string>& documents) {
            TfidfModel model = tfidf_vectors(documents);
            return py::make_tuple(model.vocabulary, model.vectors);
        },
        py::arg("documents"), "Returns (sorted vocabulary, one L2-normalized vector per document).");

    m.def(
        "cosine",
        [](const std::vector<double>& u, const std::vector<double>& v) {
            return cosine(std::span<const double>(u), std::span<const double>(v));
        },
        py::arg("u"), py::arg("v"));

    m.def(
        "label_for",
        [](double sim_stereo, double sim_anti, double tau) {
            return std::string(to_string(label_for(sim_stereo, sim_anti, tau)));
        },
        py::arg("sim_stereo"), py::arg("sim_anti"), py::arg("tau"));

    m.def(
        "classify_completion",
        [](const std::string& completion, const std::string& stereo_ref, const std::string& anti_ref,
           double tau) {
            CompletionLabel label = classify_completion(completion, stereo_ref, anti_ref, tau);
            py::dict d;
            d["label"] = std::string(to_string(label.label));
            d["sim_stereo"] = label.similarities.sim_stereo;
            d["sim_anti"] = label.similarities.sim_anti;
            d["threshold"] = label.threshold;
            return d;
        },
        py::arg("completion"), py::arg("stereo_ref"), py::arg("anti_ref"), py::arg("tau") = 0.7,
        "TF-IDF cosine of the completion against both references plus the case-rule label.");

    m.def(
        "pearson",
        [](const std::vector<double>& x, const std::vector<double>& y) -> std::optional<double> {
            return pearson(std::span<const double>(x), std::span<const double>(y));
        },
        py::arg("x"), py::arg("y"), "Sample Pearson r, or None when either side is constant.");

    m.def(
        "prevalence",
        [](const std::vector<int>& indicators) { return prevalence(std::span<const int>(indicators)); },
        py::arg("indicators"), "Share of set indicators as a percentage.");

    m.def(
        "truncate_prompt",
        [](const std::string& sentence) { return truncate_prompt(sentence).text; }, py::arg("sentence"),
        "First six whitespace tokens, space-joined; shorter sentences pass through.");

    m.def(
        "render_agreement_prompt",
        [](const std::string& sentence) {
            return render_agreement_prompt(default_agreement_template(), sentence).text;
        },
        py::arg("sentence"), "The built-in agreement prompt with the sentence substituted.");

    m.def(
        "compute_lva",
        [](const std::vector<std::tuple<std::string, std::string, bool>>& rows) {
            std::vector<Verdict> verdicts;
            verdicts.reserve(rows.size());
            for (const auto& [pair_id, type_label, validated] : rows)
                verdicts.push_back({pair_id, bias_type_from_string(type_label, pair_id), validated});
            LvaReport report = compute_lva(verdicts);
            py::dict per_category;
            for (const auto& [type, agreement] : report.per_category_agreement)
                per_category[to_string(type)] = agreement;
            py::dict d;
            d["total_pairs"] = report.total_pairs;
            d["validated_pairs"] = report.validated_pairs;
            d["flagged_pairs"] = report.flagged_pairs;
            d["overall_agreement"] = report.overall_agreement;
            d["per_category_agreement"] = per_category;
            return d;
        },
        py::arg("verdicts"),
        "Label validation agreement from (pair_id, bias_type, validated) rows.");
}
