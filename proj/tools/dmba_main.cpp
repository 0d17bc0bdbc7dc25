#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dmba/corpus.hpp"
#include "dmba/croissant.hpp"
#include "dmba/errors.hpp"
#include "dmba/gateway.hpp"
#include "dmba/orchestrator.hpp"
#include "dmba/prompting.hpp"
#include "dmba/reporting.hpp"
#include "dmba/util.hpp"

namespace {

using namespace dmba;

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v && *v ? v : fallback;
}

std::unique_ptr<Backend> make_backend(const RunConfig& config) {
    if (config.backend == "replay") {
        if (config.fixtures_path.empty())
            throw Error(ErrorKind::input, "replay backend needs --fixtures <jsonl>");
        return std::make_unique<ReplayBackend>(FixtureStore::load(config.fixtures_path));
    }
    if (config.backend == "live" || config.backend == "record") {
        HttpOptions options;
        options.api_key = env_or("DMBA_API_KEY", "");
        if (options.api_key.empty())
            throw Error(ErrorKind::credential, "live backend needs DMBA_API_KEY in the environment");
        options.endpoint_url = env_or("DMBA_BASE_URL", kDefaultEndpoint);
        options.retry = config.retry;
        auto live = std::make_unique<HttpBackend>(options);
        if (config.backend == "live") return live;
        if (config.fixtures_path.empty())
            throw Error(ErrorKind::input, "record backend needs --fixtures <jsonl> to write into");
        return std::make_unique<RecordingBackend>(std::move(live),
                                                  FixtureStore::open_or_create(config.fixtures_path));
    }
    throw Error(ErrorKind::value, "unknown backend '" + config.backend + "' (expected live, replay or record)");
}

std::string opt_pct(const std::optional<double>& v) {
    return v ? format_fixed6(*v) + "%" : std::string("n/a");
}

void print_summary(const RunResults& results, const ReportBundle& bundle) {
    const MetricSummary& s = results.overall;
    std::cout << "run " << results.run_id << "\n"
              << "  pairs scored:        " << s.n_pairs << "\n"
              << "  completions scored:  " << s.n_completions << "\n"
              << "  agreement bias:      " << opt_pct(s.prevalence_agreement) << "\n"
              << "  completion bias:     " << opt_pct(s.prevalence_completion) << "\n"
              << "  unparseable: " << s.unparseable_count << ", failed: " << s.failed_count << "\n"
              << "  bundle: " << std::filesystem::path(bundle.summary_json).parent_path().string() << "\n";
}

void finish_run(const ExecuteOutcome& outcome, const std::string& out_dir) {
    if (!outcome.complete) {
        std::size_t pending = 0;
        for (const auto& [_, state] : outcome.checkpoint.status)
            if (state == RequestState::pending) ++pending;
        std::cout << "run " << outcome.checkpoint.run_id << " halted: " << outcome.checkpoint.batch_progress.size()
                  << "/" << outcome.checkpoint.plan.batches.size() << " batches resolved, " << pending
                  << " requests pending; resume with the same checkpoint\n";
        return;
    }
    RunResults results = assemble_results(outcome.checkpoint);
    std::string dir = out_dir.empty() ? "results/" + results.run_id : out_dir;
    ReportBundle bundle = export_results(results, dir);
    print_summary(results, bundle);
}

int cmd_validate_dataset(const std::string& data, const std::string& format, const std::string& croissant) {
    DatasetFormat fmt = format.empty() ? guess_dataset_format(data) : dataset_format_from_string(format);
    Dataset dataset = load_dataset(data, fmt);
    auto counts = dataset.counts_by_type();
    std::cout << data << ": " << dataset.pairs.size() << " pairs\n";
    for (std::size_t i = 0; i < kAllBiasTypes.size(); ++i)
        std::cout << "  " << to_string(kAllBiasTypes[i]) << ": " << counts[i] << "\n";

    if (!croissant.empty()) {
        std::vector<Finding> findings = validate_croissant(croissant);
        if (findings.empty()) {
            std::cout << "descriptor ok: " << croissant << "\n";
        } else {
            for (const auto& f : findings) std::cerr << "descriptor: " << f.to_string() << "\n";
            return 1;
        }
    }
    return 0;
}

int cmd_lva(const std::string& sheets) {
    LvaReport report = compute_lva(load_lva_sheet(sheets));
    std::cout << "pairs: " << report.total_pairs << ", validated: " << report.validated_pairs
              << ", flagged: " << report.flagged_pairs << "\n"
              << "overall agreement: " << format_fixed6(report.overall_agreement * 100.0) << "%\n";
    for (const auto& [type, agreement] : report.per_category_agreement)
        std::cout << "  " << to_string(type) << ": " << format_fixed6(agreement * 100.0) << "%\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dual-metric stereotype bias harness: agreement scoring and generative completion "
                 "classification over stereo/anti-stereo sentence pairs."};
    app.require_subcommand(1);

    // validate-dataset
    std::string vd_data, vd_format, vd_croissant;
    auto* vd = app.add_subcommand("validate-dataset", "Load a pair file, report counts, optionally check a "
                                                      "Croissant descriptor");
    vd->add_option("--data", vd_data, "Pair file (CSV or JSONL)")->required();
    vd->add_option("--format", vd_format, "Force input format: csv or jsonl");
    vd->add_option("--croissant", vd_croissant, "Croissant JSON-LD descriptor to validate");

    // lva
    std::string lva_sheets;
    auto* lva = app.add_subcommand("lva", "Label validation agreement from an annotator verdict sheet");
    lva->add_option("--sheets", lva_sheets, "Verdict CSV: pair_id,assigned_type,verdict")->required();

    // shared run/sweep options
    struct CommonRunArgs {
        std::string data, format, models, template_file, backend = "replay", fixtures, checkpoint, out;
        double tau = 0.7;
        std::uint64_t seed = 0;
        int max_tokens = 200;
        int per_model_limit = kDefaultPerModelLimit;
        int checkpoint_interval = kDefaultCheckpointInterval;
        std::vector<std::string> stop;
    };

    auto add_common = [](CLI::App* cmd, CommonRunArgs& args, bool with_checkpoint) {
        cmd->add_option("--data", args.data, "Pair file (CSV or JSONL)")->required();
        cmd->add_option("--format", args.format, "Force input format: csv or jsonl");
        cmd->add_option("--models", args.models, "Comma-separated model ids")->required();
        cmd->add_option("--template", args.template_file, "Agreement prompt template file ({sentence} "
                                                          "placeholder); built-in when omitted");
        cmd->add_option("--tau", args.tau, "Completion similarity threshold")->capture_default_str();
        cmd->add_option("--seed", args.seed, "Seed for shuffling and sampling")->capture_default_str();
        cmd->add_option("--backend", args.backend, "live, replay or record")->capture_default_str();
        cmd->add_option("--fixtures", args.fixtures, "Fixture JSONL (replay source / record target)");
        cmd->add_option("--out", args.out, "Report directory (default results/<run_id>)");
        cmd->add_option("--max-tokens", args.max_tokens, "Completion token cap")->capture_default_str();
        cmd->add_option("--per-model-limit", args.per_model_limit, "Max in-flight requests per model")->capture_default_str();
        cmd->add_option("--stop", args.stop, "Stop sequence (repeatable)");
        if (with_checkpoint) {
            cmd->add_option("--checkpoint", args.checkpoint, "Checkpoint JSON path (enables resume)");
            cmd->add_option("--checkpoint-interval", args.checkpoint_interval,
                            "Persist every N completed requests")->capture_default_str();
        }
    };

    // run
    CommonRunArgs run_args;
    int run_max_batches = 0;
    auto* run = app.add_subcommand("run", "Plan and execute a full evaluation");
    add_common(run, run_args, true);
    run->add_option("--max-batches", run_max_batches,
                    "Stop after this many newly resolved batches (staging/testing knob)");

    // resume
    std::string resume_checkpoint, resume_out;
    int resume_max_batches = 0;
    auto* resume = app.add_subcommand("resume", "Continue a checkpointed run");
    resume->add_option("--checkpoint", resume_checkpoint, "Checkpoint JSON written by run")->required();
    resume->add_option("--out", resume_out, "Report directory (default results/<run_id>)");
    resume->add_option("--max-batches", resume_max_batches, "Stop after this many newly resolved batches");

    // sweep
    CommonRunArgs sweep_args;
    std::size_t per_type = 135;
    std::vector<double> temps = {0.0, 0.3, 0.5, 0.7, 1.0};
    std::vector<double> top_ps = {0.3, 0.5, 0.7, 0.85, 1.0};
    double fixed_top_p = 1.0, fixed_temperature = 0.7;
    auto* sweep = app.add_subcommand("sweep", "Decoding sensitivity sweeps over a stratified sample");
    add_common(sweep, sweep_args, false);
    sweep->add_option("--per-type", per_type, "Sample size per bias type")->capture_default_str();
    sweep->add_option("--temps", temps, "Temperature grid")->delimiter(',');
    sweep->add_option("--top-ps", top_ps, "top_p grid")->delimiter(',');
    sweep->add_option("--fixed-top-p", fixed_top_p, "top_p held fixed during the temperature sweep")->capture_default_str();
    sweep->add_option("--fixed-temp", fixed_temperature, "Temperature held fixed during the top_p sweep")->capture_default_str();

    // analyze
    std::string an_results, an_out;
    auto* analyze = app.add_subcommand("analyze", "Recompute summaries and charts from exported tables");
    analyze->add_option("--results", an_results, "Directory holding per_pair.csv/per_completion.csv")->required();
    analyze->add_option("--out", an_out, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (vd->parsed()) return cmd_validate_dataset(vd_data, vd_format, vd_croissant);
        if (lva->parsed()) return cmd_lva(lva_sheets);

        if (run->parsed()) {
            DatasetFormat fmt = run_args.format.empty() ? guess_dataset_format(run_args.data)
                                                        : dataset_format_from_string(run_args.format);
            Dataset dataset = load_dataset(run_args.data, fmt);
            PromptTemplate tmpl = run_args.template_file.empty() ? default_agreement_template()
                                                                 : load_template_file(run_args.template_file);
            std::vector<std::string> models;
            for (auto& m : split(run_args.models, ','))
                if (!trim(m).empty()) models.push_back(trim(m));

            RunPlan plan = plan_run(dataset, models, tmpl, run_args.tau, run_args.seed, run_args.stop,
                                    run_args.max_tokens);
            RunConfig config;
            config.models = models;
            config.seed = run_args.seed;
            config.prompt_template = tmpl;
            config.stop_sequences = run_args.stop;
            config.max_tokens = run_args.max_tokens;
            config.per_model_limit = run_args.per_model_limit;
            config.checkpoint_interval = run_args.checkpoint_interval;
            config.backend = run_args.backend;
            config.fixtures_path = run_args.fixtures;

            Checkpoint checkpoint;
            if (!run_args.checkpoint.empty() && std::filesystem::exists(run_args.checkpoint)) {
                checkpoint = Checkpoint::load(run_args.checkpoint);
                if (checkpoint.plan_digest != plan.digest())
                    throw Error(ErrorKind::checkpoint, run_args.checkpoint +
                                                           ": refusing to resume, checkpoint belongs to a "
                                                           "different plan");
                std::cout << "resuming " << checkpoint.run_id << " from " << run_args.checkpoint << "\n";
            } else {
                checkpoint = Checkpoint::fresh(plan, config, dataset.pairs);
            }

            auto backend = make_backend(checkpoint.config);
            ExecuteOptions options;
            options.checkpoint_path = run_args.checkpoint;
            options.max_batches = run_max_batches;
            finish_run(execute(std::move(checkpoint), *backend, options), run_args.out);
            return 0;
        }

        if (resume->parsed()) {
            Checkpoint checkpoint = Checkpoint::load(resume_checkpoint);
            auto backend = make_backend(checkpoint.config);
            ExecuteOptions options;
            options.checkpoint_path = resume_checkpoint;
            options.max_batches = resume_max_batches;
            finish_run(execute(std::move(checkpoint), *backend, options), resume_out);
            return 0;
        }

        if (sweep->parsed()) {
            DatasetFormat fmt = sweep_args.format.empty() ? guess_dataset_format(sweep_args.data)
                                                          : dataset_format_from_string(sweep_args.format);
            Dataset dataset = load_dataset(sweep_args.data, fmt);
            PromptTemplate tmpl = sweep_args.template_file.empty() ? default_agreement_template()
                                                                   : load_template_file(sweep_args.template_file);
            std::vector<std::string> models;
            for (auto& m : split(sweep_args.models, ','))
                if (!trim(m).empty()) models.push_back(trim(m));

            Dataset sample = stratified_sample(dataset, per_type, sweep_args.seed);

            RunConfig config;
            config.models = models;
            config.seed = sweep_args.seed;
            config.prompt_template = tmpl;
            config.stop_sequences = sweep_args.stop;
            config.max_tokens = sweep_args.max_tokens;
            config.per_model_limit = sweep_args.per_model_limit;
            config.backend = sweep_args.backend;
            config.fixtures_path = sweep_args.fixtures;

            SweepSpec spec;
            spec.temperatures = temps;
            spec.top_ps = top_ps;
            spec.fixed_top_p = fixed_top_p;
            spec.fixed_temperature = fixed_temperature;

            auto backend = make_backend(config);
            SweepResults results = sensitivity_run(sample, config, sweep_args.tau, spec, *backend);
            std::string dir = sweep_args.out.empty() ? "results/" + results.run_id : sweep_args.out;
            ReportBundle bundle = export_sweep_results(results, sample, dir);
            std::cout << "sweep " << results.run_id << ": " << results.temperature.size()
                      << " temperature points, " << results.top_p.size() << " top_p points over "
                      << sample.pairs.size() << " pairs\n"
                      << "  bundle: " << dir << "\n";
            (void)bundle;
            return 0;
        }

        if (analyze->parsed()) {
            ReportBundle bundle = analyze_results(an_results, an_out);
            std::cout << "recomputed " << an_results << " into " << an_out << "\n"
                      << "  summary: " << bundle.summary_json << "\n";
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
