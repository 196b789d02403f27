// teffect: config-driven causal effect estimation from observational data.
//
//   teffect run      --treatment t.csv --observations o.csv --config c.json --out dir
//   teffect synth    --spec spec.json --out dir
//   teffect validate --treatment t.csv --observations o.csv --config c.json
//
// Exit codes: 0 success, 1 validation error, 2 estimation error, 3 I/O error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "teffect/decide.hpp"
#include "teffect/ingest.hpp"
#include "teffect/report.hpp"
#include "teffect/synth.hpp"

namespace {

int exit_code_for(const teffect::Error& e) {
    switch (e.kind()) {
        case teffect::ErrorKind::validation: return 1;
        case teffect::ErrorKind::estimation: return 2;
        case teffect::ErrorKind::io: return 3;
    }
    return 2;
}

struct RunArgs {
    std::string treatment, observations, config, out;
    std::optional<uint64_t> seed;
};

// Best effort: a failed run still leaves a machine-readable record behind.
void write_error_file(const std::string& out_dir, const teffect::Error& e) {
    try {
        std::error_code ec;
        std::filesystem::create_directories(out_dir, ec);
        std::ofstream out(std::filesystem::path(out_dir) / "error.json", std::ios::binary);
        nlohmann::ordered_json doc;
        doc["error"] = e.code();
        doc["message"] = e.what();
        out << doc.dump(2) << '\n';
    } catch (...) {
        // the original error matters more
    }
}

int cmd_run(const RunArgs& args) {
    teffect::ParsedInputs inputs = teffect::parse_inputs(args.treatment, args.observations, args.config);
    if (args.seed.has_value()) inputs.config.seed = *args.seed;
    for (const auto& w : inputs.report.warnings) teffect::log_warn(w);

    teffect::StudyResult study;
    try {
        study = teffect::run_study(inputs);
    } catch (const teffect::Error& e) {
        write_error_file(args.out, e);
        throw;
    }
    std::string path = teffect::write_all_artifacts(study, inputs.config, args.out);
    teffect::log_info("selected " + study.selected.estimator_id + ": ate " +
                  std::to_string(study.selected.ate) + " (se " + std::to_string(study.selected.se) +
                  "), uplift " + std::to_string(study.uplift_percent) + "%");
    teffect::log_info("wrote " + path);
    return 0;
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir) {
    std::FILE* f = std::fopen(spec_path.c_str(), "rb");
    if (f == nullptr) throw teffect::IoError("FileNotReadable", "cannot open '" + spec_path + "'");
    std::string text;
    char buf[4096];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof(buf), f)) > 0) text.append(buf, got);
    std::fclose(f);

    teffect::SynthSpec spec = teffect::SynthSpec::from_json(text);
    teffect::SynthData data = teffect::generate(spec);
    auto paths = teffect::write_synth(data, out_dir);
    for (const auto& p : paths) teffect::log_info("wrote " + p);
    return 0;
}

int cmd_validate(const std::string& treatment, const std::string& observations,
                 const std::string& config) {
    teffect::ParsedInputs inputs = teffect::parse_inputs(treatment, observations, config);
    teffect::RuleFacts facts = teffect::summarize(inputs.panel, inputs.treatment, inputs.config);
    std::fprintf(stderr, "inputs valid\n");
    std::fprintf(stderr, "  rows:                 %lld\n",
                 static_cast<long long>(facts.total_events));
    std::fprintf(stderr, "  shape:                %s\n", teffect::shape_name(facts.shape));
    std::fprintf(stderr, "  period:               %s\n", teffect::period_name(inputs.panel.period));
    std::fprintf(stderr, "  units:                %zu (%d treated, %d control)\n",
                 inputs.panel.n_units(), facts.n_treated_units, facts.n_control_units);
    std::fprintf(stderr, "  covariates:           %d\n", facts.n_covariates);
    std::fprintf(stderr, "  pre/post periods:     %d / %d\n", facts.pre_periods, facts.post_periods);
    std::fprintf(stderr, "  max treated/cohort:   %d\n", facts.max_treated_per_cohort);
    std::fprintf(stderr, "  cohorts meeting size: %d\n", facts.n_valid_cohorts);
    for (const auto& w : inputs.report.warnings) std::fprintf(stderr, "  warning: %s\n", w.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    teffect::set_log_level(teffect::LogLevel::info);
    teffect::set_log_level_from_env();

    CLI::App app{"config-driven causal effect estimation"};
    app.require_subcommand(1);
    app.fallthrough();
    int jobs = 0;
    app.add_option("--jobs", jobs, "worker threads (default: logical cores)");

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "execute a causal study end to end");
    run->add_option("--treatment", run_args.treatment, "treatment CSV")->required();
    run->add_option("--observations", run_args.observations, "observations CSV")->required();
    run->add_option("--config", run_args.config, "study config JSON")->required();
    run->add_option("--out", run_args.out, "output directory")->required();
    uint64_t seed_flag = 0;
    auto* seed_opt = run->add_option("--seed", seed_flag, "override config seed");

    std::string synth_spec, synth_out;
    auto* synth = app.add_subcommand("synth", "generate a benchmark dataset");
    synth->add_option("--spec", synth_spec, "generator spec JSON")->required();
    synth->add_option("--out", synth_out, "output directory")->required();

    std::string val_treatment, val_observations, val_config;
    auto* validate = app.add_subcommand("validate", "check inputs and print the summary");
    validate->add_option("--treatment", val_treatment, "treatment CSV")->required();
    validate->add_option("--observations", val_observations, "observations CSV")->required();
    validate->add_option("--config", val_config, "study config JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    if (jobs > 0) teffect::set_jobs(jobs);
    if (seed_opt->count() > 0) run_args.seed = seed_flag;

    try {
        if (run->parsed()) return cmd_run(run_args);
        if (synth->parsed()) return cmd_synth(synth_spec, synth_out);
        if (validate->parsed()) return cmd_validate(val_treatment, val_observations, val_config);
    } catch (const teffect::Error& e) {
        std::fprintf(stderr, "error [%s]: %s\n", e.code().c_str(), e.what());
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
