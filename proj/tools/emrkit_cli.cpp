#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "emrkit.h"

namespace {

struct ConfigArgs {
    std::string config_path;
    std::string db_url;
    std::string backend;
    std::string cassette;
    std::string scripted_rules;
    std::string record;
    bool overwrite_cassette = false;
    std::string out_dir;
    std::string prompts_dir;
    std::string manual;
    std::string memo;
    int samples = -1;
    int threshold = -1;
    std::vector<std::string> sets;
};

void add_config_flags(CLI::App* cmd, ConfigArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON run configuration file");
    cmd->add_option("--db-url", args.db_url, "Database endpoint (sqlite:<path>)");
    cmd->add_option("--backend", args.backend, "Completion backend: live, replay, or scripted");
    cmd->add_option("--cassette", args.cassette, "Cassette file for replay or recording");
    cmd->add_option("--scripted-rules", args.scripted_rules,
                    "Rules file for the scripted backend");
    cmd->add_option("--record", args.record, "Record completions into this cassette while running");
    cmd->add_flag("--overwrite-cassette", args.overwrite_cassette,
                  "Truncate the cassette instead of appending");
    cmd->add_option("--out", args.out_dir, "Directory receiving output artifacts");
    cmd->add_option("--prompts-dir", args.prompts_dir, "Prompt template directory");
    cmd->add_option("--manual", args.manual, "Database manual text file");
    cmd->add_option("--memo", args.memo, "Evaluation memo text file");
    cmd->add_option("--samples", args.samples, "Sample values per column in schema snapshots");
    cmd->add_option("--threshold", args.threshold, "User similarity threshold (second pass)");
    cmd->add_option("--set", args.sets, "Extra override as dotted.key=value")->take_all();
}

int fail_with_last_error(int status) {
    std::fprintf(stderr, "error: %s\n", emrkit_last_error());
    return status;
}

int apply_one(emrkit_config* config, const std::string& key, const std::string& value) {
    return emrkit_config_override(config, key.c_str(), value.c_str());
}

// Builds the effective configuration from the file plus flag overrides.
// Returns EMRKIT_OK and fills *out_config on success.
int make_config(const ConfigArgs& args, emrkit_config** out_config) {
    int status = emrkit_config_create(args.config_path.empty() ? nullptr : args.config_path.c_str(),
                                      out_config);
    if (status != EMRKIT_OK) return status;
    emrkit_config* config = *out_config;

    auto apply = [&](const std::string& key, const std::string& value) {
        if (status == EMRKIT_OK) status = apply_one(config, key, value);
    };
    if (!args.db_url.empty()) apply("db_url", args.db_url);
    if (!args.backend.empty()) apply("backend", args.backend);
    if (!args.cassette.empty()) apply("cassette", args.cassette);
    if (!args.scripted_rules.empty()) apply("scripted_rules", args.scripted_rules);
    if (!args.record.empty()) apply("record", args.record);
    if (args.overwrite_cassette) apply("record_overwrite", "true");
    if (!args.out_dir.empty()) apply("out_dir", args.out_dir);
    if (!args.prompts_dir.empty()) apply("prompts_dir", args.prompts_dir);
    if (!args.manual.empty()) apply("documents.manual", args.manual);
    if (!args.memo.empty()) apply("documents.memo", args.memo);
    if (args.samples >= 0) apply("samples_per_column", std::to_string(args.samples));
    if (args.threshold >= 0) apply("matching.user_threshold", std::to_string(args.threshold));
    for (const std::string& pair : args.sets) {
        const std::size_t eq = pair.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "error: --set expects dotted.key=value, got '%s'\n",
                         pair.c_str());
            status = EMRKIT_ERR_CONFIG;
            break;
        }
        apply(pair.substr(0, eq), pair.substr(eq + 1));
    }

    if (status != EMRKIT_OK) {
        emrkit_config_free(config);
        *out_config = nullptr;
    }
    return status;
}

int print_summary_and_free(char* summary) {
    if (summary != nullptr) {
        std::printf("%s\n", summary);
        emrkit_string_free(summary);
    }
    return EMRKIT_OK;
}

std::string join_list(const std::vector<std::string>& items) {
    std::string joined;
    for (const std::string& item : items) {
        if (!joined.empty()) joined += ",";
        joined += item;
    }
    return joined;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"EMR preprocessing agents: fixture provisioning, cohort selection, code "
                 "mapping, evaluation, and event-stream integration"};
    app.set_version_flag("--version", emrkit_version());
    app.require_subcommand(1);

    // build-db
    std::string build_style;
    std::uint64_t build_seed = 7;
    int build_patients = 60;
    std::string build_out;
    bool build_overwrite = false;
    CLI::App* build = app.add_subcommand("build-db", "Generate and provision a fixture database");
    build->add_option("--style", build_style, "Database style: mimic-like, eicu-like, or sic-like")
        ->required();
    build->add_option("--seed", build_seed, "Generation seed");
    build->add_option("--patients", build_patients, "Number of patients to generate");
    build->add_option("--out", build_out, "Target directory for the bundle and SQLite file")
        ->required();
    build->add_flag("--overwrite", build_overwrite, "Replace a non-empty target directory");

    // run-cfsa
    ConfigArgs cfsa_args;
    std::string cfsa_request;
    CLI::App* cfsa = app.add_subcommand("run-cfsa", "Run the cohort and feature selection agent");
    add_config_flags(cfsa, cfsa_args);
    cfsa->add_option("--request", cfsa_request, "Request JSON file")->required();

    // run-cma
    ConfigArgs cma_args;
    std::string cma_features;
    CLI::App* cma = app.add_subcommand("run-cma", "Run the code mapping agent");
    add_config_flags(cma, cma_args);
    cma->add_option("--features", cma_features, "Feature list JSON file")->required();

    // evaluate
    std::string eval_task;
    std::string eval_bundle;
    std::string eval_request;
    std::vector<std::string> eval_preds;
    int eval_trials = 0;
    std::string eval_report;
    CLI::App* evaluate = app.add_subcommand("evaluate", "Score prediction artifacts against gold");
    evaluate->add_option("--task", eval_task, "Evaluation task: cohort or mapping")->required();
    evaluate->add_option("--bundle", eval_bundle, "Fixture bundle directory")->required();
    evaluate->add_option("--request", eval_request, "Request name (cohort task)");
    evaluate->add_option("--pred", eval_preds, "Prediction artifact, one per trial")
        ->required()
        ->take_all();
    evaluate->add_option("--trials", eval_trials,
                         "Trial count; 0 means one trial per prediction file");
    evaluate->add_option("--report", eval_report, "Report output path");

    // integrate
    ConfigArgs integ_args;
    std::string integ_cohort_summary;
    std::string integ_mapping;
    std::vector<std::string> integ_features;
    double integ_time_min = 0.0;
    double integ_time_max = 0.0;
    CLI::App* integrate =
        app.add_subcommand("integrate", "Build the event-stream table from agent artifacts");
    add_config_flags(integrate, integ_args);
    integrate->add_option("--cohort-summary", integ_cohort_summary, "cfsa_summary.json path")
        ->required();
    integrate->add_option("--mapping", integ_mapping, "mapping.json path")->required();
    integrate->add_option("--feature", integ_features, "Feature to include (repeatable)")
        ->required()
        ->take_all();
    integrate->add_option("--time-min", integ_time_min, "Range start, hours after ICU admission")
        ->required();
    integrate->add_option("--time-max", integ_time_max, "Range end, hours after ICU admission")
        ->required();

    // record
    ConfigArgs record_args;
    std::string record_scenario;
    CLI::App* record =
        app.add_subcommand("record", "Run a scenario live and record a replay cassette");
    add_config_flags(record, record_args);
    record->add_option("--scenario", record_scenario, "Scenario JSON file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : EMRKIT_ERR_CONFIG;
    }

    if (build->parsed()) {
        char* summary = nullptr;
        const int status = emrkit_build_db(build_style.c_str(), build_seed, build_patients,
                                           build_out.c_str(), build_overwrite ? 1 : 0, &summary);
        if (status != EMRKIT_OK) return fail_with_last_error(status);
        return print_summary_and_free(summary);
    }

    if (cfsa->parsed()) {
        emrkit_config* config = nullptr;
        int status = make_config(cfsa_args, &config);
        if (status != EMRKIT_OK) return fail_with_last_error(status);
        char* summary = nullptr;
        status = emrkit_run_cfsa(config, cfsa_request.c_str(), &summary);
        emrkit_config_free(config);
        if (status != EMRKIT_OK) return fail_with_last_error(status);
        return print_summary_and_free(summary);
    }

    if (cma->parsed()) {
        emrkit_config* config = nullptr;
        int status = make_config(cma_args, &config);
        if (status != EMRKIT_OK) return fail_with_last_error(status);
        char* summary = nullptr;
        status = emrkit_run_cma(config, cma_features.c_str(), &summary);
        emrkit_config_free(config);
        if (status != EMRKIT_OK) return fail_with_last_error(status);
        return print_summary_and_free(summary);
    }

    if (evaluate->parsed()) {
        if (eval_report.empty()) eval_report = eval_task + "_report.json";
        char* summary = nullptr;
        const int status =
            emrkit_evaluate(eval_task.c_str(), eval_bundle.c_str(), eval_request.c_str(),
                            join_list(eval_preds).c_str(), eval_trials, eval_report.c_str(),
                            &summary);
        if (status != EMRKIT_OK) return fail_with_last_error(status);
        return print_summary_and_free(summary);
    }

    if (integrate->parsed()) {
        emrkit_config* config = nullptr;
        int status = make_config(integ_args, &config);
        if (status != EMRKIT_OK) return fail_with_last_error(status);
        char* summary = nullptr;
        status = emrkit_integrate(config, integ_cohort_summary.c_str(), integ_mapping.c_str(),
                                  join_list(integ_features).c_str(), integ_time_min,
                                  integ_time_max, &summary);
        emrkit_config_free(config);
        if (status != EMRKIT_OK) return fail_with_last_error(status);
        return print_summary_and_free(summary);
    }

    if (record->parsed()) {
        emrkit_config* config = nullptr;
        int status = make_config(record_args, &config);
        if (status != EMRKIT_OK) return fail_with_last_error(status);
        char* summary = nullptr;
        status = emrkit_record(config, record_scenario.c_str(), &summary);
        emrkit_config_free(config);
        if (status != EMRKIT_OK) return fail_with_last_error(status);
        return print_summary_and_free(summary);
    }

    return EMRKIT_ERR_CONFIG;
}
