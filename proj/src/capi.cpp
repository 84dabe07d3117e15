#include "emrkit.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <functional>
#include <string>
#include <vector>

#include "emrkit/error.hpp"
#include "emrkit/run/config.hpp"
#include "emrkit/run/orchestrator.hpp"
#include "emrkit/util.hpp"

namespace {

thread_local std::string g_last_error;

int status_of(emrkit::ErrorKind kind) {
    switch (kind) {
        case emrkit::ErrorKind::Config:
            return EMRKIT_ERR_CONFIG;
        case emrkit::ErrorKind::Environment:
            return EMRKIT_ERR_ENVIRONMENT;
        default:
            return EMRKIT_ERR_AGENT;
    }
}

// Runs the body, routing every failure into the status contract and the
// thread-local message.
int guarded(const std::function<int()>& body) {
    try {
        g_last_error.clear();
        return body();
    } catch (const emrkit::Error& e) {
        g_last_error = e.message();
        return status_of(e.kind());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return EMRKIT_ERR_AGENT;
    } catch (...) {
        g_last_error = "unknown failure";
        return EMRKIT_ERR_AGENT;
    }
}

char* dup_string(const std::string& text) {
    char* out = static_cast<char*>(std::malloc(text.size() + 1));
    if (out == nullptr) return nullptr;
    std::memcpy(out, text.c_str(), text.size() + 1);
    return out;
}

void put_summary(char** slot, const emrkit::Json& summary) {
    if (slot != nullptr) *slot = dup_string(summary.dump(2));
}

std::string require(const char* value, const char* what) {
    if (value == nullptr || *value == '\0') {
        throw emrkit::config_error(std::string(what) + " must not be empty");
    }
    return value;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    for (const std::string& part : emrkit::util::split(text, ',')) {
        std::string trimmed = emrkit::util::trim(part);
        if (!trimmed.empty()) out.push_back(std::move(trimmed));
    }
    return out;
}

}  // namespace

struct emrkit_config {
    emrkit::run::RunConfig value;
};

extern "C" {

const char* emrkit_version(void) { return "0.1.0"; }

const char* emrkit_last_error(void) { return g_last_error.c_str(); }

void emrkit_string_free(char* text) { std::free(text); }

int emrkit_config_create(const char* json_path, emrkit_config** out_config) {
    return guarded([&]() {
        if (out_config == nullptr) throw emrkit::config_error("out_config must not be NULL");
        emrkit::run::RunConfig config;
        if (json_path != nullptr && *json_path != '\0') {
            config = emrkit::run::RunConfig::load_file(json_path);
        }
        *out_config = new emrkit_config{std::move(config)};
        return EMRKIT_OK;
    });
}

int emrkit_config_override(emrkit_config* config, const char* key, const char* value) {
    return guarded([&]() {
        if (config == nullptr) throw emrkit::config_error("config handle must not be NULL");
        config->value.apply_override(require(key, "override key"),
                                     value == nullptr ? "" : value);
        return EMRKIT_OK;
    });
}

int emrkit_config_render(const emrkit_config* config, char** json_out) {
    return guarded([&]() {
        if (config == nullptr) throw emrkit::config_error("config handle must not be NULL");
        if (json_out == nullptr) throw emrkit::config_error("json_out must not be NULL");
        *json_out = dup_string(config->value.to_json().dump(2));
        return EMRKIT_OK;
    });
}

void emrkit_config_free(emrkit_config* config) { delete config; }

int emrkit_build_db(const char* style, uint64_t seed, int patient_count, const char* target_dir,
                    int overwrite, char** summary_json) {
    return guarded([&]() {
        emrkit::run::BuildDbOutcome outcome = emrkit::run::cmd_build_db(
            require(style, "style"), seed, patient_count, require(target_dir, "target directory"),
            overwrite != 0);
        put_summary(summary_json, outcome.to_json());
        return EMRKIT_OK;
    });
}

int emrkit_run_cfsa(const emrkit_config* config, const char* request_path, char** summary_json) {
    return guarded([&]() {
        if (config == nullptr) throw emrkit::config_error("config handle must not be NULL");
        emrkit::cfsa::ClinicalRequest request =
            emrkit::run::load_request(require(request_path, "request path"));
        emrkit::run::CfsaOutcome outcome = emrkit::run::cmd_run_cfsa(config->value, request);
        put_summary(summary_json, outcome.to_json());
        return EMRKIT_OK;
    });
}

int emrkit_run_cma(const emrkit_config* config, const char* features_path, char** summary_json) {
    return guarded([&]() {
        if (config == nullptr) throw emrkit::config_error("config handle must not be NULL");
        std::vector<std::string> features =
            emrkit::run::load_features(require(features_path, "feature list path"));
        emrkit::run::CmaOutcome outcome = emrkit::run::cmd_run_cma(config->value, features);
        put_summary(summary_json, outcome.to_json());
        return EMRKIT_OK;
    });
}

int emrkit_evaluate(const char* task, const char* bundle_dir, const char* request_name,
                    const char* prediction_paths, int trials, const char* report_path,
                    char** summary_json) {
    return guarded([&]() {
        const std::string task_name = require(task, "task");
        const std::string bundle = require(bundle_dir, "bundle directory");
        std::vector<std::string> paths = split_list(require(prediction_paths, "prediction paths"));
        const std::string report = require(report_path, "report path");

        emrkit::run::EvaluateOutcome outcome;
        if (task_name == "cohort") {
            outcome = emrkit::run::cmd_evaluate_cohort(
                bundle, require(request_name, "request name"), paths, trials, report);
        } else if (task_name == "mapping") {
            outcome = emrkit::run::cmd_evaluate_mapping(bundle, paths, trials, report);
        } else {
            throw emrkit::config_error("task must be cohort or mapping; got '" + task_name + "'");
        }
        put_summary(summary_json, outcome.to_json());
        return EMRKIT_OK;
    });
}

int emrkit_integrate(const emrkit_config* config, const char* cohort_summary_path,
                     const char* mapping_path, const char* features, double time_min_hours,
                     double time_max_hours, char** summary_json) {
    return guarded([&]() {
        if (config == nullptr) throw emrkit::config_error("config handle must not be NULL");
        std::vector<std::string> feature_list = split_list(require(features, "feature list"));
        emrkit::run::IntegrateOutcome outcome = emrkit::run::cmd_integrate(
            config->value, require(cohort_summary_path, "cohort summary path"),
            require(mapping_path, "mapping path"), feature_list, time_min_hours, time_max_hours);
        put_summary(summary_json, outcome.to_json());
        return EMRKIT_OK;
    });
}

int emrkit_record(const emrkit_config* config, const char* scenario_path, char** summary_json) {
    return guarded([&]() {
        if (config == nullptr) throw emrkit::config_error("config handle must not be NULL");
        emrkit::run::RecordOutcome outcome =
            emrkit::run::cmd_record(config->value, require(scenario_path, "scenario path"));
        put_summary(summary_json, outcome.to_json());
        return EMRKIT_OK;
    });
}

}  // extern "C"
