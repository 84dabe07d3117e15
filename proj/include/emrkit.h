#ifndef EMRKIT_H
#define EMRKIT_H

/*
 * C surface of the emrkit shared library. Every operation returns a status
 * code that doubles as the CLI exit code:
 *   0  success
 *   1  terminal agent failure (budget exhaustion, malformed output, bad SQL)
 *   2  configuration error (bad flags, missing files, invalid settings)
 *   3  environment error (missing credentials, unreachable database or API)
 *
 * On any nonzero status the message is retrievable via emrkit_last_error().
 * Output parameters of type char** receive a heap-allocated JSON summary;
 * release it with emrkit_string_free(). All input strings are UTF-8.
 */

#include <stdint.h>

#if defined(_WIN32)
#define EMRKIT_API __declspec(dllexport)
#else
#define EMRKIT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

enum {
    EMRKIT_OK = 0,
    EMRKIT_ERR_AGENT = 1,
    EMRKIT_ERR_CONFIG = 2,
    EMRKIT_ERR_ENVIRONMENT = 3
};

typedef struct emrkit_config emrkit_config;

EMRKIT_API const char* emrkit_version(void);

/* Thread-local message describing the most recent failure; never NULL. */
EMRKIT_API const char* emrkit_last_error(void);

EMRKIT_API void emrkit_string_free(char* text);

/*
 * Creates a run configuration. json_path may be NULL for pure defaults
 * (replay backend, budgets 10/5/5, 10 samples per column, thresholds 80/90).
 */
EMRKIT_API int emrkit_config_create(const char* json_path, emrkit_config** out_config);

/* Applies one dotted-key override, e.g. ("budgets.max_rounds", "3"). */
EMRKIT_API int emrkit_config_override(emrkit_config* config, const char* key, const char* value);

/* Serializes the effective configuration as JSON. */
EMRKIT_API int emrkit_config_render(const emrkit_config* config, char** json_out);

EMRKIT_API void emrkit_config_free(emrkit_config* config);

/*
 * Generates one synthetic hospital database (style: mimic-like, eicu-like,
 * or sic-like) under target_dir: the SQLite file plus schema, CSV data,
 * documentation, and gold answers as plain files. Refuses a non-empty
 * target_dir unless overwrite is nonzero.
 */
EMRKIT_API int emrkit_build_db(const char* style, uint64_t seed, int patient_count,
                               const char* target_dir, int overwrite, char** summary_json);

/*
 * Runs the cohort and feature selection agent for the request file
 * ({"cohort_selection": ..., "feature_selection": ...}). Artifacts land in
 * the configured output directory: cohort.sql, cohort.csv,
 * cfsa_transcript.jsonl, cfsa_summary.json.
 */
EMRKIT_API int emrkit_run_cfsa(const emrkit_config* config, const char* request_path,
                               char** summary_json);

/*
 * Runs the code-mapping agent for every feature in the list file (JSON array
 * of names). Per-feature failures are recorded as absent with a failure flag;
 * the call only fails when every feature fails. Artifacts: mapping.json,
 * cma_transcript.jsonl, cma_summary.json.
 */
EMRKIT_API int emrkit_run_cma(const emrkit_config* config, const char* features_path,
                              char** summary_json);

/*
 * Scores prediction artifacts against the gold answers of a generated bundle.
 * task is "cohort" (request_name required, predictions are CSV files) or
 * "mapping" (request_name ignored, predictions are JSON files).
 * prediction_paths is a comma-separated list; each path is one trial.
 * trials <= 0 means one trial per path; extra trials count as failures.
 */
EMRKIT_API int emrkit_evaluate(const char* task, const char* bundle_dir, const char* request_name,
                               const char* prediction_paths, int trials, const char* report_path,
                               char** summary_json);

/*
 * Builds the event-stream table for the requested features (comma-separated)
 * by prompting once with the cohort summary, the mapping output, and the time
 * range in hours after ICU admission, then executing and validating the
 * produced SQL. Writes events.csv under the configured output directory.
 */
EMRKIT_API int emrkit_integrate(const emrkit_config* config, const char* cohort_summary_path,
                                const char* mapping_path, const char* features,
                                double time_min_hours, double time_max_hours, char** summary_json);

/*
 * Runs a scenario file ({"task": "cfsa"|"cma", ...}) against the live backend
 * while recording every completion into the configured cassette for later
 * replay. Appends to an existing cassette unless record_overwrite is set.
 */
EMRKIT_API int emrkit_record(const emrkit_config* config, const char* scenario_path,
                             char** summary_json);

#ifdef __cplusplus
}
#endif

#endif /* EMRKIT_H */
