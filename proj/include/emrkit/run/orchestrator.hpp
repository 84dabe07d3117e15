#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emrkit/bench/metrics.hpp"
#include "emrkit/cfsa/agent.hpp"
#include "emrkit/cma/agent.hpp"
#include "emrkit/json.hpp"
#include "emrkit/llm/client.hpp"
#include "emrkit/run/config.hpp"

namespace emrkit::run {

// Builds the completion client named by config.backend. Live mode fails fast
// when the credential environment variable is unset; replay mode fails fast
// on a missing or partial cassette.
llm::Client make_client(const RunConfig& config);

struct BuildDbOutcome {
    std::string bundle_dir;
    std::string db_path;
    std::string database_name;
    std::size_t table_count = 0;

    Json to_json() const;
};

// Generates the synthetic hospital database for one style and provisions it
// as SQLite under target_dir, alongside the serialized bundle (schema, CSVs,
// docs, gold). Gold answers live only in bundle files, never as tables the
// read-only session can see. A non-empty target_dir is refused without
// overwrite.
BuildDbOutcome cmd_build_db(const std::string& style, std::uint64_t seed, int patient_count,
                            const std::string& target_dir, bool overwrite);

struct CfsaOutcome {
    std::string sql_path;
    std::string csv_path;
    std::string transcript_path;
    std::string summary_path;
    cfsa::CohortResult result;

    Json to_json() const;
};

cfsa::ClinicalRequest load_request(const std::string& path);

// Runs the cohort agent against config.db_url and writes four artifacts into
// config.out_dir: cohort.sql, cohort.csv, cfsa_transcript.jsonl, and
// cfsa_summary.json. When config.record is set, every completion is also
// recorded into a cassette.
CfsaOutcome cmd_run_cfsa(const RunConfig& config, const cfsa::ClinicalRequest& request);

struct CmaOutcome {
    std::string mapping_path;
    std::string transcript_path;
    std::string summary_path;
    std::size_t feature_count = 0;
    std::size_t failure_count = 0;

    Json to_json() const;
};

std::vector<std::string> load_features(const std::string& path);

// Maps every feature in order, one agent run each. A feature whose run throws
// is recorded as Absent with a failure flag and message; the command only
// fails outright when every feature fails. Artifacts: mapping.json,
// cma_transcript.jsonl, cma_summary.json under config.out_dir.
CmaOutcome cmd_run_cma(const RunConfig& config, const std::vector<std::string>& features);

struct EvaluateOutcome {
    std::string report_path;
    bench::TrialStats stats;
    Json report;

    Json to_json() const;
};

// Scores one prediction CSV per trial against the gold cohort derived from
// the fixture bundle (meta.json fixes style/seed/scale; request_name picks
// the criteria). trials <= 0 means one trial per prediction path; trials
// beyond the provided paths count as failures scored 0.
EvaluateOutcome cmd_evaluate_cohort(const std::string& bundle_dir, const std::string& request_name,
                                    const std::vector<std::string>& prediction_paths, int trials,
                                    const std::string& report_path);

// Scores one mapping-prediction JSON per trial against gold/mapping.json in
// the bundle. The per-trial score is item-level micro F1; the report carries
// the full confusion breakdown for each trial.
EvaluateOutcome cmd_evaluate_mapping(const std::string& bundle_dir,
                                     const std::vector<std::string>& prediction_paths, int trials,
                                     const std::string& report_path);

struct IntegrateOutcome {
    std::string events_path;
    std::string transcript_path;
    std::string summary_path;
    std::size_t row_count = 0;
    bool retried = false;
    std::string warning;

    Json to_json() const;
};

// Renders the event-stream integration prompt from the cohort summary
// (final SQL + guideline), the mapping output (schema linking, guideline,
// selected codes for the requested features), and the time range in hours
// after ICU admission; executes the produced SQL; checks the stream
// invariants (four columns, sorted by stay then offset, offsets all present,
// event types within the requested features, stays within the cohort); and
// writes events.csv. One retry with error feedback on a failed attempt. An
// empty stream succeeds with a warning.
IntegrateOutcome cmd_integrate(const RunConfig& config, const std::string& cohort_summary_path,
                               const std::string& mapping_path,
                               const std::vector<std::string>& features, double time_min_hours,
                               double time_max_hours);

struct RecordOutcome {
    std::string cassette_path;
    std::string task;
    long long completions = 0;
    Json inner;

    Json to_json() const;
};

// Runs a scenario file ({"task": "cfsa", "request": {...}} or
// {"task": "cma", "features": [...]}) against the live backend while
// recording every completion into config.cassette. The cassette is only
// marked complete when the scenario finishes; a crash mid-run leaves it
// partial and replay refuses it. Appends unless config.record_overwrite.
RecordOutcome cmd_record(const RunConfig& config, const std::string& scenario_path);

}  // namespace emrkit::run
