#include "emrkit/run/orchestrator.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>

#include "emrkit/bench/gold.hpp"
#include "emrkit/db/gateway.hpp"
#include "emrkit/error.hpp"
#include "emrkit/parse/response.hpp"
#include "emrkit/run/transcript.hpp"
#include "emrkit/util.hpp"

namespace emrkit::run {

namespace {

Json read_json_file(const std::string& path, const std::string& what) {
    if (!util::file_exists(path)) {
        throw config_error(what + " file not found: " + path);
    }
    try {
        return Json::parse(util::read_file(path));
    } catch (const Json::parse_error& e) {
        throw config_error(what + " file " + path + " is not valid JSON: " + e.what());
    }
}

struct Workbench {
    llm::Client client;
    db::Session session;
    prompt::TemplateStore templates;
    prompt::DocumentBundle documents;
    std::shared_ptr<llm::Recorder> recorder;
};

Workbench open_workbench(const RunConfig& config) {
    config.validate();
    if (config.db_url.empty()) {
        throw config_error("db_url is required for this command");
    }
    Workbench w{make_client(config), db::connect(config.db_url),
                prompt::TemplateStore::load_dir(config.prompts_dir),
                prompt::DocumentBundle::load(config.manual_path, config.memo_path), nullptr};
    if (!config.record_path.empty()) {
        w.recorder = std::make_shared<llm::Recorder>(config.record_path, config.record_overwrite);
        w.client.attach_recorder(w.recorder);
    }
    return w;
}

std::string request_string(const Json& j, const std::string& primary, const std::string& alias,
                           const std::string& path) {
    if (j.contains(primary) && j[primary].is_string()) return j[primary].get<std::string>();
    if (j.contains(alias) && j[alias].is_string()) return j[alias].get<std::string>();
    throw config_error("request file " + path + " is missing string field '" + primary + "'");
}

bench::FixtureBundle rebuild_bundle(const std::string& bundle_dir) {
    Json meta = read_json_file(bundle_dir + "/meta.json", "bundle metadata");
    bench::FixtureSpec spec;
    if (!meta.contains("style") || !meta.contains("seed") || !meta.contains("patient_count")) {
        throw config_error("bundle metadata " + bundle_dir +
                           "/meta.json must carry style, seed, and patient_count");
    }
    spec.style = bench::parse_style(meta["style"].get<std::string>());
    spec.seed = meta["seed"].get<std::uint64_t>();
    spec.patient_count = meta["patient_count"].get<int>();
    return bench::FixtureBundle::build(spec);
}

std::string write_report(const Json& report, const std::string& report_path) {
    if (report_path.empty()) throw config_error("evaluation needs a report output path");
    util::write_file(report_path, report.dump(2) + "\n");
    return report_path;
}

int effective_trials(int trials, std::size_t path_count) {
    if (path_count == 0) throw config_error("at least one prediction path is required");
    return trials > 0 ? trials : static_cast<int>(path_count);
}

std::string hours_text(double value) {
    std::string text = util::format_double(value);
    if (text.size() > 2 && text.substr(text.size() - 2) == ".0") {
        text = text.substr(0, text.size() - 2);
    }
    return text;
}

// Renders one feature's mapping selection for the integration prompt.
std::string render_selection(const std::string& feature, const bench::MappingItem& item) {
    std::vector<std::string> parts;
    switch (item.outcome) {
        case bench::MappingItem::Outcome::RowCodes:
            for (const auto& [code, name] : item.codes) parts.push_back("'" + code + "' (" + name + ")");
            return feature + ": codes " + util::join(parts, ", ");
        case bench::MappingItem::Outcome::NamesOnly:
            for (const auto& name : item.names) parts.push_back("'" + name + "'");
            return feature + ": names " + util::join(parts, ", ");
        case bench::MappingItem::Outcome::ColumnRefs:
            return feature + ": columns " + util::join(item.column_refs, ", ");
        case bench::MappingItem::Outcome::Absent:
            break;
    }
    return feature + ": none";
}

struct StreamCheck {
    bool ok = true;
    std::string violation;
};

StreamCheck check_event_stream(const db::QueryResult& result,
                               const std::set<std::string>& allowed_features,
                               const std::set<std::string>& cohort_stays) {
    StreamCheck check;
    auto fail = [&check](std::string why) {
        check.ok = false;
        check.violation = std::move(why);
        return check;
    };

    if (result.columns.size() != 4) {
        return fail("event stream must have 4 columns (stay_id, timestamp_offset, event_type, "
                    "value); got " +
                    std::to_string(result.columns.size()));
    }

    std::optional<std::string> prev_stay;
    double prev_offset = 0.0;
    for (std::size_t i = 0; i < result.rows.size(); ++i) {
        const auto& row = result.rows[i];
        const std::string stay = util::trim(row[0]);
        const std::string offset_text = util::trim(row[1]);
        const std::string event_type = util::trim(row[2]);

        std::optional<double> offset = util::parse_real(offset_text);
        if (offset_text == "NULL" || !offset) {
            return fail("row " + std::to_string(i + 1) + " has no usable time information: '" +
                        offset_text + "'");
        }
        if (!allowed_features.count(event_type)) {
            return fail("row " + std::to_string(i + 1) + " carries unmapped event type '" +
                        event_type + "'");
        }
        if (!cohort_stays.count(stay)) {
            return fail("row " + std::to_string(i + 1) + " references stay '" + stay +
                        "' outside the cohort");
        }
        if (prev_stay) {
            bool same_stay = stay == *prev_stay;
            if (same_stay && *offset < prev_offset) {
                return fail("rows are not sorted by timestamp_offset within stay '" + stay + "'");
            }
            if (!same_stay) {
                std::optional<long long> a = util::parse_int(*prev_stay);
                std::optional<long long> b = util::parse_int(stay);
                bool ordered = (a && b) ? *a <= *b : *prev_stay <= stay;
                if (!ordered) {
                    return fail("rows are not sorted by stay_id: '" + *prev_stay + "' precedes '" +
                                stay + "'");
                }
            }
        }
        prev_stay = stay;
        prev_offset = *offset;
    }
    return check;
}

}  // namespace

llm::Client make_client(const RunConfig& config) {
    if (config.backend == "replay") return llm::Client::replay(config.cassette_path);
    if (config.backend == "scripted") {
        return llm::Client::scripted(llm::make_rules_backend(config.scripted_rules_path));
    }
    if (config.backend == "live") return llm::Client::live(config.live);
    throw config_error("backend must be live, replay, or scripted; got '" + config.backend + "'");
}

Json BuildDbOutcome::to_json() const {
    return Json{{"bundle_dir", bundle_dir},
                {"db_path", db_path},
                {"database_name", database_name},
                {"table_count", table_count}};
}

BuildDbOutcome cmd_build_db(const std::string& style, std::uint64_t seed, int patient_count,
                            const std::string& target_dir, bool overwrite) {
    namespace fs = std::filesystem;
    if (target_dir.empty()) throw config_error("build needs a target directory");
    if (fs::exists(target_dir) && fs::is_directory(target_dir) && !fs::is_empty(target_dir) &&
        !overwrite) {
        throw config_error("target directory " + target_dir +
                           " is not empty; pass the overwrite flag to replace it");
    }

    bench::FixtureSpec spec;
    spec.style = bench::parse_style(style);
    spec.seed = seed;
    spec.patient_count = patient_count;

    bench::FixtureBundle bundle = bench::FixtureBundle::build(spec);
    bundle.write_dir(target_dir);
    const std::string db_path = target_dir + "/" + bundle.dataset.database_name + ".db";
    bundle.provision(db_path, overwrite);

    BuildDbOutcome out;
    out.bundle_dir = target_dir;
    out.db_path = db_path;
    out.database_name = bundle.dataset.database_name;
    out.table_count = bundle.dataset.tables.size();
    return out;
}

Json CfsaOutcome::to_json() const {
    return Json{{"final_sql", result.final_sql},
                {"schema_guideline", result.schema_guideline},
                {"schema_render", result.schema_render},
                {"header", result.header},
                {"row_count", result.rows.size()},
                {"rounds_used", result.rounds_used},
                {"retries_used", result.retries_used},
                {"sql_path", sql_path},
                {"csv_path", csv_path},
                {"transcript_path", transcript_path},
                {"summary_path", summary_path}};
}

cfsa::ClinicalRequest load_request(const std::string& path) {
    Json j = read_json_file(path, "request");
    if (!j.is_object()) throw config_error("request file " + path + " must be a JSON object");
    cfsa::ClinicalRequest request;
    request.cohort_selection = request_string(j, "cohort_selection", "cohort_text", path);
    request.feature_selection = request_string(j, "feature_selection", "feature_text", path);
    if (util::trim(request.cohort_selection).empty() ||
        util::trim(request.feature_selection).empty()) {
        throw config_error("request file " + path + " has an empty selection");
    }
    return request;
}

CfsaOutcome cmd_run_cfsa(const RunConfig& config, const cfsa::ClinicalRequest& request) {
    Workbench w = open_workbench(config);
    util::ensure_dir(config.out_dir);

    FeatureFormatSpec format_spec = FeatureFormatSpec::from_feature_text(request.feature_selection);

    CfsaOutcome out;
    out.sql_path = config.out_dir + "/cohort.sql";
    out.csv_path = config.out_dir + "/cohort.csv";
    out.transcript_path = config.out_dir + "/cfsa_transcript.jsonl";
    out.summary_path = config.out_dir + "/cfsa_summary.json";

    Transcript transcript = Transcript::to_file(out.transcript_path);

    cfsa::Budgets budgets = config.budgets;
    budgets.samples_per_column = config.samples_per_column;
    cfsa::CohortAgent agent(w.client, w.session, w.templates, w.documents, budgets);
    out.result = agent.run(request, format_spec, transcript);
    if (w.recorder) w.recorder->finish();

    util::write_file(out.sql_path, out.result.final_sql + "\n");
    cfsa::write_result_csv(out.result, out.csv_path);
    util::write_file(out.summary_path, out.to_json().dump(2) + "\n");
    return out;
}

Json CmaOutcome::to_json() const {
    return Json{{"mapping_path", mapping_path},
                {"transcript_path", transcript_path},
                {"summary_path", summary_path},
                {"feature_count", feature_count},
                {"failure_count", failure_count}};
}

std::vector<std::string> load_features(const std::string& path) {
    Json j = read_json_file(path, "feature list");
    const Json* list = nullptr;
    if (j.is_array()) {
        list = &j;
    } else if (j.is_object() && j.contains("features") && j["features"].is_array()) {
        list = &j["features"];
    } else {
        throw config_error("feature list file " + path +
                           " must be a JSON array or an object with a 'features' array");
    }
    std::vector<std::string> features;
    for (const Json& item : *list) {
        if (!item.is_string()) {
            throw config_error("feature list file " + path + " contains a non-string entry");
        }
        std::string name = util::trim(item.get<std::string>());
        if (!name.empty()) features.push_back(std::move(name));
    }
    if (features.empty()) throw config_error("feature list file " + path + " is empty");
    return features;
}

CmaOutcome cmd_run_cma(const RunConfig& config, const std::vector<std::string>& features) {
    if (features.empty()) throw config_error("feature list is empty");
    Workbench w = open_workbench(config);
    util::ensure_dir(config.out_dir);

    CmaOutcome out;
    out.mapping_path = config.out_dir + "/mapping.json";
    out.transcript_path = config.out_dir + "/cma_transcript.jsonl";
    out.summary_path = config.out_dir + "/cma_summary.json";
    out.feature_count = features.size();

    Transcript transcript = Transcript::to_file(out.transcript_path);

    cma::MatchingConfig matching = config.matching;
    matching.samples_per_column = config.samples_per_column;
    cma::MappingAgent agent(w.client, w.session, w.templates, w.documents, matching);

    Json root = Json::object();
    Json outcomes = Json::object();
    std::string last_failure;
    for (const std::string& feature : features) {
        transcript.log("feature_begin", {{"feature", feature}});
        try {
            cma::MappingResult result = agent.run(feature, transcript);
            root[feature] = result.to_json();
            outcomes[feature] = bench::MappingItem::outcome_name(result.item.outcome);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Config || e.kind() == ErrorKind::Environment ||
                e.kind() == ErrorKind::Internal) {
                throw;
            }
            out.failure_count++;
            last_failure = e.message();
            bench::MappingItem absent;
            Json failed = absent.to_json();
            failed["failed"] = true;
            failed["failure"] = e.message();
            root[feature] = std::move(failed);
            outcomes[feature] = "failed";
            transcript.log("failure", {{"feature", feature}, {"message", e.message()}});
        }
    }
    if (out.failure_count == features.size()) {
        throw agent_error("all " + std::to_string(features.size()) +
                          " features failed; last failure: " + last_failure);
    }
    if (w.recorder) w.recorder->finish();

    util::write_file(out.mapping_path, root.dump(2) + "\n");
    Json summary = out.to_json();
    summary["outcomes"] = std::move(outcomes);
    util::write_file(out.summary_path, summary.dump(2) + "\n");
    return out;
}

Json EvaluateOutcome::to_json() const {
    return Json{{"report_path", report_path},
                {"mean", stats.mean},
                {"stderr", stats.stderr_of_mean},
                {"failures", stats.failures},
                {"trials", stats.scores.size()}};
}

EvaluateOutcome cmd_evaluate_cohort(const std::string& bundle_dir, const std::string& request_name,
                                    const std::vector<std::string>& prediction_paths, int trials,
                                    const std::string& report_path) {
    bench::FixtureBundle bundle = rebuild_bundle(bundle_dir);

    const bench::CohortRequest* request = nullptr;
    std::vector<std::string> known;
    for (const auto& candidate : bundle.requests) {
        known.push_back(candidate.name);
        if (candidate.name == request_name) request = &candidate;
    }
    if (request == nullptr) {
        throw config_error("request '" + request_name + "' not in bundle; available: " +
                           util::join(known, ", "));
    }

    FeatureFormatSpec format_spec = FeatureFormatSpec::from_feature_text(request->feature_text);
    bench::CohortCriteria criteria = bench::CohortCriteria::from_json(request->criteria);
    bench::GoldCohort gold = bench::build_gold_cohort(bundle, criteria, format_spec);

    const int total = effective_trials(trials, prediction_paths.size());
    Json per_trial = Json::array();
    auto runner = [&](int index) -> std::optional<double> {
        Json entry = Json::object();
        entry["trial"] = index;
        if (index >= static_cast<int>(prediction_paths.size()) ||
            !util::file_exists(prediction_paths[index])) {
            entry["missing"] = true;
            if (index < static_cast<int>(prediction_paths.size())) {
                entry["path"] = prediction_paths[index];
            }
            per_trial.push_back(std::move(entry));
            return std::nullopt;
        }
        const std::string& path = prediction_paths[index];
        entry["path"] = path;
        std::vector<std::vector<std::string>> cells = util::csv_parse(util::read_file(path));
        std::vector<std::vector<std::string>> rows;
        if (!cells.empty()) {
            if (cells.front().size() != format_spec.column_count()) {
                throw config_error("prediction file " + path + " has " +
                                   std::to_string(cells.front().size()) +
                                   " columns but the request expects " +
                                   std::to_string(format_spec.column_count()) + " (" +
                                   util::join(format_spec.header(), ", ") + ")");
            }
            rows.assign(cells.begin() + 1, cells.end());
        }
        bench::CohortEvaluation evaluation = bench::evaluate_cohort(rows, gold, format_spec);
        Json detail = evaluation.to_json();
        for (auto it = detail.begin(); it != detail.end(); ++it) entry[it.key()] = it.value();
        per_trial.push_back(std::move(entry));
        return evaluation.f1;
    };
    bench::TrialStats stats = bench::run_trials(total, runner);

    Json report = Json::object();
    report["task"] = "cohort";
    report["bundle_dir"] = bundle_dir;
    report["request"] = request_name;
    report["gold_size"] = gold.stay_ids.size();
    report["summary"] = stats.to_json();
    report["per_trial"] = std::move(per_trial);

    EvaluateOutcome out;
    out.stats = std::move(stats);
    out.report = std::move(report);
    out.report_path = write_report(out.report, report_path);
    return out;
}

EvaluateOutcome cmd_evaluate_mapping(const std::string& bundle_dir,
                                     const std::vector<std::string>& prediction_paths, int trials,
                                     const std::string& report_path) {
    const std::string gold_path = bundle_dir + "/gold/mapping.json";
    bench::MappingGold gold = bench::MappingGold::from_json(read_json_file(gold_path, "mapping gold"));

    const int total = effective_trials(trials, prediction_paths.size());
    Json per_trial = Json::array();
    auto runner = [&](int index) -> std::optional<double> {
        Json entry = Json::object();
        entry["trial"] = index;
        if (index >= static_cast<int>(prediction_paths.size()) ||
            !util::file_exists(prediction_paths[index])) {
            entry["missing"] = true;
            if (index < static_cast<int>(prediction_paths.size())) {
                entry["path"] = prediction_paths[index];
            }
            per_trial.push_back(std::move(entry));
            return std::nullopt;
        }
        const std::string& path = prediction_paths[index];
        entry["path"] = path;
        Json predicted_json = read_json_file(path, "mapping prediction");
        if (!predicted_json.is_object()) {
            throw config_error("mapping prediction file " + path +
                               " must be a JSON object keyed by feature name");
        }
        std::map<std::string, bench::MappingItem> predicted;
        for (auto it = predicted_json.begin(); it != predicted_json.end(); ++it) {
            try {
                predicted[it.key()] = bench::MappingItem::from_json(it.value());
            } catch (const Error& e) {
                throw config_error("mapping prediction file " + path + ", feature '" + it.key() +
                                   "': " + e.message());
            }
        }
        bench::MappingEvaluation evaluation = bench::evaluate_mapping(predicted, gold);
        Json detail = evaluation.to_json();
        for (auto it = detail.begin(); it != detail.end(); ++it) entry[it.key()] = it.value();
        per_trial.push_back(std::move(entry));
        return evaluation.micro_f1;
    };
    bench::TrialStats stats = bench::run_trials(total, runner);

    Json report = Json::object();
    report["task"] = "mapping";
    report["bundle_dir"] = bundle_dir;
    report["gold_features"] = gold.features.size();
    report["summary"] = stats.to_json();
    report["per_trial"] = std::move(per_trial);

    EvaluateOutcome out;
    out.stats = std::move(stats);
    out.report = std::move(report);
    out.report_path = write_report(out.report, report_path);
    return out;
}

Json IntegrateOutcome::to_json() const {
    Json j{{"events_path", events_path},
           {"transcript_path", transcript_path},
           {"summary_path", summary_path},
           {"row_count", row_count},
           {"retried", retried}};
    if (!warning.empty()) j["warning"] = warning;
    return j;
}

IntegrateOutcome cmd_integrate(const RunConfig& config, const std::string& cohort_summary_path,
                               const std::string& mapping_path,
                               const std::vector<std::string>& features, double time_min_hours,
                               double time_max_hours) {
    if (features.empty()) throw config_error("integration needs at least one feature");
    if (time_max_hours < time_min_hours) {
        throw config_error("time range is inverted: " + hours_text(time_min_hours) + " .. " +
                           hours_text(time_max_hours));
    }

    Json cohort_summary = read_json_file(cohort_summary_path, "cohort summary");
    if (!cohort_summary.contains("final_sql") || !cohort_summary["final_sql"].is_string()) {
        throw config_error("cohort summary " + cohort_summary_path + " is missing final_sql");
    }
    const std::string cfsa_sql = cohort_summary["final_sql"].get<std::string>();
    const std::string cfsa_guideline = cohort_summary.value("schema_guideline", std::string{});
    const std::string cohort_csv = cohort_summary.value("csv_path", std::string{});
    if (cohort_csv.empty() || !util::file_exists(cohort_csv)) {
        throw config_error("cohort summary " + cohort_summary_path +
                           " does not point at an existing cohort CSV");
    }

    std::set<std::string> cohort_stays;
    {
        std::vector<std::vector<std::string>> cells = util::csv_parse(util::read_file(cohort_csv));
        for (std::size_t i = 1; i < cells.size(); ++i) {
            if (!cells[i].empty()) cohort_stays.insert(util::trim(cells[i][0]));
        }
    }

    Json mapping = read_json_file(mapping_path, "mapping output");
    if (!mapping.is_object()) {
        throw config_error("mapping output " + mapping_path + " must be a JSON object");
    }
    std::vector<std::string> selections;
    std::string cma_linking;
    std::string cma_guideline;
    for (const std::string& feature : features) {
        if (!mapping.contains(feature)) {
            throw config_error("feature '" + feature + "' is not present in " + mapping_path);
        }
        const Json& entry = mapping[feature];
        bench::MappingItem item = bench::MappingItem::from_json(entry);
        if (entry.value("failed", false) || item.outcome == bench::MappingItem::Outcome::Absent) {
            throw config_error("feature '" + feature + "' has no usable mapping in " + mapping_path);
        }
        selections.push_back(render_selection(feature, item));
        if (cma_linking.empty()) cma_linking = entry.value("schema_linking", std::string{});
        if (cma_guideline.empty()) cma_guideline = entry.value("schema_guideline", std::string{});
    }

    Workbench w = open_workbench(config);
    util::ensure_dir(config.out_dir);

    IntegrateOutcome out;
    out.events_path = config.out_dir + "/events.csv";
    out.transcript_path = config.out_dir + "/integration_transcript.jsonl";
    out.summary_path = config.out_dir + "/integration_summary.json";

    Transcript transcript = Transcript::to_file(out.transcript_path);

    prompt::Bindings bindings;
    bindings["user_requested_event_stream_dataset"] =
        "an event stream table with columns (stay_id, timestamp_offset, event_type, value), one "
        "row per observed measurement, sorted by stay_id and then timestamp_offset";
    bindings["cma_schema_linking"] = cma_linking.empty() ? "None" : cma_linking;
    bindings["cma_schema_guideline"] = cma_guideline.empty() ? "None" : cma_guideline;
    bindings["selected_mapping_codes"] = util::join(selections, "; ");
    bindings["target_time_range"] = "between " + hours_text(time_min_hours) + " and " +
                                    hours_text(time_max_hours) + " hours after ICU admission";
    bindings["cfsa_generated_sql"] = cfsa_sql;
    bindings["cfsa_schema_guideline"] = cfsa_guideline.empty() ? "None" : cfsa_guideline;
    bindings["Target_Feature"] = util::join(features, ", ");
    bindings["final_output_columns"] = "stay_id, timestamp_offset, event_type, value";
    const std::string base_prompt = w.templates.render("integration", bindings);

    std::set<std::string> allowed(features.begin(), features.end());
    std::string prompt_text = base_prompt;
    std::optional<db::QueryResult> stream;
    for (int attempt = 0; attempt < 2; ++attempt) {
        out.retried = attempt > 0;
        llm::CompletionRequest request;
        request.template_id = "integration";
        request.prompt_text = prompt_text;
        request.temperature = 0.0;
        request.round_index = 0;
        const std::string completion = w.client.complete(request);
        transcript.log("llm_call", {{"template_id", "integration"},
                                    {"attempt", attempt},
                                    {"prompt", prompt_text},
                                    {"completion", completion}});

        std::string failure;
        std::string sql;
        std::optional<std::string> section = parse::parse_tagged_section(completion, "sql_query");
        if (!section) {
            failure = "completion is missing the <sql_query> section";
        } else {
            std::vector<std::string> queries = parse::parse_sql_queries(*section, 1);
            if (queries.empty()) {
                failure = "the <sql_query> section contains no SQL statement";
            } else {
                sql = queries.front();
            }
        }

        if (failure.empty()) {
            transcript.log("execute", {{"sql", sql}});
            db::QueryOutcome outcome = db::execute_final_all(w.session, sql);
            if (!outcome.ok()) {
                failure = outcome.error_message;
            } else {
                StreamCheck check = check_event_stream(*outcome.result, allowed, cohort_stays);
                if (!check.ok) {
                    failure = check.violation;
                } else {
                    stream = std::move(outcome.result);
                }
            }
        }

        if (stream) break;
        const std::string logged_sql = sql.empty() ? "(none)" : sql;
        transcript.log("integration_retry",
                       {{"attempt", attempt}, {"sql", logged_sql}, {"message", failure}});
        if (attempt == 1) {
            transcript.log("failure", {{"phase", "integrate"}, {"message", failure}});
            throw agent_error("event stream integration failed after retry: " + failure);
        }
        prompt_text = base_prompt + "\n[Failed SQL]\n" + logged_sql + "\n[Error Feedback]\n" +
                      failure + "\n";
    }

    if (w.recorder) w.recorder->finish();

    std::string body = util::csv_render_row({"stay_id", "timestamp_offset", "event_type", "value"});
    body += "\n";
    for (const auto& row : stream->rows) body += util::csv_render_row(row) + "\n";
    util::write_file(out.events_path, body);
    out.row_count = stream->rows.size();
    if (out.row_count == 0) {
        out.warning = "event stream is empty for the requested time range";
    }
    transcript.log("final", {{"rows", out.row_count}, {"retried", out.retried}});
    util::write_file(out.summary_path, out.to_json().dump(2) + "\n");
    return out;
}

Json RecordOutcome::to_json() const {
    return Json{{"cassette_path", cassette_path},
                {"task", task},
                {"completions", completions},
                {"result", inner}};
}

RecordOutcome cmd_record(const RunConfig& config, const std::string& scenario_path) {
    if (config.backend != "live") {
        throw config_error("record requires the live backend; got '" + config.backend + "'");
    }
    if (config.cassette_path.empty()) {
        throw config_error("record needs a cassette path to write");
    }
    Json scenario = read_json_file(scenario_path, "scenario");
    if (!scenario.is_object() || !scenario.contains("task") || !scenario["task"].is_string()) {
        throw config_error("scenario file " + scenario_path + " must carry a string 'task'");
    }

    RunConfig recording = config;
    recording.record_path = config.cassette_path;

    RecordOutcome out;
    out.cassette_path = config.cassette_path;
    out.task = scenario["task"].get<std::string>();

    if (out.task == "cfsa") {
        if (!scenario.contains("request")) {
            throw config_error("cfsa scenario needs a 'request' object");
        }
        cfsa::ClinicalRequest request;
        request.cohort_selection =
            request_string(scenario["request"], "cohort_selection", "cohort_text", scenario_path);
        request.feature_selection =
            request_string(scenario["request"], "feature_selection", "feature_text", scenario_path);
        out.inner = cmd_run_cfsa(recording, request).to_json();
    } else if (out.task == "cma") {
        if (!scenario.contains("features") || !scenario["features"].is_array()) {
            throw config_error("cma scenario needs a 'features' array");
        }
        std::vector<std::string> features;
        for (const Json& item : scenario["features"]) {
            if (item.is_string()) features.push_back(item.get<std::string>());
        }
        out.inner = cmd_run_cma(recording, features).to_json();
    } else {
        throw config_error("unknown scenario task '" + out.task + "'; expected cfsa or cma");
    }

    for (const std::string& line : util::split(util::read_file(config.cassette_path), '\n')) {
        if (line.empty()) continue;
        Json entry = Json::parse(line, nullptr, false);
        if (!entry.is_discarded() && entry.value("kind", std::string{}) == "entry") {
            out.completions++;
        }
    }
    return out;
}

}  // namespace emrkit::run
