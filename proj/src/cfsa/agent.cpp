#include "emrkit/cfsa/agent.hpp"

#include <set>
#include <utility>

#include "emrkit/error.hpp"
#include "emrkit/util.hpp"

namespace emrkit::cfsa {

namespace {

constexpr const char* kNone = "None";

std::string or_none(const std::string& text) { return text.empty() ? kNone : text; }

std::string normalize_query(const std::string& sql) { return util::normalize_ws_lower(sql); }

std::string render_observation_dict(const std::vector<std::pair<std::string, std::string>>& pairs) {
    if (pairs.empty()) return kNone;
    Json dict = Json::object();
    for (const auto& [query, output] : pairs) dict[query] = output;
    return dict.dump();
}

}  // namespace

std::string SchemaGuideline::render() const {
    if (mapping_text.empty()) return feature_text;
    if (feature_text.empty()) return mapping_text;
    return mapping_text + "\n" + feature_text;
}

struct CohortAgent::RunState {
    const ClinicalRequest* request = nullptr;
    const FeatureFormatSpec* format_spec = nullptr;
    run::Transcript* transcript = nullptr;

    db::SchemaSnapshot snapshot;
    std::string original_schema;
    std::string foreign_keys;

    parse::LinkedSchema linked;
    SchemaGuideline guideline;

    std::vector<ObservationRound> rounds;
    std::set<std::string> issued;
    std::vector<std::pair<std::string, std::string>> history;

    std::optional<ErrorFeedback> feedback;
    int rounds_used = 0;
    int retries_used = 0;

    std::string selected_with_guideline() const {
        return linked.render_text() + "[Schema Guideline]: " + guideline.render();
    }

    std::string mapping_partition() const {
        parse::LinkedSchema subset;
        for (const auto* table : linked.mapping_tables()) subset.tables.push_back(*table);
        std::string text = subset.render_text();
        return or_none(util::trim(text));
    }

    std::string feedback_message() const { return feedback ? feedback->message : kNone; }
    std::string feedback_sql() const { return feedback ? feedback->failed_sql : kNone; }
};

CohortAgent::CohortAgent(llm::Client& client, db::Session& session,
                         const prompt::TemplateStore& templates,
                         const prompt::DocumentBundle& documents, Budgets budgets)
    : client_(client),
      session_(session),
      templates_(templates),
      documents_(documents),
      budgets_(budgets) {}

std::string CohortAgent::call_llm(RunState& state, const std::string& template_id,
                                  const prompt::Bindings& bindings, int round_index,
                                  const std::string& appended_context) {
    llm::CompletionRequest request;
    request.template_id = template_id;
    request.prompt_text = templates_.render(template_id, bindings) + appended_context;
    request.round_index = round_index;
    request.temperature = round_index > 0 ? llm::temperature_for_round(round_index) : 0.0;
    std::string completion = client_.complete(request);
    Json event;
    event["template_id"] = template_id;
    event["round_index"] = round_index;
    event["temperature"] = request.temperature;
    event["prompt"] = request.prompt_text;
    event["completion"] = completion;
    state.transcript->log("llm_call", std::move(event));
    return completion;
}

void CohortAgent::link_schema(RunState& state, const std::optional<std::string>& feedback) {
    prompt::Bindings bindings;
    bindings["Schema_information"] = state.original_schema;
    bindings["Evaluation_Memo"] = or_none(documents_.evaluation_memo);
    bindings["Database_Manual"] = or_none(documents_.database_manual);
    bindings["Cohort_Selection"] = state.request->cohort_selection;
    bindings["Feature_Selection"] = state.request->feature_selection;
    std::string context;
    if (feedback.has_value()) context = "\n[Error Feedback]: " + *feedback + "\n";

    auto linked_call = [&](const std::string& template_id) {
        for (int attempt = 1;; attempt++) {
            std::string completion = call_llm(state, template_id, bindings, 0, context);
            try {
                return parse::parse_schema_linking(completion);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::Malformed || attempt >= 2) {
                    state.transcript->log("failure", {{"phase", "link_schema"},
                                                      {"template_id", template_id},
                                                      {"error", e.message()}});
                    throw agent_error("schema linking did not produce a parseable schema (" +
                                      template_id + "): " + e.message());
                }
                state.transcript->log("malformed_retry",
                                      {{"template_id", template_id}, {"error", e.message()}});
            }
        }
    };

    parse::SchemaLinkingResult mapping = linked_call("cfsa_mapping_schema_linking");
    for (auto& table : mapping.schema.tables) table.is_mapping = true;
    parse::SchemaLinkingResult feature = linked_call("cfsa_feature_schema_linking");

    state.linked.tables = mapping.schema.tables;
    state.linked.tables.insert(state.linked.tables.end(), feature.schema.tables.begin(),
                               feature.schema.tables.end());
    state.guideline.mapping_text = mapping.guideline;
    state.guideline.feature_text = feature.guideline;

    Json event;
    event["with_feedback"] = feedback.has_value();
    event["mapping_tables"] = state.linked.mapping_tables().size();
    event["feature_tables"] = state.linked.feature_tables().size();
    event["guideline"] = state.guideline.render();
    event["schema"] = state.linked.render_text();
    state.transcript->log("link_schema", std::move(event));
}

std::vector<std::string> CohortAgent::assess_sufficiency(RunState& state, int round_index) {
    prompt::Bindings bindings;
    bindings["Original_Schema"] = state.original_schema;
    bindings["Selected_Schema"] = state.selected_with_guideline();
    bindings["Target_Features"] = state.request->feature_selection;
    bindings["Cohort_Selection"] = state.request->cohort_selection;
    bindings["Mapping_Table"] = state.mapping_partition();
    bindings["Foreign_Key"] = state.foreign_keys;
    bindings["Previous_Observation"] = render_observation_dict(state.history);
    bindings["Error_Feedback"] = state.feedback_message();
    bindings["Max_SQL_Search_At_Once"] = std::to_string(budgets_.max_queries_per_round);

    bool budget_violated = false;
    for (int attempt = 1;; attempt++) {
        std::string completion = call_llm(state, "cfsa_sql_sufficiency", bindings, round_index);
        try {
            std::optional<std::string> output = parse::parse_tagged_section(completion, "output");
            if (!output.has_value()) throw malformed_error("sufficiency output section is missing");
            std::string verdict =
                parse::parse_classification(*output, {"need more information", "correct"});
            if (verdict == "correct") {
                state.transcript->log("assess", {{"round_index", round_index}, {"verdict", "correct"}});
                return {};
            }
            std::optional<std::string> sql_section =
                parse::parse_tagged_section(completion, "SQL queries");
            if (!sql_section.has_value()) {
                throw malformed_error("need-more-information verdict without a SQL queries section");
            }
            std::vector<std::string> queries;
            if (budget_violated) {
                queries = parse::parse_sql_queries(*sql_section, 0);
                if (static_cast<int>(queries.size()) > budgets_.max_queries_per_round) {
                    state.transcript->log(
                        "probe_trim", {{"round_index", round_index},
                                       {"parsed", queries.size()},
                                       {"kept", budgets_.max_queries_per_round}});
                    queries.resize(static_cast<size_t>(budgets_.max_queries_per_round));
                }
            } else {
                queries = parse::parse_sql_queries(*sql_section, budgets_.max_queries_per_round);
            }
            if (queries.empty()) {
                throw malformed_error("need-more-information verdict with no SQL queries");
            }

            std::vector<std::string> fresh;
            std::set<std::string> batch;
            for (const auto& q : queries) {
                std::string key = normalize_query(q);
                if (state.issued.count(key) || batch.count(key)) {
                    state.transcript->log("probe_duplicate_dropped",
                                          {{"round_index", round_index}, {"query", q}});
                    continue;
                }
                batch.insert(key);
                fresh.push_back(q);
            }
            state.transcript->log("assess", {{"round_index", round_index},
                                             {"verdict", "need more information"},
                                             {"queries", fresh}});
            return fresh;
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Budget && !budget_violated) {
                budget_violated = true;
                state.transcript->log("probe_budget_retry",
                                      {{"round_index", round_index}, {"error", e.message()}});
                continue;
            }
            if (e.kind() == ErrorKind::Malformed && attempt < 2) {
                state.transcript->log("malformed_retry", {{"template_id", "cfsa_sql_sufficiency"},
                                                          {"error", e.message()}});
                continue;
            }
            // An unparseable verdict after retrying is treated as sufficient:
            // attempting generation beats aborting the run.
            state.transcript->log("assess", {{"round_index", round_index},
                                             {"verdict", "correct"},
                                             {"fallback", e.message()}});
            return {};
        }
    }
}

ObservationRound CohortAgent::run_observation_round(RunState& state,
                                                    std::vector<std::string> queries,
                                                    int round_index) {
    ObservationRound round;
    round.round_index = round_index;
    round.temperature = llm::temperature_for_round(round_index);
    round.queries = std::move(queries);
    for (const auto& sql : round.queries) {
        db::QueryOutcome outcome = db::execute_observation(session_, sql, 20);
        std::string output = outcome.ok() ? outcome.result->render_text() : outcome.error_message;
        round.outputs.push_back(output);
        state.history.emplace_back(sql, output);
        state.issued.insert(normalize_query(sql));
    }
    state.rounds_used++;
    Json event;
    event["round_index"] = round_index;
    event["temperature"] = round.temperature;
    event["queries"] = round.queries;
    event["outputs"] = round.outputs;
    state.transcript->log("observation", std::move(event));
    return round;
}

void CohortAgent::check_data_sufficiency(RunState& state, ObservationRound& round) {
    std::vector<std::pair<std::string, std::string>> previous(
        state.history.begin(), state.history.end() - static_cast<long>(round.queries.size()));
    std::vector<std::pair<std::string, std::string>> current(
        state.history.end() - static_cast<long>(round.queries.size()), state.history.end());

    prompt::Bindings bindings;
    bindings["Original_Schema"] = state.original_schema;
    bindings["Selected_Schema"] = state.selected_with_guideline();
    bindings["Target_Features"] = state.request->feature_selection;
    bindings["Cohort_Selection"] = state.request->cohort_selection;
    bindings["Previous_Observation"] = render_observation_dict(previous);
    bindings["SQL_Observation"] = render_observation_dict(current);

    for (int attempt = 1;; attempt++) {
        std::string completion =
            call_llm(state, "cfsa_data_sufficiency", bindings, round.round_index);
        try {
            std::optional<std::string> output = parse::parse_tagged_section(completion, "output");
            if (!output.has_value()) throw malformed_error("data sufficiency output section is missing");
            std::string verdict = parse::parse_classification(*output, {"Add info", "No info"});
            if (verdict == "No info") {
                state.transcript->log("data_sufficiency",
                                      {{"round_index", round.round_index}, {"verdict", "No info"}});
                return;
            }
            size_t close = completion.find("</output>");
            std::string tail = completion.substr(close + std::string("</output>").size());
            std::optional<std::string> gained = parse::parse_tagged_section(tail, "Add info");
            if (!gained.has_value() || gained->empty()) {
                throw malformed_error("Add info verdict without gained-information content");
            }
            round.add_info = true;
            round.gained = *gained;
            state.transcript->log("data_sufficiency", {{"round_index", round.round_index},
                                                       {"verdict", "Add info"},
                                                       {"gained", *gained}});
            update_schema(state, *gained, round.round_index);
            return;
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Malformed && attempt < 2) {
                state.transcript->log("malformed_retry", {{"template_id", "cfsa_data_sufficiency"},
                                                          {"error", e.message()}});
                continue;
            }
            state.transcript->log("data_sufficiency", {{"round_index", round.round_index},
                                                       {"verdict", "No info"},
                                                       {"fallback", e.message()}});
            return;
        }
    }
}

void CohortAgent::update_schema(RunState& state, const std::string& gained, int round_index) {
    prompt::Bindings bindings;
    bindings["Selected_Schema"] = state.linked.render_text();
    bindings["Schema_Guideline"] = state.guideline.render();
    bindings["Additional_Information"] = gained;
    bindings["Target_Features"] = state.request->feature_selection;
    bindings["Cohort_Selection"] = state.request->cohort_selection;

    std::string completion = call_llm(state, "cfsa_schema_update", bindings, round_index);
    try {
        std::optional<std::string> guideline =
            parse::parse_tagged_section(completion, "edited schema guideline");
        std::optional<std::string> schema = parse::parse_tagged_section(completion, "edited schema");
        if (!guideline.has_value() || guideline->empty()) {
            throw malformed_error("edited schema guideline section is missing or empty");
        }
        if (!schema.has_value() || schema->empty()) {
            throw malformed_error("edited schema section is missing or empty");
        }
        parse::SchemaLinkingResult parsed = parse::parse_schema_linking(*schema);
        state.linked = parsed.schema;
        state.guideline.mapping_text.clear();
        state.guideline.feature_text = *guideline;
        state.transcript->log("schema_update", {{"round_index", round_index},
                                                {"applied", true},
                                                {"guideline", *guideline},
                                                {"schema", state.linked.render_text()}});
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::Malformed) throw;
        state.transcript->log("schema_update",
                              {{"round_index", round_index}, {"applied", false}, {"error", e.message()}});
    }
}

bool CohortAgent::observation_loop(RunState& state) {
    while (true) {
        if (state.rounds_used >= budgets_.max_rounds) {
            state.transcript->log("forced_generation", {{"rounds_used", state.rounds_used}});
            return false;
        }
        int round_index = state.rounds_used + 1;
        std::vector<std::string> queries = assess_sufficiency(state, round_index);
        if (queries.empty()) return true;
        ObservationRound round = run_observation_round(state, std::move(queries), round_index);
        state.rounds.push_back(round);
        check_data_sufficiency(state, state.rounds.back());
    }
}

std::string CohortAgent::generate_sql(RunState& state) {
    prompt::Bindings bindings;
    bindings["Cohort_Selection"] = state.request->cohort_selection;
    bindings["Target_Features"] = state.request->feature_selection;
    bindings["Selected_Schema"] = state.linked.render_text();
    bindings["Schema_Guideline"] = state.guideline.render();
    bindings["Previous_Failed_SQL"] = state.feedback_sql();
    bindings["Error_Feedback"] = state.feedback_message();

    while (true) {
        std::string completion = call_llm(state, "cfsa_sql_generation", bindings, 0);
        try {
            std::optional<std::string> section = parse::parse_tagged_section(completion, "SQL query");
            if (!section.has_value()) throw malformed_error("SQL query section is missing");
            std::vector<std::string> statements = parse::parse_sql_queries(*section, 1);
            if (statements.empty()) throw malformed_error("SQL query section is empty");
            state.transcript->log("generate_sql", {{"sql", statements[0]}});
            return statements[0];
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Malformed && e.kind() != ErrorKind::Budget) throw;
            state.retries_used++;
            state.transcript->log("generate_malformed",
                                  {{"retries_used", state.retries_used}, {"error", e.message()}});
            if (state.retries_used >= budgets_.max_retries) {
                state.transcript->log("failure", {{"phase", "generate_sql"},
                                                  {"rounds_used", state.rounds_used},
                                                  {"retries_used", state.retries_used},
                                                  {"error", e.message()}});
                throw agent_error("SQL generation exhausted the retry budget: " + e.message());
            }
        }
    }
}

CohortResult CohortAgent::run(const ClinicalRequest& request, const FeatureFormatSpec& format_spec,
                              run::Transcript& transcript) {
    RunState state;
    state.request = &request;
    state.format_spec = &format_spec;
    state.transcript = &transcript;

    state.snapshot = db::introspect_schema(session_, budgets_.samples_per_column);
    state.original_schema = state.snapshot.render_schema_text();
    state.foreign_keys = state.snapshot.render_foreign_keys();
    transcript.log("introspect", {{"database", state.snapshot.database_name},
                                  {"tables", state.snapshot.tables.size()}});

    link_schema(state, std::nullopt);

    bool observe_next = true;
    while (true) {
        if (observe_next) observation_loop(state);
        std::string sql = generate_sql(state);
        db::QueryOutcome outcome = db::execute_final_all(session_, sql);
        db::ResultStatus status = db::classify_result(outcome, format_spec);
        Json exec_event;
        exec_event["sql"] = sql;
        exec_event["status"] = status.describe();
        exec_event["rows"] = outcome.ok() ? outcome.result->rows.size() : 0;
        transcript.log("execute", std::move(exec_event));

        if (status.correct()) {
            CohortResult result;
            result.final_sql = sql;
            result.header = format_spec.header();
            result.rows = outcome.result->rows;
            result.rounds_used = state.rounds_used;
            result.retries_used = state.retries_used;
            result.schema_render = state.linked.render_text();
            result.schema_guideline = state.guideline.render();
            transcript.log("final", {{"rows", result.rows.size()},
                                     {"rounds_used", state.rounds_used},
                                     {"retries_used", state.retries_used}});
            return result;
        }

        state.retries_used++;
        std::string feedback_text =
            status.kind == db::ResultStatus::Kind::ExecutionError ? status.message : status.describe();
        state.feedback = ErrorFeedback{sql, feedback_text};

        if (state.retries_used >= budgets_.max_retries) {
            transcript.log("failure", {{"phase", "execute"},
                                       {"rounds_used", state.rounds_used},
                                       {"retries_used", state.retries_used},
                                       {"error", feedback_text}});
            throw agent_error("cohort extraction failed after " +
                              std::to_string(state.retries_used) + " retries: " + feedback_text);
        }

        if (status.kind == db::ResultStatus::Kind::ExecutionError) {
            prompt::Bindings bindings;
            bindings["Selected_Schema"] = state.linked.render_text();
            bindings["Schema_Guideline"] = state.guideline.render();
            bindings["Cohort_Selection"] = request.cohort_selection;
            bindings["Target_Features"] = request.feature_selection;
            bindings["Failed_SQL"] = sql;
            bindings["Error_Feedback"] = status.message;

            parse::ErrorClass cls = parse::ErrorClass::WrongSchema;
            for (int attempt = 1; attempt <= 2; attempt++) {
                std::string completion = call_llm(state, "cfsa_error_feedback", bindings, 0);
                try {
                    std::optional<std::string> section =
                        parse::parse_tagged_section(completion, "error class");
                    cls = parse::parse_error_class(section.has_value() ? *section : completion);
                    break;
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::Malformed) throw;
                    state.transcript->log("malformed_retry", {{"template_id", "cfsa_error_feedback"},
                                                              {"error", e.message()}});
                    // After a second unparseable classification the schema
                    // route is taken; it subsumes the syntax route.
                }
            }
            bool syntax = cls == parse::ErrorClass::SyntaxError;
            transcript.log("classify_error",
                           {{"class", syntax ? "syntax error" : "wrong schema"},
                            {"retries_used", state.retries_used}});
            if (syntax) {
                transcript.log("route", {{"to", "generate_sql"}});
                observe_next = false;
            } else {
                transcript.log("route", {{"to", "link_schema"}});
                link_schema(state, feedback_text);
                observe_next = true;
            }
        } else {
            transcript.log("route", {{"to", "link_schema"},
                                     {"class", "wrong schema"},
                                     {"classifier_call", false},
                                     {"status", status.describe()}});
            link_schema(state, feedback_text);
            observe_next = true;
        }
    }
}

void write_result_csv(const CohortResult& result, const std::string& path) {
    std::string body = util::csv_render_row(result.header) + "\n";
    for (const auto& row : result.rows) body += util::csv_render_row(row) + "\n";
    util::write_file(path, body);
}

}  // namespace emrkit::cfsa
