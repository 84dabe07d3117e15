#include "emrkit/cma/agent.hpp"

#include <cctype>
#include <set>
#include <utility>

#include "emrkit/error.hpp"
#include "emrkit/util.hpp"

namespace emrkit::cma {

namespace {

constexpr const char* kNone = "None";

std::string or_none(const std::string& text) { return text.empty() ? kNone : text; }

std::string squash_alnum_lower(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    return out;
}

std::string join_guidelines(const std::string& mapping, const std::string& feature) {
    if (mapping.empty()) return feature;
    if (feature.empty()) return mapping;
    return mapping + "\n" + feature;
}

std::string render_partition(const parse::LinkedSchema& linked, bool mapping) {
    parse::LinkedSchema subset;
    for (const auto& table : linked.tables) {
        if (table.is_mapping == mapping) subset.tables.push_back(table);
    }
    return or_none(util::trim(subset.render_text()));
}

std::string render_candidates(const std::vector<parse::CandidateTuple>& tuples, bool bracketed) {
    std::vector<std::string> parts;
    parts.reserve(tuples.size());
    for (const auto& t : tuples) parts.push_back(t.render());
    std::string body = util::join(parts, ", ");
    return bracketed ? "[" + body + "]" : body;
}

}  // namespace

bool literal_name_match(const std::string& feature, const std::string& column_name) {
    std::string needle = squash_alnum_lower(feature);
    std::string haystack = squash_alnum_lower(column_name);
    if (needle.empty()) return false;
    return haystack.find(needle) != std::string::npos;
}

void MatchingConfig::validate() const {
    if (pass1_threshold < 0 || user_threshold > 100 || pass1_threshold > user_threshold) {
        throw config_error("matching thresholds must satisfy 0 <= pass1 <= user <= 100, got " +
                           std::to_string(pass1_threshold) + " and " +
                           std::to_string(user_threshold));
    }
    if (batch_size < 1) {
        throw config_error("matching batch size must be positive, got " + std::to_string(batch_size));
    }
    if (max_listing_retries < 1) {
        throw config_error("candidate listing needs at least one attempt, got " +
                           std::to_string(max_listing_retries));
    }
    if (samples_per_column < 1) {
        throw config_error("samples_per_column must be positive, got " +
                           std::to_string(samples_per_column));
    }
}

Json MappingResult::to_json() const {
    Json j = item.to_json();
    Json scores = Json::array();
    for (const auto& sc : retained) {
        scores.push_back(Json::array({sc.tuple.render(), sc.score}));
    }
    j["scores"] = std::move(scores);
    j["schema_linking"] = schema_render;
    j["schema_guideline"] = schema_guideline;
    return j;
}

struct MappingAgent::RunState {
    std::string feature;
    run::Transcript* transcript = nullptr;

    db::SchemaSnapshot snapshot_defs;      // 3 samples per column
    db::SchemaSnapshot snapshot_features;  // 10 samples per column

    parse::LinkedSchema linked;
    std::string mapping_guideline;
    std::string feature_guideline;

    std::string guideline() const { return join_guidelines(mapping_guideline, feature_guideline); }
};

MappingAgent::MappingAgent(llm::Client& client, db::Session& session,
                           const prompt::TemplateStore& templates,
                           const prompt::DocumentBundle& documents, MatchingConfig config)
    : client_(client),
      session_(session),
      templates_(templates),
      documents_(documents),
      config_(config) {}

std::string MappingAgent::call_llm(RunState& state, const std::string& template_id,
                                   const prompt::Bindings& bindings) {
    llm::CompletionRequest request;
    request.template_id = template_id;
    request.prompt_text = templates_.render(template_id, bindings);
    std::string completion = client_.complete(request);
    Json event;
    event["template_id"] = template_id;
    event["prompt"] = request.prompt_text;
    event["completion"] = completion;
    state.transcript->log("llm_call", std::move(event));
    return completion;
}

void MappingAgent::link_schema(RunState& state) {
    auto linked_call = [&](const std::string& template_id, const std::string& schema_text) {
        prompt::Bindings bindings;
        bindings["Schema_information"] = schema_text;
        bindings["Evaluation_Memo"] = or_none(documents_.evaluation_memo);
        bindings["Database_Manual"] = or_none(documents_.database_manual);
        bindings["Feature_Selection"] = state.feature;
        for (int attempt = 1;; attempt++) {
            std::string completion = call_llm(state, template_id, bindings);
            try {
                return parse::parse_schema_linking(completion);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::Malformed || attempt >= 2) {
                    state.transcript->log("failure", {{"phase", "link_schema"},
                                                      {"template_id", template_id},
                                                      {"error", e.message()}});
                    throw agent_error("mapping schema linking did not produce a parseable schema (" +
                                      template_id + "): " + e.message());
                }
                state.transcript->log("malformed_retry",
                                      {{"template_id", template_id}, {"error", e.message()}});
            }
        }
    };

    parse::SchemaLinkingResult mapping =
        linked_call("cma_mapping_schema_linking", state.snapshot_defs.render_schema_text());
    for (auto& table : mapping.schema.tables) table.is_mapping = true;
    parse::SchemaLinkingResult feature =
        linked_call("cma_feature_schema_linking", state.snapshot_features.render_schema_text());

    state.linked.tables = mapping.schema.tables;
    state.linked.tables.insert(state.linked.tables.end(), feature.schema.tables.begin(),
                               feature.schema.tables.end());
    state.mapping_guideline = mapping.guideline;
    state.feature_guideline = feature.guideline;

    state.transcript->log("link_schema",
                          {{"mapping_tables", state.linked.mapping_tables().size()},
                           {"feature_tables", state.linked.feature_tables().size()},
                           {"guideline", state.guideline()}});
}

std::vector<parse::ColumnRef> MappingAgent::locate_feature(RunState& state) {
    prompt::Bindings bindings;
    bindings["Selected_Schema"] = state.linked.render_text();
    bindings["Schema_Guideline"] = or_none(state.guideline());
    bindings["Feature"] = state.feature;

    for (int attempt = 1;; attempt++) {
        std::string completion = call_llm(state, "cma_feature_locating", bindings);
        try {
            std::optional<std::string> section =
                parse::parse_tagged_section(completion, "feature column");
            if (!section.has_value()) {
                section = parse::parse_tagged_section(completion, "featurecolumn");
            }
            if (!section.has_value()) throw malformed_error("feature column section is missing");
            parse::FeatureColumnAnswer answer = parse::parse_feature_column(*section);
            if (answer.none) {
                state.transcript->log("locate", {{"found", false}});
                return {};
            }
            std::vector<std::string> rendered;
            for (const auto& ref : answer.columns) rendered.push_back(ref.render());
            state.transcript->log("locate", {{"found", true}, {"columns", rendered}});
            return answer.columns;
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Malformed && attempt < 2) {
                state.transcript->log("malformed_retry", {{"template_id", "cma_feature_locating"},
                                                          {"error", e.message()}});
                continue;
            }
            if (e.kind() != ErrorKind::Malformed) throw;
            state.transcript->log("locate", {{"found", false}, {"fallback", e.message()}});
            return {};
        }
    }
}

std::vector<parse::CandidateTuple> MappingAgent::list_candidates(RunState& state, bool& exhausted) {
    exhausted = false;
    std::string failed_sql = kNone;
    std::string error_feedback = kNone;

    for (int attempt = 1; attempt <= config_.max_listing_retries; attempt++) {
        prompt::Bindings bindings;
        bindings["Definition_Schema"] = render_partition(state.linked, true);
        bindings["Feature_Schema"] = render_partition(state.linked, false);
        bindings["Schema_Guideline"] = or_none(state.guideline());
        bindings["Relation_Information"] = state.snapshot_features.render_foreign_keys();
        bindings["Feature"] = state.feature;
        bindings["Failed_SQL"] = failed_sql;
        bindings["Error_Feedback"] = error_feedback;

        std::string completion = call_llm(state, "cma_candidate_listing", bindings);
        std::string sql;
        try {
            std::optional<std::string> section =
                parse::parse_tagged_section(completion, "SQL queries");
            if (!section.has_value()) throw malformed_error("SQL queries section is missing");
            std::vector<std::string> statements = parse::parse_sql_queries(*section, 1);
            if (statements.empty()) throw malformed_error("SQL queries section is empty");
            sql = statements[0];
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Malformed && e.kind() != ErrorKind::Budget) throw;
            state.transcript->log("listing_malformed",
                                  {{"attempt", attempt}, {"error", e.message()}});
            error_feedback = e.message();
            continue;
        }

        db::QueryOutcome outcome = db::execute_final_all(session_, sql);
        state.transcript->log("candidate_sql", {{"attempt", attempt},
                                                {"sql", sql},
                                                {"ok", outcome.ok()},
                                                {"error", outcome.ok() ? "" : outcome.error_message}});
        if (!outcome.ok()) {
            failed_sql = sql;
            error_feedback = outcome.error_message;
            continue;
        }

        std::vector<parse::CandidateTuple> tuples;
        std::set<parse::CandidateTuple> seen;
        for (const auto& row : outcome.result->rows) {
            if (row.empty()) continue;
            parse::CandidateTuple tuple;
            size_t width = row.size() > 3 ? 3 : row.size();
            for (size_t i = 0; i < width; i++) tuple.elements.push_back(util::trim(row[i]));
            size_t name_index = tuple.elements.size() >= 3 ? 1 : 0;
            const std::string& name = tuple.elements[name_index];
            if (name.empty() || name == "NULL") continue;
            if (seen.insert(tuple).second) tuples.push_back(std::move(tuple));
        }
        state.transcript->log("candidates", {{"count", tuples.size()},
                                             {"rows", outcome.result->rows.size()}});
        return tuples;
    }

    exhausted = true;
    state.transcript->log("listing_exhausted", {{"attempts", config_.max_listing_retries},
                                                {"last_error", error_feedback}});
    return {};
}

std::vector<ScoredCandidate> MappingAgent::match_candidates(
    RunState& state, const std::vector<parse::CandidateTuple>& candidates, int threshold,
    const std::string& template_id) {
    bool pass1 = template_id == "cma_matching_pass1";
    std::vector<ScoredCandidate> retained;
    std::set<parse::CandidateTuple> kept;
    std::set<parse::CandidateTuple> allowed(candidates.begin(), candidates.end());

    size_t batch_count = 0;
    for (size_t offset = 0; offset < candidates.size(); offset += static_cast<size_t>(config_.batch_size)) {
        size_t end = offset + static_cast<size_t>(config_.batch_size);
        if (end > candidates.size()) end = candidates.size();
        std::vector<parse::CandidateTuple> batch(candidates.begin() + static_cast<long>(offset),
                                                 candidates.begin() + static_cast<long>(end));
        batch_count++;

        prompt::Bindings bindings;
        bindings[pass1 ? "Targeting_Feature" : "Target_Feature"] = state.feature;
        bindings["Candidate_Features"] = render_candidates(batch, pass1);
        bindings["User_defined_threshold"] = std::to_string(threshold);

        for (int attempt = 1; attempt <= 2; attempt++) {
            std::string completion = call_llm(state, template_id, bindings);
            try {
                parse::SimilarityMap map = parse::parse_similarity_map(completion);
                const std::vector<std::pair<parse::CandidateTuple, int>>* pairs = nullptr;
                auto exact = map.find(state.feature);
                if (exact != map.end()) {
                    pairs = &exact->second;
                } else if (auto anonymous = map.find(""); anonymous != map.end()) {
                    pairs = &anonymous->second;
                } else if (map.size() == 1) {
                    pairs = &map.begin()->second;
                } else if (!map.empty()) {
                    throw malformed_error("similarity map names several features, none of them '" +
                                          state.feature + "'");
                }

                size_t hallucinated = 0;
                size_t below = 0;
                if (pairs != nullptr) {
                    for (const auto& [tuple, score] : *pairs) {
                        if (score < threshold) {
                            below++;
                            continue;
                        }
                        if (!allowed.count(tuple)) {
                            hallucinated++;
                            continue;
                        }
                        if (kept.insert(tuple).second) retained.push_back({tuple, score});
                    }
                }
                state.transcript->log(pass1 ? "match_pass1" : "match_pass2",
                                      {{"batch", batch_count},
                                       {"threshold", threshold},
                                       {"batch_size", batch.size()},
                                       {"retained_total", retained.size()},
                                       {"below_threshold", below},
                                       {"unlisted_dropped", hallucinated}});
                break;
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::Malformed) throw;
                if (attempt < 2) {
                    state.transcript->log("malformed_retry",
                                          {{"template_id", template_id}, {"error", e.message()}});
                    continue;
                }
                state.transcript->log("batch_dropped", {{"template_id", template_id},
                                                        {"batch", batch_count},
                                                        {"error", e.message()}});
            }
        }
    }
    return retained;
}

MappingResult MappingAgent::run(const std::string& feature, run::Transcript& transcript) {
    config_.validate();

    RunState state;
    state.feature = feature;
    state.transcript = &transcript;
    state.snapshot_defs = db::introspect_schema(session_, 3);
    state.snapshot_features = db::introspect_schema(session_, config_.samples_per_column);
    transcript.log("introspect", {{"database", state.snapshot_features.database_name},
                                  {"tables", state.snapshot_features.tables.size()},
                                  {"feature", feature}});

    MappingResult result;
    result.feature = feature;
    result.item.outcome = bench::MappingItem::Outcome::Absent;

    link_schema(state);
    result.schema_render = state.linked.render_text();
    result.schema_guideline = state.guideline();

    std::vector<parse::ColumnRef> located = locate_feature(state);
    if (!located.empty()) {
        result.item.outcome = bench::MappingItem::Outcome::ColumnRefs;
        for (const auto& ref : located) result.item.column_refs.push_back(ref.render());
        transcript.log("final", {{"feature", feature}, {"outcome", "column_refs"}});
        return result;
    }

    bool exhausted = false;
    std::vector<parse::CandidateTuple> candidates = list_candidates(state, exhausted);
    if (candidates.empty()) {
        transcript.log("final", {{"feature", feature},
                                 {"outcome", "absent"},
                                 {"reason", exhausted ? "listing retries exhausted" : "no candidates"}});
        return result;
    }

    std::vector<ScoredCandidate> pass1 =
        match_candidates(state, candidates, config_.pass1_threshold, "cma_matching_pass1");
    if (pass1.empty()) {
        transcript.log("final",
                       {{"feature", feature}, {"outcome", "absent"}, {"reason", "no pass-1 survivors"}});
        return result;
    }

    std::vector<parse::CandidateTuple> survivors;
    survivors.reserve(pass1.size());
    for (const auto& sc : pass1) survivors.push_back(sc.tuple);
    std::vector<ScoredCandidate> final_set =
        match_candidates(state, survivors, config_.user_threshold, "cma_matching_pass2");
    if (final_set.empty()) {
        transcript.log("final",
                       {{"feature", feature}, {"outcome", "absent"}, {"reason", "no pass-2 survivors"}});
        return result;
    }

    result.retained = final_set;
    bool coded = final_set.front().tuple.elements.size() >= 3;
    if (coded) {
        result.item.outcome = bench::MappingItem::Outcome::RowCodes;
        for (const auto& sc : final_set) {
            result.item.codes.emplace_back(sc.tuple.elements[0], sc.tuple.elements[1]);
        }
    } else {
        result.item.outcome = bench::MappingItem::Outcome::NamesOnly;
        for (const auto& sc : final_set) result.item.names.push_back(sc.tuple.elements[0]);
    }
    transcript.log("final", {{"feature", feature},
                             {"outcome", bench::MappingItem::outcome_name(result.item.outcome)},
                             {"retained", final_set.size()}});
    return result;
}

void write_mapping_json(const std::vector<MappingResult>& results, const std::string& path) {
    Json root = Json::object();
    for (const auto& result : results) root[result.feature] = result.to_json();
    util::write_file(path, root.dump(2) + "\n");
}

}  // namespace emrkit::cma
