#pragma once

#include <optional>
#include <string>
#include <vector>

#include "emrkit/db/gateway.hpp"
#include "emrkit/format.hpp"
#include "emrkit/llm/client.hpp"
#include "emrkit/parse/response.hpp"
#include "emrkit/prompt/engine.hpp"
#include "emrkit/run/transcript.hpp"

namespace emrkit::cfsa {

struct ClinicalRequest {
    // Natural-language inclusion criteria, e.g. "Include only Age 19 to 29".
    std::string cohort_selection;
    // Feature list with per-feature format parentheticals; the first feature
    // names the stay identifier.
    std::string feature_selection;
};

struct Budgets {
    int max_rounds = 10;
    int max_queries_per_round = 5;
    int max_retries = 5;
    // Token-motivated cap on distinct sample values carried per column in the
    // schema snapshot.
    int samples_per_column = 10;
};

// Both linking passes keep their guideline paragraphs verbatim; prompts that
// take a single guideline binding get the two joined in linking order.
struct SchemaGuideline {
    std::string mapping_text;
    std::string feature_text;

    std::string render() const;
};

struct ObservationRound {
    int round_index = 0;
    double temperature = 0.0;
    std::vector<std::string> queries;
    // Rendered result table or the verbatim backend error, aligned 1:1 with
    // queries.
    std::vector<std::string> outputs;
    bool add_info = false;
    std::string gained;
};

struct ErrorFeedback {
    std::string failed_sql;
    std::string message;
};

struct CohortResult {
    std::string final_sql;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    int rounds_used = 0;
    int retries_used = 0;
    // Snapshot of the linked schema and guideline as they stood when the
    // final query classified Correct.
    std::string schema_render;
    std::string schema_guideline;
};

// Cohort and feature selection state machine: schema linking, budgeted SQL
// observation, SQL generation, and error-feedback routing against a read-only
// database session. One instance drives one run at a time.
class CohortAgent {
public:
    CohortAgent(llm::Client& client, db::Session& session,
                const prompt::TemplateStore& templates, const prompt::DocumentBundle& documents,
                Budgets budgets = Budgets{});

    // Runs the full machine until the extracted table classifies Correct or a
    // budget is exhausted; budget exhaustion is an agent error carrying the
    // phase and the budgets consumed. The transcript receives every prompt,
    // completion, query, result, and routing decision.
    CohortResult run(const ClinicalRequest& request, const FeatureFormatSpec& format_spec,
                     run::Transcript& transcript);

private:
    struct RunState;

    std::string call_llm(RunState& state, const std::string& template_id,
                         const prompt::Bindings& bindings, int round_index,
                         const std::string& appended_context = "");
    void link_schema(RunState& state, const std::optional<std::string>& feedback);
    bool observation_loop(RunState& state);
    std::vector<std::string> assess_sufficiency(RunState& state, int round_index);
    ObservationRound run_observation_round(RunState& state, std::vector<std::string> queries,
                                           int round_index);
    void check_data_sufficiency(RunState& state, ObservationRound& round);
    void update_schema(RunState& state, const std::string& gained, int round_index);
    std::string generate_sql(RunState& state);

    llm::Client& client_;
    db::Session& session_;
    const prompt::TemplateStore& templates_;
    const prompt::DocumentBundle& documents_;
    Budgets budgets_;
};

void write_result_csv(const CohortResult& result, const std::string& path);

}  // namespace emrkit::cfsa
