#pragma once

#include <string>
#include <vector>

#include "emrkit/bench/fixture.hpp"
#include "emrkit/db/gateway.hpp"
#include "emrkit/llm/client.hpp"
#include "emrkit/parse/response.hpp"
#include "emrkit/prompt/engine.hpp"
#include "emrkit/run/transcript.hpp"

namespace emrkit::cma {

struct MatchingConfig {
    // First matching pass runs at this fixed threshold; the second pass
    // re-scores the survivors at the user threshold.
    int pass1_threshold = 80;
    int user_threshold = 90;
    int batch_size = 50;
    // Candidate-listing attempts (generation plus execution failures) before
    // the feature is declared absent.
    int max_listing_retries = 5;
    // Sample values per column in the feature-linking snapshot; the
    // definition-linking snapshot keeps its fixed 3 samples.
    int samples_per_column = 10;

    void validate() const;
};

struct ScoredCandidate {
    parse::CandidateTuple tuple;
    int score = 0;
};

// Per-feature mapping answer plus the similarity scores that justified it.
// The embedded item is the evaluation-facing shape.
struct MappingResult {
    std::string feature;
    bench::MappingItem item;
    std::vector<ScoredCandidate> retained;
    // Linked-schema rendering and guideline from this run, kept so downstream
    // consumers can rebuild prompts that reference the same tables.
    std::string schema_render;
    std::string schema_guideline;

    Json to_json() const;
};

// Code-mapping state machine: schema linking, literal column locating,
// DISTINCT candidate listing, and two-pass similarity matching.
class MappingAgent {
public:
    MappingAgent(llm::Client& client, db::Session& session,
                 const prompt::TemplateStore& templates, const prompt::DocumentBundle& documents,
                 MatchingConfig config = MatchingConfig{});

    MappingResult run(const std::string& feature, run::Transcript& transcript);

private:
    struct RunState;

    std::string call_llm(RunState& state, const std::string& template_id,
                         const prompt::Bindings& bindings);
    void link_schema(RunState& state);
    std::vector<parse::ColumnRef> locate_feature(RunState& state);
    std::vector<parse::CandidateTuple> list_candidates(RunState& state, bool& exhausted);
    std::vector<ScoredCandidate> match_candidates(RunState& state,
                                                  const std::vector<parse::CandidateTuple>& candidates,
                                                  int threshold, const std::string& template_id);

    llm::Client& client_;
    db::Session& session_;
    const prompt::TemplateStore& templates_;
    const prompt::DocumentBundle& documents_;
    MatchingConfig config_;
};

// Case-, space-, and symbol-insensitive literal containment used to judge
// whether a feature name appears inside a column name.
bool literal_name_match(const std::string& feature, const std::string& column_name);

void write_mapping_json(const std::vector<MappingResult>& results, const std::string& path);

}  // namespace emrkit::cma
