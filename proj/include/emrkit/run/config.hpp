#pragma once

#include <cstdint>
#include <string>

#include "emrkit/cfsa/agent.hpp"
#include "emrkit/cma/agent.hpp"
#include "emrkit/json.hpp"
#include "emrkit/llm/client.hpp"

namespace emrkit::run {

// Declarative run settings. Defaults reproduce the reference setup: budgets
// 10 rounds / 5 queries / 5 retries, 10 sample values per column, matching
// thresholds 80 then 90. Credentials never live here; the live backend reads
// its key from the environment variable named in live.api_key_env.
struct RunConfig {
    std::string db_url;
    std::string backend = "replay";  // live | replay | scripted
    std::string cassette_path;
    std::string scripted_rules_path;
    std::string record_path;
    bool record_overwrite = false;

    cfsa::Budgets budgets;
    int samples_per_column = 10;
    cma::MatchingConfig matching;

    std::string manual_path;
    std::string memo_path;
    std::string prompts_dir = "prompts";
    std::string out_dir = "out";

    llm::LiveConfig live;
    int trials = 1;

    static RunConfig from_json(const Json& j);
    static RunConfig load_file(const std::string& path);
    // Applies one "dotted.key=value" override, e.g. "budgets.max_rounds=3".
    void apply_override(const std::string& key, const std::string& value);
    Json to_json() const;
    // Cross-field checks: backend name is known, replay has a cassette on
    // disk, scripted has a rules file, live has a base URL and model.
    void validate() const;
};

}  // namespace emrkit::run
