#include "emrkit/run/config.hpp"

#include <filesystem>
#include <set>

#include "emrkit/error.hpp"
#include "emrkit/util.hpp"

namespace emrkit::run {

namespace {

int to_int(const Json& v, const std::string& key) {
    if (v.is_number_integer()) return v.get<int>();
    throw config_error("config field '" + key + "' must be an integer");
}

std::string to_str(const Json& v, const std::string& key) {
    if (v.is_string()) return v.get<std::string>();
    throw config_error("config field '" + key + "' must be a string");
}

bool to_bool(const Json& v, const std::string& key) {
    if (v.is_boolean()) return v.get<bool>();
    throw config_error("config field '" + key + "' must be a boolean");
}

void reject_unknown(const Json& j, const std::set<std::string>& known,
                    const std::string& scope) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) {
            throw config_error("unknown config field '" + scope + it.key() + "'");
        }
    }
}

int parse_int_text(const std::string& text, const std::string& key) {
    try {
        std::size_t used = 0;
        const int value = std::stoi(text, &used);
        if (used != text.size()) throw std::invalid_argument(key);
        return value;
    } catch (const std::exception&) {
        throw config_error("override '" + key + "' expects an integer, got '" + text + "'");
    }
}

bool parse_bool_text(const std::string& text, const std::string& key) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw config_error("override '" + key + "' expects true or false, got '" + text + "'");
}

}  // namespace

RunConfig RunConfig::from_json(const Json& j) {
    if (!j.is_object()) throw config_error("config root must be a JSON object");
    reject_unknown(j,
                   {"db_url", "backend", "cassette", "scripted_rules", "record",
                    "record_overwrite", "budgets", "samples_per_column", "matching",
                    "documents", "prompts_dir", "out_dir", "live", "trials"},
                   "");

    RunConfig c;
    if (j.contains("db_url")) c.db_url = to_str(j["db_url"], "db_url");
    if (j.contains("backend")) c.backend = to_str(j["backend"], "backend");
    if (j.contains("cassette")) c.cassette_path = to_str(j["cassette"], "cassette");
    if (j.contains("scripted_rules")) {
        c.scripted_rules_path = to_str(j["scripted_rules"], "scripted_rules");
    }
    if (j.contains("record")) c.record_path = to_str(j["record"], "record");
    if (j.contains("record_overwrite")) {
        c.record_overwrite = to_bool(j["record_overwrite"], "record_overwrite");
    }
    if (j.contains("budgets")) {
        const Json& b = j["budgets"];
        if (!b.is_object()) throw config_error("config field 'budgets' must be an object");
        reject_unknown(b, {"max_rounds", "max_queries_per_round", "max_retries"}, "budgets.");
        if (b.contains("max_rounds")) {
            c.budgets.max_rounds = to_int(b["max_rounds"], "budgets.max_rounds");
        }
        if (b.contains("max_queries_per_round")) {
            c.budgets.max_queries_per_round =
                to_int(b["max_queries_per_round"], "budgets.max_queries_per_round");
        }
        if (b.contains("max_retries")) {
            c.budgets.max_retries = to_int(b["max_retries"], "budgets.max_retries");
        }
    }
    if (j.contains("samples_per_column")) {
        c.samples_per_column = to_int(j["samples_per_column"], "samples_per_column");
    }
    if (j.contains("matching")) {
        const Json& m = j["matching"];
        if (!m.is_object()) throw config_error("config field 'matching' must be an object");
        reject_unknown(
            m, {"pass1_threshold", "user_threshold", "batch_size", "max_listing_retries"},
            "matching.");
        if (m.contains("pass1_threshold")) {
            c.matching.pass1_threshold = to_int(m["pass1_threshold"], "matching.pass1_threshold");
        }
        if (m.contains("user_threshold")) {
            c.matching.user_threshold = to_int(m["user_threshold"], "matching.user_threshold");
        }
        if (m.contains("batch_size")) {
            c.matching.batch_size = to_int(m["batch_size"], "matching.batch_size");
        }
        if (m.contains("max_listing_retries")) {
            c.matching.max_listing_retries =
                to_int(m["max_listing_retries"], "matching.max_listing_retries");
        }
    }
    if (j.contains("documents")) {
        const Json& d = j["documents"];
        if (!d.is_object()) throw config_error("config field 'documents' must be an object");
        reject_unknown(d, {"manual", "memo"}, "documents.");
        if (d.contains("manual")) c.manual_path = to_str(d["manual"], "documents.manual");
        if (d.contains("memo")) c.memo_path = to_str(d["memo"], "documents.memo");
    }
    if (j.contains("prompts_dir")) c.prompts_dir = to_str(j["prompts_dir"], "prompts_dir");
    if (j.contains("out_dir")) c.out_dir = to_str(j["out_dir"], "out_dir");
    if (j.contains("live")) {
        const Json& l = j["live"];
        if (!l.is_object()) throw config_error("config field 'live' must be an object");
        reject_unknown(l,
                       {"base_url", "path", "model", "api_key_env", "max_tokens",
                        "max_transport_retries"},
                       "live.");
        if (l.contains("base_url")) c.live.base_url = to_str(l["base_url"], "live.base_url");
        if (l.contains("path")) c.live.path = to_str(l["path"], "live.path");
        if (l.contains("model")) c.live.model = to_str(l["model"], "live.model");
        if (l.contains("api_key_env")) {
            c.live.api_key_env = to_str(l["api_key_env"], "live.api_key_env");
        }
        if (l.contains("max_tokens")) {
            c.live.max_tokens = to_int(l["max_tokens"], "live.max_tokens");
        }
        if (l.contains("max_transport_retries")) {
            c.live.max_transport_retries =
                to_int(l["max_transport_retries"], "live.max_transport_retries");
        }
    }
    if (j.contains("trials")) c.trials = to_int(j["trials"], "trials");
    return c;
}

RunConfig RunConfig::load_file(const std::string& path) {
    if (!std::filesystem::exists(path)) {
        throw config_error("config file not found: " + path);
    }
    Json j;
    try {
        j = Json::parse(util::read_file(path));
    } catch (const Json::parse_error& e) {
        throw config_error("config file " + path + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

void RunConfig::apply_override(const std::string& key, const std::string& value) {
    if (key == "db_url") db_url = value;
    else if (key == "backend") backend = value;
    else if (key == "cassette") cassette_path = value;
    else if (key == "scripted_rules") scripted_rules_path = value;
    else if (key == "record") record_path = value;
    else if (key == "record_overwrite") record_overwrite = parse_bool_text(value, key);
    else if (key == "budgets.max_rounds") budgets.max_rounds = parse_int_text(value, key);
    else if (key == "budgets.max_queries_per_round") {
        budgets.max_queries_per_round = parse_int_text(value, key);
    } else if (key == "budgets.max_retries") {
        budgets.max_retries = parse_int_text(value, key);
    } else if (key == "samples_per_column") {
        samples_per_column = parse_int_text(value, key);
    } else if (key == "matching.pass1_threshold") {
        matching.pass1_threshold = parse_int_text(value, key);
    } else if (key == "matching.user_threshold") {
        matching.user_threshold = parse_int_text(value, key);
    } else if (key == "matching.batch_size") {
        matching.batch_size = parse_int_text(value, key);
    } else if (key == "matching.max_listing_retries") {
        matching.max_listing_retries = parse_int_text(value, key);
    } else if (key == "documents.manual") manual_path = value;
    else if (key == "documents.memo") memo_path = value;
    else if (key == "prompts_dir") prompts_dir = value;
    else if (key == "out_dir") out_dir = value;
    else if (key == "live.base_url") live.base_url = value;
    else if (key == "live.path") live.path = value;
    else if (key == "live.model") live.model = value;
    else if (key == "live.api_key_env") live.api_key_env = value;
    else if (key == "live.max_tokens") live.max_tokens = parse_int_text(value, key);
    else if (key == "live.max_transport_retries") {
        live.max_transport_retries = parse_int_text(value, key);
    } else if (key == "trials") trials = parse_int_text(value, key);
    else throw config_error("unknown config override key '" + key + "'");
}

Json RunConfig::to_json() const {
    Json j = Json::object();
    j["db_url"] = db_url;
    j["backend"] = backend;
    j["cassette"] = cassette_path;
    j["scripted_rules"] = scripted_rules_path;
    j["record"] = record_path;
    j["record_overwrite"] = record_overwrite;
    j["budgets"] = {{"max_rounds", budgets.max_rounds},
                    {"max_queries_per_round", budgets.max_queries_per_round},
                    {"max_retries", budgets.max_retries}};
    j["samples_per_column"] = samples_per_column;
    j["matching"] = {{"pass1_threshold", matching.pass1_threshold},
                     {"user_threshold", matching.user_threshold},
                     {"batch_size", matching.batch_size},
                     {"max_listing_retries", matching.max_listing_retries}};
    j["documents"] = {{"manual", manual_path}, {"memo", memo_path}};
    j["prompts_dir"] = prompts_dir;
    j["out_dir"] = out_dir;
    j["live"] = {{"base_url", live.base_url},
                 {"path", live.path},
                 {"model", live.model},
                 {"api_key_env", live.api_key_env},
                 {"max_tokens", live.max_tokens},
                 {"max_transport_retries", live.max_transport_retries}};
    j["trials"] = trials;
    return j;
}

void RunConfig::validate() const {
    if (backend != "live" && backend != "replay" && backend != "scripted") {
        throw config_error("backend must be live, replay, or scripted; got '" + backend + "'");
    }
    if (backend == "replay") {
        if (cassette_path.empty()) {
            throw config_error("replay backend requires a cassette path");
        }
        if (!std::filesystem::exists(cassette_path)) {
            throw config_error("replay cassette not found: " + cassette_path);
        }
    }
    if (backend == "scripted" && scripted_rules_path.empty()) {
        throw config_error("scripted backend requires a rules file");
    }
    if (backend == "live") {
        if (live.base_url.empty()) throw config_error("live backend requires live.base_url");
        if (live.model.empty()) throw config_error("live backend requires live.model");
    }
    if (budgets.max_rounds < 1 || budgets.max_queries_per_round < 1 || budgets.max_retries < 1) {
        throw config_error("budgets must all be at least 1");
    }
    if (samples_per_column < 1) throw config_error("samples_per_column must be at least 1");
    if (trials < 1) throw config_error("trials must be at least 1");
    matching.validate();
}

}  // namespace emrkit::run
