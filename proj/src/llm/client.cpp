#include "emrkit/llm/client.hpp"

#include <fstream>

#include "emrkit/error.hpp"
#include "emrkit/json.hpp"
#include "emrkit/util.hpp"

namespace emrkit::llm {

double temperature_for_round(int round_index) {
    if (round_index < 1 || round_index > 10) {
        throw internal_error("observation round index out of range: " + std::to_string(round_index));
    }
    if (round_index <= 5) return 0.0;
    return static_cast<double>(round_index - 5) / 10.0;
}

namespace {

std::string canonical_temperature(double temperature) { return util::format_decimal(temperature, 4); }

}  // namespace

std::string fingerprint(const CompletionRequest& request) {
    std::string payload = request.template_id;
    payload.push_back('\x1f');
    payload += canonical_temperature(request.temperature);
    payload.push_back('\x1f');
    payload += request.prompt_text;
    return util::sha256_hex(payload);
}

std::unique_ptr<Backend> make_rules_backend(const std::string& rules_path) {
    struct Rule {
        std::optional<std::string> template_id;
        std::optional<std::string> prompt_contains;
        std::string completion;
    };

    class RulesBackend : public Backend {
    public:
        explicit RulesBackend(std::vector<Rule> rules) : rules_(std::move(rules)) {}
        std::string complete(const CompletionRequest& request) override {
            for (const Rule& rule : rules_) {
                if (rule.template_id.has_value() && *rule.template_id != request.template_id) continue;
                if (rule.prompt_contains.has_value() &&
                    request.prompt_text.find(*rule.prompt_contains) == std::string::npos) {
                    continue;
                }
                return rule.completion;
            }
            throw agent_error("no scripted rule matches template '" + request.template_id + "'");
        }
        std::string name() const override { return "scripted-rules"; }

    private:
        std::vector<Rule> rules_;
    };

    std::ifstream in(rules_path);
    if (!in) throw config_error("cannot open scripted rules file: " + rules_path);
    std::vector<Rule> rules;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        line_no++;
        std::string trimmed = util::trim(line);
        if (trimmed.empty()) continue;
        Json doc;
        try {
            doc = Json::parse(trimmed);
        } catch (const std::exception& e) {
            throw config_error("scripted rules line " + std::to_string(line_no) + " is not JSON: " + e.what());
        }
        Rule rule;
        if (doc.contains("template_id")) rule.template_id = doc["template_id"].get<std::string>();
        if (doc.contains("prompt_contains")) rule.prompt_contains = doc["prompt_contains"].get<std::string>();
        if (!doc.contains("completion")) {
            throw config_error("scripted rules line " + std::to_string(line_no) + " lacks 'completion'");
        }
        rule.completion = doc["completion"].get<std::string>();
        rules.push_back(std::move(rule));
    }
    return std::make_unique<RulesBackend>(std::move(rules));
}

Cassette Cassette::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw environment_error("cannot open cassette: " + path);
    Cassette cassette;
    std::string line;
    size_t line_no = 0;
    int open_sessions = 0;
    bool saw_any_marker = false;
    while (std::getline(in, line)) {
        line_no++;
        std::string trimmed = util::trim(line);
        if (trimmed.empty()) continue;
        Json doc;
        try {
            doc = Json::parse(trimmed);
        } catch (const std::exception& e) {
            throw config_error("cassette line " + std::to_string(line_no) + " is not JSON: " + e.what());
        }
        std::string kind = doc.value("kind", "entry");
        if (kind == "begin") {
            open_sessions++;
            saw_any_marker = true;
            continue;
        }
        if (kind == "end") {
            if (open_sessions > 0) open_sessions--;
            saw_any_marker = true;
            continue;
        }
        if (kind != "entry") {
            throw config_error("cassette line " + std::to_string(line_no) + " has unknown kind '" + kind + "'");
        }
        for (const char* field : {"fingerprint", "template_id", "temperature", "completion"}) {
            if (!doc.contains(field)) {
                throw config_error("cassette line " + std::to_string(line_no) + " lacks '" + field + "'");
            }
        }
        cassette.entries_[doc["fingerprint"].get<std::string>()].completions.push_back(
            doc["completion"].get<std::string>());
        cassette.total_entries_++;
    }
    cassette.complete_ = saw_any_marker && open_sessions == 0;
    if (!saw_any_marker) cassette.complete_ = false;
    return cassette;
}

std::optional<std::string> Cassette::lookup(const std::string& fp) {
    auto it = entries_.find(fp);
    if (it == entries_.end()) return std::nullopt;
    Sequence& seq = it->second;
    size_t index = seq.cursor < seq.completions.size() ? seq.cursor : seq.completions.size() - 1;
    seq.cursor++;
    return seq.completions[index];
}

Recorder::Recorder(const std::string& path, bool overwrite) : path_(path) {
    if (util::file_exists(path) && overwrite) {
        util::write_file(path, "");
    }
    Json begin;
    begin["kind"] = "begin";
    util::append_file(path_, begin.dump() + "\n");
}

Recorder::~Recorder() = default;

void Recorder::record(const CompletionRequest& request, const std::string& completion) {
    std::lock_guard<std::mutex> lock(mutex_);
    Json doc;
    doc["kind"] = "entry";
    doc["fingerprint"] = fingerprint(request);
    doc["template_id"] = request.template_id;
    doc["temperature"] = canonical_temperature(request.temperature);
    doc["completion"] = completion;
    util::append_file(path_, doc.dump() + "\n");
}

void Recorder::finish() {
    std::lock_guard<std::mutex> lock(mutex_);
    if (finished_) return;
    Json end;
    end["kind"] = "end";
    util::append_file(path_, end.dump() + "\n");
    finished_ = true;
}

Client Client::replay(const std::string& cassette_path) {
    Client client;
    client.mode_ = Mode::Replay;
    client.cassette_ = Cassette::load(cassette_path);
    if (!client.cassette_->complete_sessions()) {
        throw config_error("cassette " + cassette_path +
                           " is partial (missing end-of-session marker) and cannot be replayed");
    }
    return client;
}

Client Client::scripted(std::unique_ptr<Backend> backend) {
    Client client;
    client.mode_ = Mode::Scripted;
    client.backend_ = std::move(backend);
    return client;
}

Client Client::live(const LiveConfig& config) {
    Client client;
    client.mode_ = Mode::Live;
    client.backend_ = make_live_backend(config);
    return client;
}

std::string Client::complete(const CompletionRequest& request) {
    if (request.round_index > 0) {
        double expected = temperature_for_round(request.round_index);
        if (canonical_temperature(expected) != canonical_temperature(request.temperature)) {
            throw internal_error("round " + std::to_string(request.round_index) +
                                 " must use temperature " + canonical_temperature(expected) + ", got " +
                                 canonical_temperature(request.temperature));
        }
    }
    if (request.temperature < 0.0 || request.temperature > 2.0) {
        throw config_error("temperature out of range: " + canonical_temperature(request.temperature));
    }

    std::lock_guard<std::mutex> lock(*mutex_);
    std::string completion;
    if (mode_ == Mode::Replay) {
        std::optional<std::string> hit = cassette_->lookup(fingerprint(request));
        if (!hit.has_value()) {
            throw agent_error("replay miss for template '" + request.template_id + "' (fingerprint " +
                              fingerprint(request) + "); the cassette does not cover this request");
        }
        completion = *hit;
    } else {
        completion = backend_->complete(request);
    }
    if (recorder_ != nullptr) recorder_->record(request, completion);
    usage_.completions++;
    usage_.prompt_bytes += static_cast<long long>(request.prompt_text.size());
    usage_.completion_bytes += static_cast<long long>(completion.size());
    return completion;
}

}  // namespace emrkit::llm
