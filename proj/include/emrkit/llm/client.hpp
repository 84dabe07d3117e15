#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace emrkit::llm {

struct CompletionRequest {
    std::string template_id;
    std::string prompt_text;
    double temperature = 0.0;
    // 0 for calls outside the observation loop; 1-based observation round
    // otherwise, in which case temperature must equal temperature_for_round.
    int round_index = 0;
};

// Sampling schedule for observation rounds: deterministic for the first five
// rounds, then warming by 0.1 per extra round (round 10 reaches 0.5).
double temperature_for_round(int round_index);

// Content hash identifying a request independent of call order.
std::string fingerprint(const CompletionRequest& request);

struct UsageStats {
    long long completions = 0;
    long long prompt_bytes = 0;
    long long completion_bytes = 0;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string complete(const CompletionRequest& request) = 0;
    virtual std::string name() const = 0;
};

// Deterministic test backend driven by a responder function.
class ScriptedBackend : public Backend {
public:
    using Responder = std::function<std::string(const CompletionRequest&)>;
    explicit ScriptedBackend(Responder responder) : responder_(std::move(responder)) {}
    std::string complete(const CompletionRequest& request) override { return responder_(request); }
    std::string name() const override { return "scripted"; }

private:
    Responder responder_;
};

// Scripted backend configured from a JSONL rules file; each line holds
// {"template_id": optional, "prompt_contains": optional, "completion": text}.
// The first matching rule wins; a miss is a hard error.
std::unique_ptr<Backend> make_rules_backend(const std::string& rules_path);

struct LiveConfig {
    std::string base_url;                     // e.g. https://api.example.com
    std::string path = "/v1/chat/completions";
    std::string model;
    std::string api_key_env = "EMRKIT_API_KEY";
    std::map<std::string, std::string> extra_headers;
    int max_tokens = 4096;
    int max_transport_retries = 3;
};

// HTTP chat-completion backend; generic request/response shape, no
// model-specific behavior. Three transport retries with exponential backoff.
std::unique_ptr<Backend> make_live_backend(const LiveConfig& config);

// On-disk replay store. JSONL lines:
//   {"kind":"begin"} / {"kind":"entry", "fingerprint":..., "template_id":...,
//   "temperature":..., "completion":...} / {"kind":"end"}
// Lookups are keyed by fingerprint; repeated identical requests consume the
// recorded completions in order, so retry flows replay faithfully.
class Cassette {
public:
    static Cassette load(const std::string& path);

    std::optional<std::string> lookup(const std::string& fp);
    bool complete_sessions() const { return complete_; }
    size_t entry_count() const { return total_entries_; }

private:
    struct Sequence {
        std::vector<std::string> completions;
        size_t cursor = 0;
    };
    std::map<std::string, Sequence> entries_;
    size_t total_entries_ = 0;
    bool complete_ = true;
};

class Recorder {
public:
    // Appends to an existing cassette file; refuses to truncate unless
    // overwrite is set.
    Recorder(const std::string& path, bool overwrite);
    ~Recorder();
    void record(const CompletionRequest& request, const std::string& completion);
    // Marks the recorded session complete; without this the cassette replays
    // as partial and is rejected.
    void finish();

private:
    std::string path_;
    bool finished_ = false;
    std::mutex mutex_;
};

enum class Mode { Live, Replay, Scripted };

// Front door for all completions: owns the backend, enforces the round
// temperature invariant, tracks usage, and optionally records.
class Client {
public:
    static Client replay(const std::string& cassette_path);
    static Client scripted(std::unique_ptr<Backend> backend);
    static Client live(const LiveConfig& config);

    std::string complete(const CompletionRequest& request);

    void attach_recorder(std::shared_ptr<Recorder> recorder) { recorder_ = std::move(recorder); }
    const UsageStats& usage() const { return usage_; }
    Mode mode() const { return mode_; }

private:
    Client() = default;
    Mode mode_ = Mode::Scripted;
    std::unique_ptr<Backend> backend_;
    std::optional<Cassette> cassette_;
    std::shared_ptr<Recorder> recorder_;
    UsageStats usage_;
    std::unique_ptr<std::mutex> mutex_ = std::make_unique<std::mutex>();
};

}  // namespace emrkit::llm
