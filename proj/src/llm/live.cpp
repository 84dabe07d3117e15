#include <chrono>
#include <cstdlib>
#include <memory>
#include <thread>

#include <httplib.h>

#include "emrkit/error.hpp"
#include "emrkit/json.hpp"
#include "emrkit/llm/client.hpp"

namespace emrkit::llm {

namespace {

class LiveBackend : public Backend {
public:
    explicit LiveBackend(LiveConfig config) : config_(std::move(config)) {
        if (config_.base_url.empty()) throw config_error("live backend requires base_url");
        if (config_.model.empty()) throw config_error("live backend requires model");
        const char* key = std::getenv(config_.api_key_env.c_str());
        if (key == nullptr || std::string(key).empty()) {
            throw environment_error("live backend requires credential in environment variable " +
                                    config_.api_key_env);
        }
        api_key_ = key;
    }

    std::string complete(const CompletionRequest& request) override {
        Json body;
        body["model"] = config_.model;
        body["messages"] = Json::array({Json{{"role", "user"}, {"content", request.prompt_text}}});
        body["temperature"] = request.temperature;
        body["max_tokens"] = config_.max_tokens;
        std::string payload = body.dump();

        httplib::Headers headers;
        headers.emplace("Authorization", "Bearer " + api_key_);
        for (const auto& [name, value] : config_.extra_headers) headers.emplace(name, value);

        std::string last_error;
        for (int attempt = 0; attempt <= config_.max_transport_retries; attempt++) {
            if (attempt > 0) {
                std::this_thread::sleep_for(std::chrono::milliseconds(250LL << (attempt - 1)));
            }
            httplib::Client http(config_.base_url);
            http.set_connection_timeout(30, 0);
            http.set_read_timeout(120, 0);
            auto response = http.Post(config_.path, headers, payload, "application/json");
            if (!response) {
                last_error = "transport failure: " + httplib::to_string(response.error());
                continue;
            }
            if (response->status == 429 || response->status >= 500) {
                last_error = "HTTP " + std::to_string(response->status) + ": " + response->body;
                continue;
            }
            if (response->status != 200) {
                throw environment_error("live backend rejected request with HTTP " +
                                        std::to_string(response->status) + ": " + response->body);
            }
            return extract_content(response->body);
        }
        throw environment_error("live backend failed after " +
                                std::to_string(config_.max_transport_retries + 1) +
                                " attempts; last error: " + last_error);
    }

    std::string name() const override { return "live"; }

private:
    static std::string extract_content(const std::string& body) {
        Json doc;
        try {
            doc = Json::parse(body);
        } catch (const std::exception& e) {
            throw environment_error(std::string("live backend returned non-JSON body: ") + e.what());
        }
        if (doc.contains("choices") && doc["choices"].is_array() && !doc["choices"].empty()) {
            const Json& first = doc["choices"][0];
            if (first.contains("message") && first["message"].contains("content")) {
                return first["message"]["content"].get<std::string>();
            }
            if (first.contains("text")) return first["text"].get<std::string>();
        }
        if (doc.contains("content") && doc["content"].is_array() && !doc["content"].empty() &&
            doc["content"][0].contains("text")) {
            return doc["content"][0]["text"].get<std::string>();
        }
        throw environment_error("live backend response has no completion content: " + body);
    }

    LiveConfig config_;
    std::string api_key_;
};

}  // namespace

std::unique_ptr<Backend> make_live_backend(const LiveConfig& config) {
    return std::make_unique<LiveBackend>(config);
}

}  // namespace emrkit::llm
