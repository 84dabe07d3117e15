#pragma once

#include <string>
#include <vector>

#include "emrkit/json.hpp"

namespace emrkit::run {

// Ordered event log for one agent run. Every prompt, completion, query, and
// routing decision lands here as one JSON object; when a path is attached
// each event is also appended to the file as a JSON line immediately, so a
// crashed run still leaves a usable log.
class Transcript {
public:
    Transcript() = default;
    static Transcript to_file(const std::string& path);

    void log(const std::string& phase, Json payload = Json::object());

    const std::vector<Json>& events() const { return events_; }
    std::vector<std::string> phases() const;
    // Events of one phase, in order.
    std::vector<Json> events_of(const std::string& phase) const;

    void write_jsonl(const std::string& path) const;

private:
    std::vector<Json> events_;
    std::string path_;
    int seq_ = 0;
};

}  // namespace emrkit::run
