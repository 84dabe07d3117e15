#include "emrkit/run/transcript.hpp"

#include "emrkit/util.hpp"

namespace emrkit::run {

Transcript Transcript::to_file(const std::string& path) {
    Transcript t;
    t.path_ = path;
    util::write_file(path, "");
    return t;
}

void Transcript::log(const std::string& phase, Json payload) {
    Json event;
    event["seq"] = seq_++;
    event["phase"] = phase;
    for (auto& [key, value] : payload.items()) event[key] = value;
    if (!path_.empty()) util::append_file(path_, event.dump() + "\n");
    events_.push_back(std::move(event));
}

std::vector<std::string> Transcript::phases() const {
    std::vector<std::string> out;
    out.reserve(events_.size());
    for (const auto& e : events_) out.push_back(e.at("phase").get<std::string>());
    return out;
}

std::vector<Json> Transcript::events_of(const std::string& phase) const {
    std::vector<Json> out;
    for (const auto& e : events_) {
        if (e.at("phase").get<std::string>() == phase) out.push_back(e);
    }
    return out;
}

void Transcript::write_jsonl(const std::string& path) const {
    std::string body;
    for (const auto& e : events_) body += e.dump() + "\n";
    util::write_file(path, body);
}

}  // namespace emrkit::run
