#include "emrkit/prompt/engine.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <set>

#include "emrkit/error.hpp"
#include "emrkit/util.hpp"

namespace emrkit::prompt {

namespace {

std::string normalize_newlines(std::string text) {
    return util::replace_all(std::move(text), "\r\n", "\n");
}

bool is_placeholder_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool is_placeholder_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Scans for {Name} spans; returns (start, name) pairs. Braces whose content
// is not a bare identifier are not placeholders.
std::vector<std::pair<size_t, std::string>> scan_placeholders(const std::string& text) {
    std::vector<std::pair<size_t, std::string>> found;
    size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '{') {
            i++;
            continue;
        }
        size_t j = i + 1;
        if (j < text.size() && is_placeholder_start(text[j])) {
            size_t k = j + 1;
            while (k < text.size() && is_placeholder_char(text[k])) k++;
            if (k < text.size() && text[k] == '}') {
                found.emplace_back(i, text.substr(j, k - j));
                i = k + 1;
                continue;
            }
        }
        i++;
    }
    return found;
}

}  // namespace

std::vector<std::string> extract_placeholders(const std::string& text) {
    std::vector<std::string> names;
    std::set<std::string> seen;
    for (const auto& [pos, name] : scan_placeholders(text)) {
        (void)pos;
        if (seen.insert(name).second) names.push_back(name);
    }
    return names;
}

DocumentBundle DocumentBundle::load(const std::string& manual_path, const std::string& memo_path) {
    DocumentBundle bundle;
    if (!manual_path.empty()) {
        bundle.database_manual = util::trim(normalize_newlines(util::read_file(manual_path)));
    }
    if (!memo_path.empty()) {
        bundle.evaluation_memo = util::trim(normalize_newlines(util::read_file(memo_path)));
    }
    return bundle;
}

TemplateStore TemplateStore::load_dir(const std::string& prompts_dir) {
    namespace fs = std::filesystem;
    if (!util::dir_exists(prompts_dir)) {
        throw config_error("prompts directory does not exist: " + prompts_dir);
    }
    TemplateStore store;
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(prompts_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        fs::path relative = fs::relative(path, prompts_dir);
        std::string id;
        for (const auto& part : relative) {
            std::string piece = part.stem().string();
            if (part.has_extension() && part.extension() == ".txt") piece = part.stem().string();
            if (!id.empty()) id += "_";
            id += piece;
        }
        store.templates_[id] = normalize_newlines(util::read_file(path.string()));
    }
    if (store.templates_.empty()) {
        throw config_error("prompts directory contains no .txt templates: " + prompts_dir);
    }
    return store;
}

bool TemplateStore::has_template(const std::string& template_id) const {
    return templates_.count(template_id) > 0;
}

const std::string& TemplateStore::raw(const std::string& template_id) const {
    auto it = templates_.find(template_id);
    if (it == templates_.end()) throw config_error("unknown prompt template: " + template_id);
    return it->second;
}

std::vector<std::string> TemplateStore::template_ids() const {
    std::vector<std::string> ids;
    for (const auto& [id, body] : templates_) {
        (void)body;
        ids.push_back(id);
    }
    return ids;
}

std::vector<std::string> TemplateStore::required_bindings(const std::string& template_id) const {
    return extract_placeholders(raw(template_id));
}

std::string TemplateStore::render(const std::string& template_id, const Bindings& bindings) const {
    const std::string& body = raw(template_id);
    auto spans = scan_placeholders(body);

    std::vector<std::string> missing;
    std::set<std::string> missing_seen;
    for (const auto& [pos, name] : spans) {
        (void)pos;
        if (bindings.count(name) == 0 && missing_seen.insert(name).second) missing.push_back(name);
    }
    if (!missing.empty()) {
        throw config_error("template '" + template_id +
                           "' is missing bindings: " + util::join(missing, ", "));
    }

    std::string out;
    out.reserve(body.size());
    size_t cursor = 0;
    for (const auto& [pos, name] : spans) {
        out.append(body, cursor, pos - cursor);
        out += bindings.at(name);
        cursor = pos + name.size() + 2;
    }
    out.append(body, cursor, body.size() - cursor);
    return out;
}

}  // namespace emrkit::prompt
