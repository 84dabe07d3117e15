#pragma once

#include <map>
#include <string>
#include <vector>

namespace emrkit::prompt {

// Free-text database documentation fed into schema-linking prompts. Either
// document may be empty, which renders as an explicit "None" marker.
struct DocumentBundle {
    std::string database_manual;
    std::string evaluation_memo;

    static DocumentBundle load(const std::string& manual_path, const std::string& memo_path);
};

using Bindings = std::map<std::string, std::string>;

// Loads prompt templates from a directory tree (subdirectory names become id
// prefixes: cfsa/sql_generation.txt -> "cfsa_sql_generation"). Placeholders
// are written {Binding_Name}; literal braces whose content is not an
// identifier pass through untouched.
class TemplateStore {
public:
    static TemplateStore load_dir(const std::string& prompts_dir);

    bool has_template(const std::string& template_id) const;
    const std::string& raw(const std::string& template_id) const;
    std::vector<std::string> template_ids() const;

    // Placeholder names in first-appearance order, deduplicated.
    std::vector<std::string> required_bindings(const std::string& template_id) const;

    // Substitutes every placeholder; a missing binding is a config error
    // naming all absent keys. Unused bindings are permitted.
    std::string render(const std::string& template_id, const Bindings& bindings) const;

private:
    std::map<std::string, std::string> templates_;
};

// Extracts {Binding_Name} placeholders from raw template text.
std::vector<std::string> extract_placeholders(const std::string& text);

}  // namespace emrkit::prompt
