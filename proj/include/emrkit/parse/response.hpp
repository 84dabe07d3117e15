#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace emrkit::parse {

// One table chosen during schema linking, with optional per-column sample
// values and an optional feature-group label from the linking output.
struct LinkedColumn {
    std::string name;
    std::vector<std::string> values;
};

struct LinkedTable {
    std::string qualified_name;  // usually dbname.table
    std::vector<LinkedColumn> columns;
    bool is_mapping = false;
    std::string feature_label;

    std::string table_name() const;  // qualified name without the db prefix
};

struct LinkedSchema {
    std::vector<LinkedTable> tables;
    std::string render_text() const;
    std::vector<const LinkedTable*> mapping_tables() const;
    std::vector<const LinkedTable*> feature_tables() const;
};

struct SchemaLinkingResult {
    LinkedSchema schema;
    std::string guideline;
};

// Candidate tuple as parsed from a similarity map or built from a candidate
// listing row: 1-3 elements whose meaning is resolved by the caller.
struct CandidateTuple {
    std::vector<std::string> elements;

    std::string render() const;  // python-style tuple text
    bool operator==(const CandidateTuple& other) const { return elements == other.elements; }
    bool operator<(const CandidateTuple& other) const { return elements < other.elements; }
};

// feature name -> (tuple, score) pairs; the anonymous form (no feature
// prefix) is keyed by the empty string.
using SimilarityMap = std::map<std::string, std::vector<std::pair<CandidateTuple, int>>>;

struct ColumnRef {
    std::string schema_name;
    std::string table_name;
    std::string column_name;

    std::string render() const { return schema_name + "." + table_name + "." + column_name; }
    bool operator==(const ColumnRef& other) const {
        return schema_name == other.schema_name && table_name == other.table_name &&
               column_name == other.column_name;
    }
};

// Either a list of located columns or the explicit None marker.
struct FeatureColumnAnswer {
    bool none = false;
    std::vector<ColumnRef> columns;
};

enum class ErrorClass { SyntaxError, WrongSchema };

// Extracts the content between <tag> and </tag>, delimiters excluded and
// surrounding whitespace trimmed. Returns nullopt when the tag is absent;
// throws a malformed-response error when the tag opens without closing or
// nests itself.
std::optional<std::string> parse_tagged_section(const std::string& text, const std::string& tag);

// Finds exactly one of the allowed bracketed tokens, tolerating case and
// internal whitespace differences. Zero or several distinct tokens present is
// a malformed-response error.
std::string parse_classification(const std::string& section, const std::vector<std::string>& allowed);

// Splits on the || separator outside quoted literals, strips code fences and
// surrounding noise, drops empty items. More than max_queries statements is a
// budget error.
std::vector<std::string> parse_sql_queries(const std::string& section, int max_queries);

// Parses `Feature: {(tuple): score|| ...}; ...`; braces and the feature
// prefix are optional (the anonymous form is keyed by ""). Scores must be
// integers 0-100; a duplicate tuple under one feature is malformed.
SimilarityMap parse_similarity_map(const std::string& section);

// Parses the located-column answer: either None or ||-separated three-part
// dotted names.
FeatureColumnAnswer parse_feature_column(const std::string& section);

// Parses schema-linking output in both forms: labeled lines
// ("Mapping Table: ..." / "Table Name: ...", optional [Feature name] group
// headers, "[Schema Guideline]: ..." trailer) and the tagged form
// (<selected schema> + <schema guideline>). No table lines is malformed.
SchemaLinkingResult parse_schema_linking(const std::string& completion);

ErrorClass parse_error_class(const std::string& section);

}  // namespace emrkit::parse
