#pragma once

#include <optional>
#include <string>
#include <vector>

namespace emrkit {

// Value kinds a requested feature column may demand. Enum kinds carry their
// admissible tokens; FloatRounded carries the decimal precision that rendered
// values must already be rounded to.
enum class ValueKind {
    Identifier,
    GenderEnum,     // Male | Female | Unknown
    MortalityEnum,  // Dead | Alive | Unknown
    Integer,
    FloatRounded
};

struct FeatureFormat {
    std::string feature_name;
    ValueKind kind = ValueKind::Identifier;
    int decimals = 0;  // only meaningful for FloatRounded

    bool value_matches(const std::string& raw) const;
    // Kind-specific canonical form used when comparing predicted values
    // against gold values ("30.0" and "30.0000" agree under FloatRounded).
    std::optional<std::string> canonical(const std::string& raw) const;
    std::string kind_name() const;
};

struct FeatureFormatSpec {
    std::vector<FeatureFormat> features;

    size_t column_count() const { return features.size(); }
    std::vector<std::string> header() const;

    // Derives the spec from a natural-language feature selection such as
    // "ICU-stay id, gender (Male/Female/Unknown), age (integer),
    //  length of stay (hours, rounded to 4 decimals in float format)".
    // Parenthetical hints pick the kind; the leading feature defaults to an
    // identifier, everything else without a hint to Identifier as well.
    static FeatureFormatSpec from_feature_text(const std::string& feature_selection);
};

}  // namespace emrkit
