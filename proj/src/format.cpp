#include "emrkit/format.hpp"

#include <cmath>

#include "emrkit/error.hpp"
#include "emrkit/util.hpp"

namespace emrkit {

namespace {

bool is_gender_token(const std::string& v) { return v == "Male" || v == "Female" || v == "Unknown"; }
bool is_mortality_token(const std::string& v) { return v == "Dead" || v == "Alive" || v == "Unknown"; }

}  // namespace

bool FeatureFormat::value_matches(const std::string& raw) const {
    std::string v = util::trim(raw);
    if (v.empty() || v == "NULL") return false;
    switch (kind) {
        case ValueKind::Identifier:
            return true;
        case ValueKind::GenderEnum:
            return is_gender_token(v);
        case ValueKind::MortalityEnum:
            return is_mortality_token(v);
        case ValueKind::Integer:
            return util::parse_int(v).has_value();
        case ValueKind::FloatRounded: {
            auto parsed = util::parse_real(v);
            if (!parsed) return false;
            double scale = std::pow(10.0, decimals);
            double rounded = std::round(*parsed * scale) / scale;
            return std::fabs(rounded - *parsed) < 1e-9;
        }
    }
    return false;
}

std::optional<std::string> FeatureFormat::canonical(const std::string& raw) const {
    std::string v = util::trim(raw);
    if (!value_matches(v)) return std::nullopt;
    switch (kind) {
        case ValueKind::Identifier:
        case ValueKind::GenderEnum:
        case ValueKind::MortalityEnum:
            return v;
        case ValueKind::Integer:
            return std::to_string(*util::parse_int(v));
        case ValueKind::FloatRounded:
            return util::format_decimal(*util::parse_real(v), decimals);
    }
    return std::nullopt;
}

std::string FeatureFormat::kind_name() const {
    switch (kind) {
        case ValueKind::Identifier: return "identifier";
        case ValueKind::GenderEnum: return "gender";
        case ValueKind::MortalityEnum: return "mortality";
        case ValueKind::Integer: return "integer";
        case ValueKind::FloatRounded: return "float" + std::to_string(decimals);
    }
    return "unknown";
}

std::vector<std::string> FeatureFormatSpec::header() const {
    std::vector<std::string> out;
    out.reserve(features.size());
    for (const auto& f : features) out.push_back(f.feature_name);
    return out;
}

FeatureFormatSpec FeatureFormatSpec::from_feature_text(const std::string& feature_selection) {
    // Split on commas that sit outside parentheses; each part is one feature.
    std::vector<std::string> parts;
    std::string current;
    int depth = 0;
    for (char c : feature_selection) {
        if (c == '(') depth++;
        if (c == ')') depth = depth > 0 ? depth - 1 : 0;
        if (c == ',' && depth == 0) {
            parts.push_back(current);
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    parts.push_back(current);

    FeatureFormatSpec spec;
    for (const std::string& part : parts) {
        std::string text = util::trim(part);
        if (text.empty()) continue;
        std::string hint;
        std::string name = text;
        size_t open = text.find('(');
        if (open != std::string::npos) {
            size_t close = text.rfind(')');
            hint = util::lower(text.substr(open + 1, close == std::string::npos ? std::string::npos
                                                                                : close - open - 1));
            name = util::trim(text.substr(0, open));
        }
        FeatureFormat fmt;
        fmt.feature_name = name;
        if (hint.find("male") != std::string::npos || hint.find("female") != std::string::npos) {
            fmt.kind = ValueKind::GenderEnum;
        } else if (hint.find("dead") != std::string::npos || hint.find("alive") != std::string::npos) {
            fmt.kind = ValueKind::MortalityEnum;
        } else if (hint.find("integer") != std::string::npos || hint.find("int") == 0) {
            fmt.kind = ValueKind::Integer;
        } else if (hint.find("decimal") != std::string::npos || hint.find("float") != std::string::npos) {
            fmt.kind = ValueKind::FloatRounded;
            fmt.decimals = 4;
            size_t kw = hint.find("decimal");
            if (kw != std::string::npos) {
                size_t end = kw;
                while (end > 0 && std::isspace(static_cast<unsigned char>(hint[end - 1]))) end--;
                size_t begin = end;
                while (begin > 0 && std::isdigit(static_cast<unsigned char>(hint[begin - 1]))) begin--;
                if (begin < end) {
                    fmt.decimals = static_cast<int>(*util::parse_int(hint.substr(begin, end - begin)));
                }
            }
            if (fmt.decimals <= 0) fmt.decimals = 4;
        } else {
            fmt.kind = ValueKind::Identifier;
        }
        spec.features.push_back(fmt);
    }
    if (spec.features.empty()) {
        throw config_error("feature selection text yields no features: " + feature_selection);
    }
    return spec;
}

}  // namespace emrkit
