#include "emrkit/parse/response.hpp"

#include <cctype>
#include <set>
#include <sstream>

#include "emrkit/error.hpp"
#include "emrkit/util.hpp"

namespace emrkit::parse {

namespace {

[[noreturn]] void fail(const std::string& message) { throw malformed_error(message); }

// Removes markdown code-fence lines (``` or ```sql) while keeping the fenced
// content itself.
std::string strip_code_fences(const std::string& text) {
    std::ostringstream out;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (util::starts_with(util::trim(line), "```")) continue;
        if (!first) out << "\n";
        out << line;
        first = false;
    }
    return out.str();
}

struct QuoteState {
    char quote = 0;  // 0, '\'' or '"'
    bool escaped = false;

    // Feeds one character; returns true while inside a quoted region.
    bool feed(char c) {
        if (quote != 0) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == quote) {
                quote = 0;
            }
            return true;
        }
        if (c == '\'' || c == '"') {
            quote = c;
            return true;
        }
        return false;
    }

    bool inside() const { return quote != 0; }
};

// Splits on a multi-character separator that only counts outside quoted
// regions. SQL-style doubled quotes inside a literal re-enter a quote region
// immediately, which yields the same split behavior.
std::vector<std::string> split_outside_quotes(const std::string& text, const std::string& sep) {
    std::vector<std::string> parts;
    QuoteState state;
    std::string current;
    size_t i = 0;
    while (i < text.size()) {
        if (!state.inside() && text.compare(i, sep.size(), sep) == 0) {
            parts.push_back(current);
            current.clear();
            i += sep.size();
            continue;
        }
        state.feed(text[i]);
        current.push_back(text[i]);
        i++;
    }
    parts.push_back(current);
    return parts;
}

}  // namespace

std::optional<std::string> parse_tagged_section(const std::string& text, const std::string& tag) {
    std::string open = "<" + tag + ">";
    std::string close = "</" + tag + ">";
    size_t start = text.find(open);
    if (start == std::string::npos) return std::nullopt;
    size_t content_begin = start + open.size();
    size_t end = text.find(close, content_begin);
    if (end == std::string::npos) {
        fail("tag <" + tag + "> opens but never closes");
    }
    size_t nested = text.find(open, content_begin);
    if (nested != std::string::npos && nested < end) {
        fail("tag <" + tag + "> is nested inside itself");
    }
    return util::trim(text.substr(content_begin, end - content_begin));
}

std::string parse_classification(const std::string& section, const std::vector<std::string>& allowed) {
    std::vector<std::string> normalized_allowed;
    normalized_allowed.reserve(allowed.size());
    for (const auto& token : allowed) normalized_allowed.push_back(util::normalize_ws_lower(token));

    std::set<size_t> found;
    size_t i = 0;
    while (i < section.size()) {
        if (section[i] != '<') {
            i++;
            continue;
        }
        size_t end = section.find('>', i + 1);
        if (end == std::string::npos) break;
        std::string inner = util::normalize_ws_lower(section.substr(i + 1, end - i - 1));
        for (size_t t = 0; t < normalized_allowed.size(); t++) {
            if (inner == normalized_allowed[t]) found.insert(t);
        }
        i = end + 1;
    }

    if (found.empty()) {
        fail("no classification token found; expected one of: " + util::join(allowed, ", "));
    }
    if (found.size() > 1) {
        fail("multiple classification tokens present; expected exactly one of: " +
             util::join(allowed, ", "));
    }
    return allowed[*found.begin()];
}

std::vector<std::string> parse_sql_queries(const std::string& section, int max_queries) {
    std::string body = strip_code_fences(section);
    std::vector<std::string> queries;
    for (const std::string& part : split_outside_quotes(body, "||")) {
        std::string q = util::trim(part);
        while (!q.empty() && q.back() == ';') q = util::trim(q.substr(0, q.size() - 1));
        if (q.empty()) continue;
        queries.push_back(q);
    }
    if (max_queries > 0 && static_cast<int>(queries.size()) > max_queries) {
        throw budget_error("completion contains " + std::to_string(queries.size()) +
                           " SQL queries but at most " + std::to_string(max_queries) + " are allowed");
    }
    return queries;
}

namespace {

struct Cursor {
    const std::string& text;
    size_t pos = 0;

    bool done() const { return pos >= text.size(); }
    char peek() const { return text[pos]; }
    void skip_ws() {
        while (!done() && std::isspace(static_cast<unsigned char>(text[pos]))) pos++;
    }
};

std::string read_quoted(Cursor& c) {
    char quote = c.peek();
    c.pos++;
    std::string out;
    while (true) {
        if (c.done()) fail("unterminated quoted string in tuple");
        char ch = c.text[c.pos];
        if (ch == '\\' && c.pos + 1 < c.text.size()) {
            out.push_back(c.text[c.pos + 1]);
            c.pos += 2;
            continue;
        }
        if (ch == quote) {
            if (c.pos + 1 < c.text.size() && c.text[c.pos + 1] == quote) {
                out.push_back(quote);
                c.pos += 2;
                continue;
            }
            c.pos++;
            return out;
        }
        out.push_back(ch);
        c.pos++;
    }
}

CandidateTuple read_tuple(Cursor& c) {
    c.skip_ws();
    if (c.done() || c.peek() != '(') fail("expected '(' to start a candidate tuple");
    c.pos++;
    CandidateTuple tuple;
    while (true) {
        c.skip_ws();
        if (c.done()) fail("unterminated candidate tuple");
        if (c.peek() == ')') {
            c.pos++;
            break;
        }
        if (c.peek() == '\'' || c.peek() == '"') {
            tuple.elements.push_back(read_quoted(c));
        } else {
            fail("tuple elements must be quoted strings");
        }
        c.skip_ws();
        if (!c.done() && c.peek() == ',') c.pos++;
    }
    if (tuple.elements.empty() || tuple.elements.size() > 3) {
        fail("candidate tuple must have 1 to 3 elements, got " +
             std::to_string(tuple.elements.size()));
    }
    return tuple;
}

int read_score(const std::string& text) {
    std::string t = util::trim(text);
    if (t.empty()) fail("similarity score is empty");
    for (char ch : t) {
        if (!std::isdigit(static_cast<unsigned char>(ch))) {
            fail("similarity score must be an integer, got '" + t + "'");
        }
    }
    auto value = util::parse_int(t);
    if (!value.has_value() || *value < 0 || *value > 100) {
        fail("similarity score out of range 0-100: '" + t + "'");
    }
    return static_cast<int>(*value);
}

// Finds the position of the first occurrence of target at quote-depth zero.
size_t find_outside_quotes(const std::string& text, char target) {
    QuoteState state;
    for (size_t i = 0; i < text.size(); i++) {
        if (!state.inside() && text[i] == target) return i;
        state.feed(text[i]);
    }
    return std::string::npos;
}

void parse_similarity_entry(const std::string& entry, SimilarityMap& map) {
    std::string feature;
    std::string body = entry;

    size_t brace = find_outside_quotes(entry, '{');
    if (brace != std::string::npos) {
        feature = util::trim(entry.substr(0, brace));
        if (!feature.empty() && feature.back() == ':') feature = util::trim(feature.substr(0, feature.size() - 1));
        size_t close = entry.rfind('}');
        if (close == std::string::npos || close < brace) fail("similarity dictionary brace never closes");
        body = entry.substr(brace + 1, close - brace - 1);
    } else {
        size_t paren = find_outside_quotes(entry, '(');
        if (paren == std::string::npos) fail("similarity entry contains no candidate tuple");
        std::string prefix = util::trim(entry.substr(0, paren));
        if (!prefix.empty()) {
            if (prefix.back() != ':') fail("similarity entry prefix must end with ':'");
            feature = util::trim(prefix.substr(0, prefix.size() - 1));
            if (feature.empty()) fail("similarity entry has an empty feature name");
        }
        body = entry.substr(paren);
    }

    auto& pairs = map[feature];
    std::set<CandidateTuple> seen;
    for (const auto& existing : pairs) seen.insert(existing.first);

    for (const std::string& pair_text : split_outside_quotes(body, "||")) {
        std::string p = util::trim(pair_text);
        if (p.empty()) continue;
        Cursor cursor{p, 0};
        CandidateTuple tuple = read_tuple(cursor);
        cursor.skip_ws();
        if (cursor.done() || cursor.peek() != ':') fail("expected ':' after candidate tuple");
        cursor.pos++;
        int score = read_score(p.substr(cursor.pos));
        if (!seen.insert(tuple).second) {
            fail("duplicate candidate tuple " + tuple.render() + " for feature '" + feature + "'");
        }
        pairs.emplace_back(std::move(tuple), score);
    }
    if (pairs.empty()) map.erase(feature);
}

}  // namespace

SimilarityMap parse_similarity_map(const std::string& section) {
    SimilarityMap map;
    std::string body = util::trim(strip_code_fences(section));
    if (body.empty()) return map;
    for (const std::string& entry : split_outside_quotes(body, ";")) {
        std::string e = util::trim(entry);
        if (e.empty()) continue;
        parse_similarity_entry(e, map);
    }
    return map;
}

FeatureColumnAnswer parse_feature_column(const std::string& section) {
    FeatureColumnAnswer answer;
    std::string body = util::trim(strip_code_fences(section));
    if (body.empty()) fail("feature column section is empty");
    if (util::normalize_ws_lower(body) == "none") {
        answer.none = true;
        return answer;
    }
    for (const std::string& part : split_outside_quotes(body, "||")) {
        std::string p = util::trim(part);
        if (p.empty()) fail("feature column list contains an empty item");
        std::vector<std::string> segments = util::split(p, '.');
        if (segments.size() != 3) {
            fail("feature column must be SchemaName.TableName.ColumnName, got '" + p + "'");
        }
        ColumnRef ref;
        ref.schema_name = util::trim(segments[0]);
        ref.table_name = util::trim(segments[1]);
        ref.column_name = util::trim(segments[2]);
        if (ref.schema_name.empty() || ref.table_name.empty() || ref.column_name.empty()) {
            fail("feature column has an empty path segment: '" + p + "'");
        }
        answer.columns.push_back(std::move(ref));
    }
    if (answer.columns.empty()) fail("feature column section names no columns");
    return answer;
}

namespace {

// Splits an entry body on commas that sit outside [...] value lists.
std::vector<std::string> split_entry_pieces(const std::string& text) {
    std::vector<std::string> pieces;
    std::string current;
    int bracket_depth = 0;
    for (char c : text) {
        if (c == '[') bracket_depth++;
        if (c == ']') bracket_depth = bracket_depth > 0 ? bracket_depth - 1 : 0;
        if (c == ',' && bracket_depth == 0) {
            pieces.push_back(current);
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    pieces.push_back(current);
    return pieces;
}

std::vector<std::string> parse_value_list(const std::string& text) {
    std::string t = util::trim(text);
    size_t open = t.find('[');
    size_t close = t.rfind(']');
    if (open == std::string::npos || close == std::string::npos || close < open) {
        fail("Values list must be enclosed in brackets: '" + text + "'");
    }
    std::vector<std::string> values;
    for (const std::string& raw : util::split(t.substr(open + 1, close - open - 1), ',')) {
        std::string v = util::trim(raw);
        if (v.size() >= 2 && ((v.front() == '\'' && v.back() == '\'') || (v.front() == '"' && v.back() == '"'))) {
            v = v.substr(1, v.size() - 2);
        }
        if (!v.empty()) values.push_back(v);
    }
    return values;
}

bool prefix_label(const std::string& line, const std::string& label, std::string& rest) {
    std::string lowered = util::lower(line);
    std::string wanted = util::lower(label);
    if (util::starts_with(lowered, wanted)) {
        rest = util::trim(line.substr(label.size()));
        if (!rest.empty() && rest.front() == ':') rest = util::trim(rest.substr(1));
        return true;
    }
    return false;
}

LinkedTable parse_table_entry(const std::string& body, bool is_mapping, const std::string& label) {
    LinkedTable table;
    table.is_mapping = is_mapping;
    table.feature_label = label;

    std::vector<std::string> pieces = split_entry_pieces(body);
    if (pieces.empty()) fail("schema linking table entry is empty");
    table.qualified_name = util::trim(pieces[0]);
    if (table.qualified_name.empty()) fail("schema linking table entry lacks a table name");

    bool in_column_list = false;
    for (size_t i = 1; i < pieces.size(); i++) {
        std::string piece = util::trim(pieces[i]);
        if (piece.empty()) continue;
        std::string rest;
        if (prefix_label(piece, "Columns", rest)) {
            in_column_list = true;
            if (!rest.empty()) table.columns.push_back({rest, {}});
        } else if (prefix_label(piece, "Column", rest)) {
            in_column_list = false;
            if (rest.empty()) fail("Column label without a column name");
            table.columns.push_back({rest, {}});
        } else if (prefix_label(piece, "Values", rest)) {
            in_column_list = false;
            if (table.columns.empty()) fail("Values list appears before any column");
            table.columns.back().values = parse_value_list(piece);
        } else if (in_column_list) {
            table.columns.push_back({piece, {}});
        } else {
            table.columns.push_back({piece, {}});
        }
    }
    return table;
}

SchemaLinkingResult parse_labeled_schema(const std::string& text) {
    SchemaLinkingResult result;
    std::istringstream in(text);
    std::string line;
    std::string current_label;
    std::string pending_entry;
    bool pending_mapping = false;
    bool in_entry = false;
    std::vector<std::string> guideline_lines;
    bool in_guideline = false;

    auto flush_entry = [&]() {
        if (in_entry) {
            result.schema.tables.push_back(parse_table_entry(pending_entry, pending_mapping, current_label));
            pending_entry.clear();
            in_entry = false;
        }
    };

    while (std::getline(in, line)) {
        std::string trimmed = util::trim(line);
        if (in_guideline) {
            guideline_lines.push_back(line);
            continue;
        }
        if (trimmed.empty()) {
            flush_entry();
            continue;
        }
        std::string rest;
        if (prefix_label(trimmed, "[Schema Guideline]", rest)) {
            flush_entry();
            in_guideline = true;
            if (!rest.empty()) guideline_lines.push_back(rest);
            continue;
        }
        if (prefix_label(trimmed, "Mapping Table", rest)) {
            flush_entry();
            pending_entry = rest;
            pending_mapping = true;
            in_entry = true;
            continue;
        }
        if (prefix_label(trimmed, "Table Name", rest)) {
            flush_entry();
            pending_entry = rest;
            pending_mapping = false;
            in_entry = true;
            continue;
        }
        if (trimmed.front() == '[' && trimmed.back() == ']') {
            flush_entry();
            current_label = util::trim(trimmed.substr(1, trimmed.size() - 2));
            continue;
        }
        if (in_entry) {
            pending_entry += " " + trimmed;
            continue;
        }
        // Prose outside any entry (e.g. leading commentary) is ignored.
    }
    flush_entry();

    result.guideline = util::trim(util::join(guideline_lines, "\n"));
    if (result.schema.tables.empty()) {
        fail("schema linking output contains no table lines");
    }
    return result;
}

}  // namespace

SchemaLinkingResult parse_schema_linking(const std::string& completion) {
    std::string body = strip_code_fences(completion);
    std::optional<std::string> tagged = parse_tagged_section(body, "selected schema");
    if (tagged.has_value()) {
        SchemaLinkingResult result = parse_labeled_schema(*tagged);
        std::optional<std::string> guideline = parse_tagged_section(body, "schema guideline");
        result.guideline = guideline.has_value() ? *guideline : "";
        return result;
    }
    // Drop a leading <think> section when present so its prose cannot be
    // mistaken for table lines.
    std::optional<std::string> think = parse_tagged_section(body, "think");
    if (think.has_value()) {
        size_t end = body.find("</think>");
        body = body.substr(end + std::string("</think>").size());
    }
    return parse_labeled_schema(body);
}

ErrorClass parse_error_class(const std::string& section) {
    std::string token = parse_classification(section, {"syntax error", "wrong schema"});
    return token == "syntax error" ? ErrorClass::SyntaxError : ErrorClass::WrongSchema;
}

std::string LinkedTable::table_name() const {
    size_t dot = qualified_name.rfind('.');
    return dot == std::string::npos ? qualified_name : qualified_name.substr(dot + 1);
}

std::string CandidateTuple::render() const {
    std::string out = "(";
    for (size_t i = 0; i < elements.size(); i++) {
        if (i > 0) out += ", ";
        out += "'";
        for (char c : elements[i]) {
            if (c == '\'' || c == '\\') out.push_back('\\');
            out.push_back(c);
        }
        out += "'";
    }
    if (elements.size() == 1) out += ",";
    out += ")";
    return out;
}

std::string LinkedSchema::render_text() const {
    std::ostringstream out;
    std::string last_label;
    for (const auto& table : tables) {
        if (!table.feature_label.empty() && table.feature_label != last_label) {
            out << "[" << table.feature_label << "]\n";
            last_label = table.feature_label;
        }
        out << (table.is_mapping ? "Mapping Table: " : "Table Name: ") << table.qualified_name;
        bool any_values = false;
        for (const auto& col : table.columns) {
            if (!col.values.empty()) any_values = true;
        }
        if (!any_values) {
            out << " , Columns: ";
            for (size_t i = 0; i < table.columns.size(); i++) {
                if (i > 0) out << ", ";
                out << table.columns[i].name;
            }
        } else {
            for (const auto& col : table.columns) {
                out << " , Column: " << col.name;
                if (!col.values.empty()) {
                    out << ", Values: [";
                    for (size_t i = 0; i < col.values.size(); i++) {
                        if (i > 0) out << ", ";
                        out << col.values[i];
                    }
                    out << "]";
                }
            }
        }
        out << "\n";
    }
    return out.str();
}

std::vector<const LinkedTable*> LinkedSchema::mapping_tables() const {
    std::vector<const LinkedTable*> out;
    for (const auto& t : tables) {
        if (t.is_mapping) out.push_back(&t);
    }
    return out;
}

std::vector<const LinkedTable*> LinkedSchema::feature_tables() const {
    std::vector<const LinkedTable*> out;
    for (const auto& t : tables) {
        if (!t.is_mapping) out.push_back(&t);
    }
    return out;
}

}  // namespace emrkit::parse
