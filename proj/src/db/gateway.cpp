#include "emrkit/db/gateway.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <mutex>
#include <set>
#include <sstream>

#include "emrkit/error.hpp"
#include "emrkit/json.hpp"
#include "emrkit/util.hpp"

namespace emrkit::db {

namespace {

struct Descriptor {
    enum class Scheme { Sqlite, Postgres, Unknown };
    Scheme scheme = Scheme::Unknown;
    std::string path;
    std::string raw;
};

Descriptor parse_descriptor(const std::string& text) {
    Descriptor d;
    d.raw = text;
    std::string t = util::trim(text);
    if (t.empty()) throw config_error("empty database descriptor");
    size_t colon = t.find(':');
    std::string scheme;
    if (colon != std::string::npos && colon > 0 && t[0] != '/' && t[0] != '.') {
        scheme = util::lower(t.substr(0, colon));
        bool plausible = true;
        for (char c : scheme) {
            if (!std::isalnum(static_cast<unsigned char>(c)) && c != '+' && c != '-' && c != '.') {
                plausible = false;
                break;
            }
        }
        if (!plausible) scheme.clear();
    }
    if (scheme == "sqlite" || scheme == "sqlite3") {
        d.scheme = Descriptor::Scheme::Sqlite;
        d.path = t.substr(colon + 1);
        if (util::starts_with(d.path, "//")) d.path = d.path.substr(2);
    } else if (scheme == "postgres" || scheme == "postgresql") {
        d.scheme = Descriptor::Scheme::Postgres;
    } else if (scheme.empty()) {
        d.scheme = Descriptor::Scheme::Sqlite;
        d.path = t;
    } else {
        d.scheme = Descriptor::Scheme::Unknown;
    }
    return d;
}

std::string database_name_from_path(const std::string& path) {
    if (path == ":memory:") return "main";
    std::string base = path;
    size_t slash = base.find_last_of('/');
    if (slash != std::string::npos) base = base.substr(slash + 1);
    size_t dot = base.find_last_of('.');
    if (dot != std::string::npos && dot > 0) base = base.substr(0, dot);
    return base.empty() ? "main" : base;
}

int readonly_authorizer(void*, int action, const char*, const char*, const char*, const char*) {
    switch (action) {
        case SQLITE_SELECT:
        case SQLITE_READ:
        case SQLITE_FUNCTION:
        case SQLITE_RECURSIVE:
        case SQLITE_PRAGMA:
            return SQLITE_OK;
        default:
            return SQLITE_DENY;
    }
}

std::string render_column_value(sqlite3_stmt* stmt, int col) {
    if (sqlite3_column_type(stmt, col) == SQLITE_NULL) return "NULL";
    const unsigned char* text = sqlite3_column_text(stmt, col);
    return text != nullptr ? reinterpret_cast<const char*>(text) : "";
}

std::string quote_identifier(const std::string& name) {
    std::string out = "\"";
    for (char c : name) {
        out.push_back(c);
        if (c == '"') out.push_back('"');
    }
    out.push_back('"');
    return out;
}

bool is_float_type(const std::string& declared) {
    std::string t = util::lower(declared);
    return t.find("real") != std::string::npos || t.find("floa") != std::string::npos ||
           t.find("doub") != std::string::npos || t.find("numeric") != std::string::npos ||
           t.find("decimal") != std::string::npos;
}

bool is_text_type(const std::string& declared) {
    std::string t = util::lower(declared);
    return t.find("char") != std::string::npos || t.find("text") != std::string::npos ||
           t.find("clob") != std::string::npos;
}

}  // namespace

struct Session::Impl {
    sqlite3* handle = nullptr;
    std::mutex mutex;

    ~Impl() {
        if (handle != nullptr) sqlite3_close_v2(handle);
    }
};

Session::~Session() = default;
Session::Session(Session&&) noexcept = default;
Session& Session::operator=(Session&&) noexcept = default;

Session connect(const std::string& descriptor) {
    Descriptor d = parse_descriptor(descriptor);
    if (d.scheme == Descriptor::Scheme::Postgres) {
        throw environment_error(
            "PostgreSQL descriptor given but no PostgreSQL client library is linked into this "
            "build; provision the fixture into SQLite and use a sqlite: descriptor");
    }
    if (d.scheme == Descriptor::Scheme::Unknown) {
        throw config_error("unsupported database descriptor scheme: " + d.raw);
    }
    if (d.path != ":memory:" && !util::file_exists(d.path)) {
        throw environment_error("database file does not exist: " + d.path);
    }

    Session session;
    session.impl_ = std::make_unique<Session::Impl>();
    session.descriptor_ = descriptor;
    session.database_name_ = database_name_from_path(d.path);

    int flags = SQLITE_OPEN_READONLY | SQLITE_OPEN_FULLMUTEX;
    if (d.path == ":memory:") flags = SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX;
    sqlite3* handle = nullptr;
    int rc = sqlite3_open_v2(d.path.c_str(), &handle, flags, nullptr);
    if (rc != SQLITE_OK) {
        std::string message = handle != nullptr ? sqlite3_errmsg(handle) : sqlite3_errstr(rc);
        if (handle != nullptr) sqlite3_close_v2(handle);
        throw environment_error("cannot open database " + d.path + ": " + message);
    }
    sqlite3_set_authorizer(handle, readonly_authorizer, nullptr);
    sqlite3_busy_timeout(handle, 5000);
    session.impl_->handle = handle;
    return session;
}

// Internal accessor so free functions in this translation unit can reach the
// sqlite handle without widening the public surface.
class SessionAccess {
public:
    static sqlite3* handle(Session& s) { return s.impl_->handle; }
    static std::mutex& mutex(Session& s) { return s.impl_->mutex; }
};

namespace {

struct PreparedStatement {
    sqlite3_stmt* stmt = nullptr;
    ~PreparedStatement() {
        if (stmt != nullptr) sqlite3_finalize(stmt);
    }
};

// Vets an agent-supplied statement: exactly one statement, SELECT/WITH only.
// Returns an error message, or empty when the statement is acceptable.
std::string vet_statement(const std::string& sql) {
    std::string body = util::trim(sql);
    while (!body.empty() && body.back() == ';') body = util::trim(body.substr(0, body.size() - 1));
    if (body.empty()) return "empty SQL statement";
    std::string head = util::lower(body.substr(0, body.find_first_of(" \t\r\n(")));
    if (head != "select" && head != "with") {
        return "read-only session: only SELECT or WITH statements are allowed, got '" + head + "'";
    }
    return "";
}

QueryOutcome run_query(Session& session, const std::string& sql, int row_cap,
                       const std::function<void(const std::vector<std::string>&)>* on_row,
                       bool vet = true) {
    QueryOutcome outcome;
    if (vet) {
        std::string vet_message = vet_statement(sql);
        if (!vet_message.empty()) {
            outcome.error_message = vet_message;
            return outcome;
        }
    }

    std::lock_guard<std::mutex> lock(SessionAccess::mutex(session));
    sqlite3* handle = SessionAccess::handle(session);
    PreparedStatement prepared;
    const char* tail = nullptr;
    int rc = sqlite3_prepare_v2(handle, sql.c_str(), -1, &prepared.stmt, &tail);
    if (rc != SQLITE_OK) {
        outcome.error_message = sqlite3_errmsg(handle);
        return outcome;
    }
    if (prepared.stmt == nullptr) {
        outcome.error_message = "statement contains no SQL";
        return outcome;
    }
    if (tail != nullptr) {
        std::string rest = util::trim(tail);
        while (!rest.empty() && rest.front() == ';') rest = util::trim(rest.substr(1));
        if (!rest.empty()) {
            outcome.error_message = "only a single SQL statement is allowed per call";
            return outcome;
        }
    }
    if (sqlite3_stmt_readonly(prepared.stmt) == 0) {
        outcome.error_message = "statement is not read-only";
        return outcome;
    }

    QueryResult result;
    result.row_cap = row_cap;
    int column_count = sqlite3_column_count(prepared.stmt);
    for (int i = 0; i < column_count; i++) {
        const char* name = sqlite3_column_name(prepared.stmt, i);
        result.columns.push_back(name != nullptr ? name : "");
    }

    while (true) {
        rc = sqlite3_step(prepared.stmt);
        if (rc == SQLITE_DONE) break;
        if (rc != SQLITE_ROW) {
            outcome.error_message = sqlite3_errmsg(handle);
            return outcome;
        }
        if (row_cap > 0 && static_cast<int>(result.rows.size()) >= row_cap) {
            result.truncated = true;
            break;
        }
        std::vector<std::string> row;
        row.reserve(column_count);
        for (int i = 0; i < column_count; i++) row.push_back(render_column_value(prepared.stmt, i));
        if (on_row != nullptr) {
            (*on_row)(row);
        } else {
            result.rows.push_back(std::move(row));
        }
    }

    outcome.result = std::move(result);
    return outcome;
}

}  // namespace

QueryOutcome execute_observation(Session& session, const std::string& sql, int row_cap) {
    if (row_cap <= 0) throw internal_error("observation row cap must be positive");
    return run_query(session, sql, row_cap, nullptr);
}

QueryOutcome execute_final(Session& session, const std::string& sql,
                           const std::function<void(const std::vector<std::string>&)>& on_row) {
    return run_query(session, sql, 0, &on_row);
}

QueryOutcome execute_final_all(Session& session, const std::string& sql) {
    return run_query(session, sql, 0, nullptr);
}

namespace {

// Gateway-internal queries (PRAGMA introspection) bypass the SELECT/WITH vet
// but still run under the read-only authorizer.
QueryOutcome run_trusted(Session& session, const std::string& sql) {
    return run_query(session, sql, 0, nullptr, false);
}

std::vector<std::string> table_names(Session& session) {
    QueryOutcome outcome = run_trusted(
        session,
        "SELECT name FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite_%' "
        "ORDER BY name");
    if (!outcome.ok()) throw environment_error("schema listing failed: " + outcome.error_message);
    std::vector<std::string> names;
    for (const auto& row : outcome.result->rows) names.push_back(row[0]);
    return names;
}

std::vector<std::string> sample_column(Session& session, const std::string& table,
                                       const std::string& column, int limit,
                                       const std::string& order_clause) {
    // First-occurrence distinct values under a fixed traversal order; the scan
    // is bounded because fixtures are small and the loop stops at the limit.
    std::string sql = "SELECT " + quote_identifier(column) + " FROM " + quote_identifier(table) +
                      " ORDER BY " + order_clause;
    std::vector<std::string> samples;
    std::set<std::string> seen;
    std::lock_guard<std::mutex> lock(SessionAccess::mutex(session));
    sqlite3* handle = SessionAccess::handle(session);
    PreparedStatement prepared;
    int rc = sqlite3_prepare_v2(handle, sql.c_str(), -1, &prepared.stmt, nullptr);
    if (rc != SQLITE_OK) throw environment_error(std::string("sample query failed: ") + sqlite3_errmsg(handle));
    while (static_cast<int>(samples.size()) < limit) {
        rc = sqlite3_step(prepared.stmt);
        if (rc == SQLITE_DONE) break;
        if (rc != SQLITE_ROW) {
            throw environment_error(std::string("sample scan failed: ") + sqlite3_errmsg(handle));
        }
        std::string value = render_column_value(prepared.stmt, 0);
        if (seen.insert(value).second) samples.push_back(value);
    }
    return samples;
}

}  // namespace

SchemaSnapshot introspect_schema(Session& session, int samples_per_column) {
    if (samples_per_column < 0) throw config_error("samples_per_column must be non-negative");
    SchemaSnapshot snapshot;
    snapshot.database_name = session.database_name();
    snapshot.samples_per_column = samples_per_column;

    for (const std::string& table : table_names(session)) {
        TableInfo info;
        info.name = table;

        QueryOutcome columns = run_trusted(session, "PRAGMA table_info(" + quote_identifier(table) + ")");
        if (!columns.ok()) throw environment_error("table_info failed for " + table + ": " + columns.error_message);

        bool has_rowid = true;
        {
            QueryOutcome probe = execute_observation(session, "SELECT rowid FROM " + quote_identifier(table), 1);
            has_rowid = probe.ok();
        }
        std::string order_clause = "rowid";
        if (!has_rowid && !columns.result->rows.empty()) {
            order_clause = quote_identifier(columns.result->rows[0][1]);
        }

        for (const auto& row : columns.result->rows) {
            // PRAGMA table_info columns: cid, name, type, notnull, dflt_value, pk
            ColumnInfo col;
            col.name = row[1];
            col.declared_type = row[2];
            col.not_null = row[3] != "0";
            col.primary_key = row[5] != "0";
            if (samples_per_column > 0) {
                col.sample_values = sample_column(session, table, col.name, samples_per_column, order_clause);
            }
            info.columns.push_back(std::move(col));
        }

        QueryOutcome count = execute_final_all(session, "SELECT COUNT(*) FROM " + quote_identifier(table));
        if (!count.ok()) throw environment_error("row count failed for " + table + ": " + count.error_message);
        info.row_count = util::parse_int(count.result->rows[0][0]).value_or(0);

        QueryOutcome fks = run_trusted(session, "PRAGMA foreign_key_list(" + quote_identifier(table) + ")");
        if (fks.ok() && fks.result.has_value()) {
            for (const auto& row : fks.result->rows) {
                // foreign_key_list columns: id, seq, table, from, to, ...
                ForeignKeyInfo fk;
                fk.from_table = table;
                fk.to_table = row[2];
                fk.from_column = row[3];
                fk.to_column = row[4];
                snapshot.foreign_keys.push_back(std::move(fk));
            }
        }

        snapshot.tables.push_back(std::move(info));
    }

    // Definition-table heuristic: a foreign key from a table carrying
    // floating-point measurements into a table with a label/name text column
    // marks the target as a code-definition lookup.
    std::set<std::string> hints;
    for (const auto& fk : snapshot.foreign_keys) {
        const TableInfo* from = snapshot.find_table(fk.from_table);
        const TableInfo* to = snapshot.find_table(fk.to_table);
        if (from == nullptr || to == nullptr) continue;
        bool from_has_float = std::any_of(from->columns.begin(), from->columns.end(),
                                          [](const ColumnInfo& c) { return is_float_type(c.declared_type); });
        bool to_has_label = std::any_of(to->columns.begin(), to->columns.end(), [](const ColumnInfo& c) {
            std::string n = util::lower(c.name);
            return is_text_type(c.declared_type) &&
                   (n.find("label") != std::string::npos || n.find("name") != std::string::npos);
        });
        if (from_has_float && to_has_label) hints.insert(fk.to_table);
    }
    snapshot.mapping_table_hints.assign(hints.begin(), hints.end());

    return snapshot;
}

const TableInfo* SchemaSnapshot::find_table(const std::string& name) const {
    for (const auto& t : tables) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

std::string SchemaSnapshot::to_json() const {
    Json doc;
    doc["database"] = database_name;
    doc["samples_per_column"] = samples_per_column;
    doc["tables"] = Json::array();
    for (const auto& t : tables) {
        Json jt;
        jt["name"] = t.name;
        jt["row_count"] = t.row_count;
        jt["columns"] = Json::array();
        for (const auto& c : t.columns) {
            Json jc;
            jc["name"] = c.name;
            jc["type"] = c.declared_type;
            jc["not_null"] = c.not_null;
            jc["primary_key"] = c.primary_key;
            jc["samples"] = c.sample_values;
            jt["columns"].push_back(std::move(jc));
        }
        doc["tables"].push_back(std::move(jt));
    }
    doc["foreign_keys"] = Json::array();
    for (const auto& fk : foreign_keys) {
        Json jf;
        jf["from_table"] = fk.from_table;
        jf["from_column"] = fk.from_column;
        jf["to_table"] = fk.to_table;
        jf["to_column"] = fk.to_column;
        doc["foreign_keys"].push_back(std::move(jf));
    }
    doc["mapping_table_hints"] = mapping_table_hints;
    return doc.dump(2) + "\n";
}

SchemaSnapshot SchemaSnapshot::from_json(const std::string& text) {
    Json doc = Json::parse(text);
    SchemaSnapshot snapshot;
    snapshot.database_name = doc.at("database").get<std::string>();
    snapshot.samples_per_column = doc.at("samples_per_column").get<int>();
    for (const auto& jt : doc.at("tables")) {
        TableInfo t;
        t.name = jt.at("name").get<std::string>();
        t.row_count = jt.at("row_count").get<long long>();
        for (const auto& jc : jt.at("columns")) {
            ColumnInfo c;
            c.name = jc.at("name").get<std::string>();
            c.declared_type = jc.at("type").get<std::string>();
            c.not_null = jc.at("not_null").get<bool>();
            c.primary_key = jc.at("primary_key").get<bool>();
            c.sample_values = jc.at("samples").get<std::vector<std::string>>();
            t.columns.push_back(std::move(c));
        }
        snapshot.tables.push_back(std::move(t));
    }
    for (const auto& jf : doc.at("foreign_keys")) {
        ForeignKeyInfo fk;
        fk.from_table = jf.at("from_table").get<std::string>();
        fk.from_column = jf.at("from_column").get<std::string>();
        fk.to_table = jf.at("to_table").get<std::string>();
        fk.to_column = jf.at("to_column").get<std::string>();
        snapshot.foreign_keys.push_back(std::move(fk));
    }
    snapshot.mapping_table_hints = doc.at("mapping_table_hints").get<std::vector<std::string>>();
    return snapshot;
}

std::string SchemaSnapshot::render_schema_text() const {
    std::ostringstream out;
    out << "Database: " << database_name << "\n";
    for (const auto& t : tables) {
        out << "Table: " << database_name << "." << t.name << " (rows: " << t.row_count << ")\n";
        for (const auto& c : t.columns) {
            out << "  Column: " << c.name << ", Type: " << c.declared_type;
            if (c.primary_key) out << ", Primary Key";
            if (samples_per_column > 0) {
                out << ", Values: [";
                for (size_t i = 0; i < c.sample_values.size(); i++) {
                    if (i > 0) out << ", ";
                    out << c.sample_values[i];
                }
                out << "]";
            }
            out << "\n";
        }
    }
    return out.str();
}

std::string SchemaSnapshot::render_foreign_keys() const {
    if (foreign_keys.empty()) return "None\n";
    std::ostringstream out;
    for (const auto& fk : foreign_keys) {
        out << database_name << "." << fk.from_table << "." << fk.from_column << " -> "
            << database_name << "." << fk.to_table << "." << fk.to_column << "\n";
    }
    return out.str();
}

std::string SchemaSnapshot::render_mapping_hints() const {
    if (mapping_table_hints.empty()) return "None\n";
    std::ostringstream out;
    for (const auto& name : mapping_table_hints) out << database_name << "." << name << "\n";
    return out.str();
}

std::string QueryResult::render_text() const {
    std::ostringstream out;
    out << "[";
    for (size_t i = 0; i < columns.size(); i++) {
        if (i > 0) out << ", ";
        out << columns[i];
    }
    out << "]\n";
    for (const auto& row : rows) {
        out << "(";
        for (size_t i = 0; i < row.size(); i++) {
            if (i > 0) out << ", ";
            out << row[i];
        }
        out << ")\n";
    }
    if (truncated) out << "... output truncated at " << row_cap << " rows\n";
    if (rows.empty()) out << "(no rows)\n";
    return out.str();
}

ResultStatus classify_result(const QueryOutcome& outcome, const FeatureFormatSpec& spec) {
    ResultStatus status;
    if (!outcome.ok()) {
        status.kind = ResultStatus::Kind::ExecutionError;
        status.message = outcome.error_message;
        return status;
    }
    const QueryResult& result = *outcome.result;
    if (result.rows.empty()) {
        status.kind = ResultStatus::Kind::EmptyOutput;
        return status;
    }
    if (result.columns.size() != spec.column_count()) {
        status.kind = ResultStatus::Kind::ColumnCountMismatch;
        status.expected_columns = spec.column_count();
        status.actual_columns = result.columns.size();
        return status;
    }
    for (size_t col = 0; col < spec.features.size(); col++) {
        const FeatureFormat& fmt = spec.features[col];
        for (const auto& row : result.rows) {
            if (!fmt.value_matches(row[col])) {
                status.kind = ResultStatus::Kind::TypeMismatch;
                status.column_name = result.columns[col];
                status.expected_kind = fmt.kind_name();
                status.offending_value = row[col];
                return status;
            }
        }
    }
    status.kind = ResultStatus::Kind::Correct;
    return status;
}

std::string ResultStatus::describe() const {
    switch (kind) {
        case Kind::Correct:
            return "result matches the requested feature formats";
        case Kind::EmptyOutput:
            return "the query executed without error but returned no rows";
        case Kind::ColumnCountMismatch:
            return "the result has " + std::to_string(actual_columns) + " columns but " +
                   std::to_string(expected_columns) + " features were requested";
        case Kind::TypeMismatch:
            return "column '" + column_name + "' contains value '" + offending_value +
                   "' which does not satisfy the requested format '" + expected_kind + "'";
        case Kind::ExecutionError:
            return "query execution failed: " + message;
    }
    return "unknown status";
}

struct AdminConnection::Impl {
    sqlite3* handle = nullptr;
    ~Impl() {
        if (handle != nullptr) sqlite3_close_v2(handle);
    }
};

AdminConnection::AdminConnection(const std::string& path) : impl_(std::make_unique<Impl>()) {
    int rc = sqlite3_open_v2(path.c_str(), &impl_->handle,
                             SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX, nullptr);
    if (rc != SQLITE_OK) {
        std::string message = impl_->handle != nullptr ? sqlite3_errmsg(impl_->handle) : sqlite3_errstr(rc);
        throw environment_error("cannot open database for provisioning " + path + ": " + message);
    }
    sqlite3_busy_timeout(impl_->handle, 5000);
}

AdminConnection::~AdminConnection() = default;

void AdminConnection::execute(const std::string& sql) {
    char* error = nullptr;
    int rc = sqlite3_exec(impl_->handle, sql.c_str(), nullptr, nullptr, &error);
    if (rc != SQLITE_OK) {
        std::string message = error != nullptr ? error : sqlite3_errstr(rc);
        sqlite3_free(error);
        throw environment_error("provisioning statement failed: " + message);
    }
}

void AdminConnection::execute_with_params(const std::string& sql,
                                          const std::vector<std::optional<std::string>>& params) {
    PreparedStatement prepared;
    int rc = sqlite3_prepare_v2(impl_->handle, sql.c_str(), -1, &prepared.stmt, nullptr);
    if (rc != SQLITE_OK) {
        throw environment_error(std::string("provisioning prepare failed: ") + sqlite3_errmsg(impl_->handle));
    }
    for (size_t i = 0; i < params.size(); i++) {
        if (params[i].has_value()) {
            sqlite3_bind_text(prepared.stmt, static_cast<int>(i + 1), params[i]->c_str(), -1, SQLITE_TRANSIENT);
        } else {
            sqlite3_bind_null(prepared.stmt, static_cast<int>(i + 1));
        }
    }
    rc = sqlite3_step(prepared.stmt);
    if (rc != SQLITE_DONE) {
        throw environment_error(std::string("provisioning insert failed: ") + sqlite3_errmsg(impl_->handle));
    }
}

void AdminConnection::begin() { execute("BEGIN"); }
void AdminConnection::commit() { execute("COMMIT"); }

}  // namespace emrkit::db
