#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "emrkit/format.hpp"

namespace emrkit::db {

struct ColumnInfo {
    std::string name;
    std::string declared_type;
    bool not_null = false;
    bool primary_key = false;
    // Up to samples_per_column distinct values in first-occurrence order under
    // a fixed row ordering; NULL is rendered as the literal string "NULL".
    std::vector<std::string> sample_values;
};

struct ForeignKeyInfo {
    std::string from_table;
    std::string from_column;
    std::string to_table;
    std::string to_column;
};

struct TableInfo {
    std::string name;
    long long row_count = 0;
    std::vector<ColumnInfo> columns;
};

struct SchemaSnapshot {
    std::string database_name;
    int samples_per_column = 0;
    std::vector<TableInfo> tables;
    std::vector<ForeignKeyInfo> foreign_keys;
    // Tables that look like code-definition lookups: they are the target of a
    // foreign key from a table holding floating-point measurements and carry a
    // textual label/name column.
    std::vector<std::string> mapping_table_hints;

    std::string to_json() const;
    static SchemaSnapshot from_json(const std::string& text);

    // Text renderings used as prompt bindings.
    std::string render_schema_text() const;
    std::string render_foreign_keys() const;
    std::string render_mapping_hints() const;

    const TableInfo* find_table(const std::string& name) const;
};

struct QueryResult {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;  // NULL rendered as "NULL"
    bool truncated = false;
    int row_cap = 0;  // 0 means uncapped

    std::string render_text() const;
};

// Either a result table or a verbatim backend error message.
struct QueryOutcome {
    std::optional<QueryResult> result;
    std::string error_message;

    bool ok() const { return result.has_value(); }
};

struct ResultStatus {
    enum class Kind { Correct, EmptyOutput, ColumnCountMismatch, TypeMismatch, ExecutionError };

    Kind kind = Kind::Correct;
    size_t expected_columns = 0;
    size_t actual_columns = 0;
    std::string column_name;      // TypeMismatch
    std::string expected_kind;    // TypeMismatch
    std::string offending_value;  // TypeMismatch
    std::string message;          // ExecutionError: verbatim backend message

    bool correct() const { return kind == Kind::Correct; }
    std::string describe() const;
};

class Session {
public:
    ~Session();
    Session(Session&&) noexcept;
    Session& operator=(Session&&) noexcept;
    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    const std::string& descriptor() const { return descriptor_; }
    const std::string& database_name() const { return database_name_; }

private:
    Session() = default;
    friend Session connect(const std::string& descriptor);
    friend class SessionAccess;

    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::string descriptor_;
    std::string database_name_;
};

// Opens a read-only session. Descriptors: "sqlite:<path>" or a bare
// filesystem path. PostgreSQL descriptors are recognized but rejected because
// no client library is linked into this build.
Session connect(const std::string& descriptor);

SchemaSnapshot introspect_schema(Session& session, int samples_per_column);

// Runs one read-only statement and returns at most row_cap rows plus a
// truncation flag. Execution failures come back as the verbatim backend
// message, never as an exception.
QueryOutcome execute_observation(Session& session, const std::string& sql, int row_cap = 20);

// Runs one read-only statement without a row cap, streaming each row to the
// callback as it arrives.
QueryOutcome execute_final(Session& session, const std::string& sql,
                           const std::function<void(const std::vector<std::string>&)>& on_row);

// Convenience wrapper collecting the full result table in memory.
QueryOutcome execute_final_all(Session& session, const std::string& sql);

ResultStatus classify_result(const QueryOutcome& outcome, const FeatureFormatSpec& spec);

// Writable connection used only by fixture provisioning and tests; agents
// never touch this path.
class AdminConnection {
public:
    explicit AdminConnection(const std::string& path);
    ~AdminConnection();
    AdminConnection(const AdminConnection&) = delete;
    AdminConnection& operator=(const AdminConnection&) = delete;

    void execute(const std::string& sql);
    void execute_with_params(const std::string& sql, const std::vector<std::optional<std::string>>& params);
    void begin();
    void commit();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace emrkit::db
