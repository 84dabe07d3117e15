#include <doctest.h>

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "../support/testutil.hpp"
#include "emrkit/db/gateway.hpp"
#include "emrkit/error.hpp"
#include "emrkit/format.hpp"

using emrkit::Error;
using emrkit::ErrorKind;
namespace db = emrkit::db;

namespace {

std::optional<ErrorKind> thrown_kind(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    return std::nullopt;
}

// A miniature clinical database: a definition table, an events table whose
// foreign key plus REAL measurement column should trigger the mapping-table
// heuristic, and an unrelated notes table that should not.
std::string provision_sample_db(const std::string& name) {
    std::string path = emrkit::testing::temp_path(name);
    emrkit::testing::remove_if_exists(path);
    db::AdminConnection admin(path);
    admin.execute(
        "CREATE TABLE d_items (itemid INTEGER PRIMARY KEY, label TEXT, unitname TEXT)");
    admin.execute(
        "CREATE TABLE chartevents (row_id INTEGER PRIMARY KEY, icustay_id INTEGER, "
        "itemid INTEGER REFERENCES d_items(itemid), valuenum REAL)");
    admin.execute("CREATE TABLE notes (note_id INTEGER PRIMARY KEY, body TEXT)");
    admin.begin();
    admin.execute_with_params("INSERT INTO d_items VALUES (?, ?, ?)", {{"211"}, {"Heart Rate"}, {"bpm"}});
    admin.execute_with_params("INSERT INTO d_items VALUES (?, ?, ?)", {{"618"}, {"Respiratory Rate"}, std::nullopt});
    for (int i = 0; i < 25; i++) {
        std::string row_id = std::to_string(i + 1);
        std::string stay = std::to_string(200000 + i % 3);
        std::string value = std::to_string(60 + i) + ".5";
        admin.execute_with_params("INSERT INTO chartevents VALUES (?, ?, ?, ?)",
                                  {{row_id}, {stay}, {"211"}, {value}});
    }
    admin.execute_with_params("INSERT INTO chartevents VALUES (?, ?, ?, ?)",
                              {{"26"}, {"200000"}, {"618"}, std::nullopt});
    admin.execute_with_params("INSERT INTO notes VALUES (?, ?)", {{"1"}, {"stable overnight"}});
    admin.commit();
    return path;
}

}  // namespace

TEST_CASE("descriptor parsing and connection") {
    std::string path = provision_sample_db("gateway_basic.db");

    SUBCASE("sqlite scheme") {
        db::Session s = db::connect("sqlite:" + path);
        CHECK(s.database_name() == "gateway_basic");
        CHECK(s.descriptor() == "sqlite:" + path);
    }
    SUBCASE("bare filesystem path") {
        db::Session s = db::connect(path);
        CHECK(s.database_name() == "gateway_basic");
    }
    SUBCASE("postgres descriptors are recognized but unsupported") {
        auto kind = thrown_kind([] { db::connect("postgres://host/db"); });
        REQUIRE(kind.has_value());
        CHECK(*kind == ErrorKind::Environment);
        kind = thrown_kind([] { db::connect("postgresql://host/db"); });
        REQUIRE(kind.has_value());
        CHECK(*kind == ErrorKind::Environment);
    }
    SUBCASE("unknown scheme") {
        auto kind = thrown_kind([] { db::connect("mysql://host/db"); });
        REQUIRE(kind.has_value());
        CHECK(*kind == ErrorKind::Config);
    }
    SUBCASE("missing file") {
        auto kind = thrown_kind([] { db::connect("sqlite:/nonexistent/nowhere.db"); });
        REQUIRE(kind.has_value());
        CHECK(*kind == ErrorKind::Environment);
    }
    SUBCASE("empty descriptor") {
        auto kind = thrown_kind([] { db::connect("   "); });
        REQUIRE(kind.has_value());
        CHECK(*kind == ErrorKind::Config);
    }
}

TEST_CASE("read-only enforcement") {
    std::string path = provision_sample_db("gateway_readonly.db");
    db::Session session = db::connect("sqlite:" + path);

    SUBCASE("writes are vetted out with a verbatim message") {
        db::QueryOutcome out = db::execute_observation(session, "INSERT INTO notes VALUES (2, 'x')");
        REQUIRE_FALSE(out.ok());
        CHECK(out.error_message.find("SELECT") != std::string::npos);

        out = db::execute_observation(session, "DROP TABLE notes");
        CHECK_FALSE(out.ok());
        out = db::execute_observation(session, "UPDATE notes SET body = 'x'");
        CHECK_FALSE(out.ok());
        out = db::execute_observation(session, "PRAGMA journal_mode = DELETE");
        CHECK_FALSE(out.ok());
    }
    SUBCASE("multiple statements per call are rejected") {
        db::QueryOutcome out = db::execute_observation(session, "SELECT 1; SELECT 2");
        REQUIRE_FALSE(out.ok());
        CHECK(out.error_message.find("single") != std::string::npos);
    }
    SUBCASE("trailing semicolon and WITH are fine") {
        db::QueryOutcome out = db::execute_observation(session, "SELECT COUNT(*) FROM notes;");
        REQUIRE(out.ok());
        CHECK(out.result->rows[0][0] == "1");

        out = db::execute_observation(session, "WITH t AS (SELECT 2 AS x) SELECT x FROM t");
        REQUIRE(out.ok());
        CHECK(out.result->rows[0][0] == "2");
    }
    SUBCASE("empty statement") {
        db::QueryOutcome out = db::execute_observation(session, " ;; ");
        CHECK_FALSE(out.ok());
    }
    SUBCASE("nothing was written") {
        db::QueryOutcome out = db::execute_observation(session, "SELECT COUNT(*) FROM notes");
        REQUIRE(out.ok());
        CHECK(out.result->rows[0][0] == "1");
    }
}

TEST_CASE("observation row cap and NULL rendering") {
    std::string path = provision_sample_db("gateway_rowcap.db");
    db::Session session = db::connect("sqlite:" + path);

    SUBCASE("cap truncates and flags") {
        db::QueryOutcome out =
            db::execute_observation(session, "SELECT row_id FROM chartevents ORDER BY row_id");
        REQUIRE(out.ok());
        CHECK(out.result->rows.size() == 20);
        CHECK(out.result->truncated);
        CHECK(out.result->row_cap == 20);
        CHECK(out.result->rows[0][0] == "1");
        CHECK(out.result->rows[19][0] == "20");
    }
    SUBCASE("final execution is uncapped") {
        db::QueryOutcome out = db::execute_final_all(session, "SELECT row_id FROM chartevents");
        REQUIRE(out.ok());
        CHECK(out.result->rows.size() == 26);
        CHECK_FALSE(out.result->truncated);
    }
    SUBCASE("streaming delivers every row in order") {
        std::vector<std::string> seen;
        db::QueryOutcome out = db::execute_final(
            session, "SELECT row_id FROM chartevents ORDER BY row_id",
            [&](const std::vector<std::string>& row) { seen.push_back(row[0]); });
        REQUIRE(out.ok());
        CHECK(out.result->rows.empty());
        REQUIRE(seen.size() == 26);
        CHECK(seen.front() == "1");
        CHECK(seen.back() == "26");
    }
    SUBCASE("NULL renders as the literal NULL") {
        db::QueryOutcome out =
            db::execute_observation(session, "SELECT valuenum FROM chartevents WHERE row_id = 26");
        REQUIRE(out.ok());
        CHECK(out.result->rows[0][0] == "NULL");
    }
    SUBCASE("non-positive cap is a programming error") {
        auto kind = thrown_kind([&] { db::execute_observation(session, "SELECT 1", 0); });
        REQUIRE(kind.has_value());
        CHECK(*kind == ErrorKind::Internal);
    }
    SUBCASE("execution errors carry the backend message") {
        db::QueryOutcome out = db::execute_observation(session, "SELECT * FROM no_such_table");
        REQUIRE_FALSE(out.ok());
        CHECK(out.error_message.find("no_such_table") != std::string::npos);
    }
}

TEST_CASE("schema introspection") {
    std::string path = provision_sample_db("gateway_schema.db");
    db::Session session = db::connect("sqlite:" + path);
    db::SchemaSnapshot snap = db::introspect_schema(session, 10);

    SUBCASE("tables are listed alphabetically with counts") {
        REQUIRE(snap.tables.size() == 3);
        CHECK(snap.tables[0].name == "chartevents");
        CHECK(snap.tables[1].name == "d_items");
        CHECK(snap.tables[2].name == "notes");
        CHECK(snap.tables[0].row_count == 26);
        CHECK(snap.tables[1].row_count == 2);
        CHECK(snap.tables[2].row_count == 1);
        CHECK(snap.database_name == "gateway_schema");
        CHECK(snap.samples_per_column == 10);
    }
    SUBCASE("columns keep declaration order and metadata") {
        const db::TableInfo* items = snap.find_table("d_items");
        REQUIRE(items != nullptr);
        REQUIRE(items->columns.size() == 3);
        CHECK(items->columns[0].name == "itemid");
        CHECK(items->columns[0].primary_key);
        CHECK(items->columns[1].name == "label");
        CHECK_FALSE(items->columns[1].primary_key);
        CHECK(snap.find_table("no_such") == nullptr);
    }
    SUBCASE("samples are distinct, ordered, capped, and include NULL") {
        const db::TableInfo* events = snap.find_table("chartevents");
        REQUIRE(events != nullptr);
        const db::ColumnInfo* stay = nullptr;
        const db::ColumnInfo* value = nullptr;
        for (const auto& c : events->columns) {
            if (c.name == "icustay_id") stay = &c;
            if (c.name == "valuenum") value = &c;
        }
        REQUIRE(stay != nullptr);
        REQUIRE(value != nullptr);
        REQUIRE(stay->sample_values.size() == 3);
        CHECK(stay->sample_values[0] == "200000");
        CHECK(stay->sample_values[1] == "200001");
        CHECK(stay->sample_values[2] == "200002");
        CHECK(value->sample_values.size() == 10);
        CHECK(value->sample_values[0] == "60.5");
        bool has_null = false;
        for (const auto& v : value->sample_values) {
            if (v == "NULL") has_null = true;
        }
        CHECK_FALSE(has_null);

        const db::ColumnInfo* unit = nullptr;
        const db::TableInfo* items = snap.find_table("d_items");
        for (const auto& c : items->columns) {
            if (c.name == "unitname") unit = &c;
        }
        REQUIRE(unit != nullptr);
        REQUIRE(unit->sample_values.size() == 2);
        CHECK(unit->sample_values[0] == "bpm");
        CHECK(unit->sample_values[1] == "NULL");
    }
    SUBCASE("foreign keys and mapping hints") {
        REQUIRE(snap.foreign_keys.size() == 1);
        CHECK(snap.foreign_keys[0].from_table == "chartevents");
        CHECK(snap.foreign_keys[0].from_column == "itemid");
        CHECK(snap.foreign_keys[0].to_table == "d_items");
        CHECK(snap.foreign_keys[0].to_column == "itemid");
        REQUIRE(snap.mapping_table_hints.size() == 1);
        CHECK(snap.mapping_table_hints[0] == "d_items");
    }
    SUBCASE("snapshots are deterministic and JSON round trips") {
        db::SchemaSnapshot again = db::introspect_schema(session, 10);
        CHECK(snap.to_json() == again.to_json());
        db::SchemaSnapshot parsed = db::SchemaSnapshot::from_json(snap.to_json());
        CHECK(parsed.database_name == snap.database_name);
        CHECK(parsed.to_json() == snap.to_json());
    }
    SUBCASE("renderings carry the database prefix") {
        std::string text = snap.render_schema_text();
        CHECK(text.find("Table: gateway_schema.d_items") != std::string::npos);
        CHECK(text.find("Column: label, Type: TEXT") != std::string::npos);
        CHECK(text.find("Values: [211, 618]") != std::string::npos);
        CHECK(snap.render_foreign_keys().find("gateway_schema.chartevents.itemid -> "
                                               "gateway_schema.d_items.itemid") != std::string::npos);
        CHECK(snap.render_mapping_hints() == "gateway_schema.d_items\n");

        db::SchemaSnapshot empty;
        CHECK(empty.render_foreign_keys() == "None\n");
        CHECK(empty.render_mapping_hints() == "None\n");
    }
    SUBCASE("zero samples skips sampling") {
        db::SchemaSnapshot bare = db::introspect_schema(session, 0);
        CHECK(bare.find_table("d_items")->columns[0].sample_values.empty());
        auto kind = thrown_kind([&] { db::introspect_schema(session, -1); });
        REQUIRE(kind.has_value());
        CHECK(*kind == ErrorKind::Config);
    }
}

TEST_CASE("result classification against feature formats") {
    emrkit::FeatureFormatSpec spec = emrkit::FeatureFormatSpec::from_feature_text(
        "ICU stay id, age (integer), length of ICU stay in hours (a float number rounded to 4 "
        "decimal places)");
    REQUIRE(spec.features.size() == 3);

    db::QueryOutcome outcome;
    SUBCASE("execution errors pass the message through") {
        outcome.error_message = "no such column: zz";
        db::ResultStatus status = db::classify_result(outcome, spec);
        CHECK(status.kind == db::ResultStatus::Kind::ExecutionError);
        CHECK(status.message == "no such column: zz");
        CHECK_FALSE(status.correct());
        CHECK(status.describe().find("no such column") != std::string::npos);
    }
    SUBCASE("empty output") {
        outcome.result = db::QueryResult{{"a", "b", "c"}, {}, false, 0};
        db::ResultStatus status = db::classify_result(outcome, spec);
        CHECK(status.kind == db::ResultStatus::Kind::EmptyOutput);
    }
    SUBCASE("column count mismatch") {
        outcome.result = db::QueryResult{{"a", "b"}, {{"1", "2"}}, false, 0};
        db::ResultStatus status = db::classify_result(outcome, spec);
        CHECK(status.kind == db::ResultStatus::Kind::ColumnCountMismatch);
        CHECK(status.expected_columns == 3);
        CHECK(status.actual_columns == 2);
    }
    SUBCASE("type mismatch names the column and value") {
        outcome.result =
            db::QueryResult{{"stay", "age", "los"}, {{"201", "63", "30.0"}, {"202", "64.5", "31.25"}}, false, 0};
        db::ResultStatus status = db::classify_result(outcome, spec);
        CHECK(status.kind == db::ResultStatus::Kind::TypeMismatch);
        CHECK(status.column_name == "age");
        CHECK(status.offending_value == "64.5");
        CHECK(status.describe().find("age") != std::string::npos);
    }
    SUBCASE("well-formed result") {
        outcome.result =
            db::QueryResult{{"stay", "age", "los"}, {{"201", "63", "30.0000"}, {"202", "64", "31.25"}}, false, 0};
        db::ResultStatus status = db::classify_result(outcome, spec);
        CHECK(status.correct());
    }
}

TEST_CASE("query result text rendering") {
    db::QueryResult result;
    result.columns = {"itemid", "label"};
    result.rows = {{"211", "Heart Rate"}, {"618", "NULL"}};
    std::string text = result.render_text();
    CHECK(text == "[itemid, label]\n(211, Heart Rate)\n(618, NULL)\n");

    db::QueryResult empty;
    empty.columns = {"x"};
    CHECK(empty.render_text() == "[x]\n(no rows)\n");

    db::QueryResult capped;
    capped.columns = {"x"};
    capped.rows = {{"1"}};
    capped.truncated = true;
    capped.row_cap = 20;
    CHECK(capped.render_text() == "[x]\n(1)\n... output truncated at 20 rows\n");
}
