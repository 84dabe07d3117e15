#include <doctest.h>

#include <functional>

#include "emrkit/error.hpp"
#include "emrkit/parse/response.hpp"
#include "emrkit/util.hpp"

using namespace emrkit;
using namespace emrkit::parse;

namespace {

ErrorKind thrown_kind(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    return ErrorKind::Internal;
}

}  // namespace

TEST_CASE("tagged section extraction") {
    CHECK(parse_tagged_section("a <output> x y </output> b", "output").value() == "x y");
    CHECK(parse_tagged_section("<output></output>", "output").value() == "");
    CHECK_FALSE(parse_tagged_section("no tags here", "output").has_value());
    CHECK_THROWS_AS(parse_tagged_section("<output> unclosed", "output"), Error);
    CHECK_THROWS_AS(parse_tagged_section("<o><o>x</o></o>", "o"), Error);
    CHECK(thrown_kind([] { parse_tagged_section("<o>x", "o"); }) == ErrorKind::Malformed);
}

TEST_CASE("classification tokens") {
    CHECK(parse_classification("<correct>", {"correct", "need more information"}) == "correct");
    CHECK(parse_classification("< Correct >", {"correct", "need more information"}) == "correct");
    CHECK(parse_classification("<need  more\ninformation>", {"correct", "need more information"}) ==
          "need more information");
    CHECK(parse_classification("<correct> and again <correct>",
                               {"correct", "need more information"}) == "correct");
    CHECK_THROWS_AS(parse_classification("nothing", {"correct"}), Error);
    CHECK_THROWS_AS(
        parse_classification("<correct> <need more information>", {"correct", "need more information"}),
        Error);

    CHECK(parse_error_class("<syntax error>") == ErrorClass::SyntaxError);
    CHECK(parse_error_class("<wrong schema>") == ErrorClass::WrongSchema);
    CHECK(parse_error_class("<Wrong Schema>") == ErrorClass::WrongSchema);
}

TEST_CASE("sql query splitting") {
    auto qs = parse_sql_queries("SELECT a FROM t || SELECT b FROM u", 5);
    REQUIRE(qs.size() == 2);
    CHECK(qs[0] == "SELECT a FROM t");
    CHECK(qs[1] == "SELECT b FROM u");

    qs = parse_sql_queries("SELECT 'a||b' FROM t", 5);
    REQUIRE(qs.size() == 1);
    CHECK(qs[0] == "SELECT 'a||b' FROM t");

    qs = parse_sql_queries("```sql\nSELECT 1;\n```", 5);
    REQUIRE(qs.size() == 1);
    CHECK(qs[0] == "SELECT 1");

    qs = parse_sql_queries("SELECT 1 ||   || SELECT 2", 5);
    CHECK(qs.size() == 2);

    qs = parse_sql_queries("SELECT \"a||b\" FROM t || SELECT 2", 5);
    REQUIRE(qs.size() == 2);
    CHECK(qs[0] == "SELECT \"a||b\" FROM t");

    CHECK(parse_sql_queries("   ", 5).empty());
    CHECK(thrown_kind([] { parse_sql_queries("SELECT 1 || SELECT 2 || SELECT 3", 2); }) ==
          ErrorKind::Budget);
}

TEST_CASE("similarity map with braces and feature prefixes") {
    auto m = parse_similarity_map(
        "Heart rate: {('211', 'Heart Rate', 'bpm'): 95|| ('212', 'Heart Rhythm', ''): 20}; "
        "Glucose: {('50809', 'Glucose', 'mg/dL'): 96}");
    REQUIRE(m.size() == 2);
    REQUIRE(m.at("Heart rate").size() == 2);
    CHECK(m.at("Heart rate")[0].first.elements ==
          std::vector<std::string>{"211", "Heart Rate", "bpm"});
    CHECK(m.at("Heart rate")[0].second == 95);
    CHECK(m.at("Heart rate")[1].second == 20);
    REQUIRE(m.at("Glucose").size() == 1);
    CHECK(m.at("Glucose")[0].first.elements.size() == 3);
}

TEST_CASE("similarity map anonymous single-element form") {
    auto m = parse_similarity_map("('C-reactive protein',): 10|| ('Pulse',): 90");
    REQUIRE(m.size() == 1);
    REQUIRE(m.count(""));
    REQUIRE(m.at("").size() == 2);
    CHECK(m.at("")[0].first.elements == std::vector<std::string>{"C-reactive protein"});
    CHECK(m.at("")[0].second == 10);
    CHECK(m.at("")[1].first.elements == std::vector<std::string>{"Pulse"});
    CHECK(m.at("")[1].second == 90);
}

TEST_CASE("similarity map quoting edge cases") {
    auto m = parse_similarity_map("Sodium: {('50824', 'Sodium, Whole Blood', 'mEq/L'): 88}");
    CHECK(m.at("Sodium")[0].first.elements[1] == "Sodium, Whole Blood");

    m = parse_similarity_map("X: {('O\\'Brien',): 50}");
    CHECK(m.at("X")[0].first.elements[0] == "O'Brien");

    CHECK(parse_similarity_map("").empty());
    CHECK(parse_similarity_map(" \n ").empty());

    CHECK_THROWS_AS(parse_similarity_map("X: {('a',): 101}"), Error);
    CHECK_THROWS_AS(parse_similarity_map("X: {('a',): abc}"), Error);
    CHECK_THROWS_AS(parse_similarity_map("X: {('a',): 5|| ('a',): 9}"), Error);
    CHECK_THROWS_AS(parse_similarity_map("X: {('a', 'b', 'c', 'd'): 5}"), Error);
}

TEST_CASE("candidate tuple rendering round trip") {
    CandidateTuple one{{"C-reactive protein"}};
    CHECK(one.render() == "('C-reactive protein',)");
    CandidateTuple three{{"50824", "Sodium, Whole Blood", "mEq/L"}};
    CHECK(three.render() == "('50824', 'Sodium, Whole Blood', 'mEq/L')");
    CandidateTuple quoted{{"O'Brien"}};
    CHECK(quoted.render() == "('O\\'Brien',)");

    auto parsed = parse_similarity_map(quoted.render() + ": 42");
    CHECK(parsed.at("")[0].first == quoted);
}

TEST_CASE("feature column answers") {
    auto none = parse_feature_column("None");
    CHECK(none.none);
    CHECK(parse_feature_column(" none \n").none);

    auto one = parse_feature_column("eiculike.vitalperiodic.heartrate");
    REQUIRE(one.columns.size() == 1);
    CHECK(one.columns[0].schema_name == "eiculike");
    CHECK(one.columns[0].table_name == "vitalperiodic");
    CHECK(one.columns[0].column_name == "heartrate");

    auto two = parse_feature_column("a.b.c || d.e.f");
    CHECK(two.columns.size() == 2);

    CHECK_THROWS_AS(parse_feature_column("b.c"), Error);
    CHECK_THROWS_AS(parse_feature_column("a.b.c.d"), Error);
    CHECK_THROWS_AS(parse_feature_column(""), Error);
}

TEST_CASE("schema linking labeled form") {
    auto result = parse_schema_linking(
        "Mapping Table: mimiclike.d_items , Column: itemid, Values: [211, 618], Column: label\n"
        "Table Name: mimiclike.chartevents , Columns: icustay_id, itemid, valuenum\n"
        "[Schema Guideline]: Use d_items.label to resolve concept names.\n");
    REQUIRE(result.schema.tables.size() == 2);
    const auto& mapping = result.schema.tables[0];
    CHECK(mapping.is_mapping);
    CHECK(mapping.qualified_name == "mimiclike.d_items");
    CHECK(mapping.table_name() == "d_items");
    REQUIRE(mapping.columns.size() == 2);
    CHECK(mapping.columns[0].name == "itemid");
    CHECK(mapping.columns[0].values == std::vector<std::string>{"211", "618"});
    CHECK(mapping.columns[1].name == "label");
    const auto& feature = result.schema.tables[1];
    CHECK_FALSE(feature.is_mapping);
    REQUIRE(feature.columns.size() == 3);
    CHECK(feature.columns[2].name == "valuenum");
    CHECK(result.guideline == "Use d_items.label to resolve concept names.");
}

TEST_CASE("schema linking tagged form with think block") {
    auto result = parse_schema_linking(
        "<think>\nThe vitals live in one wide table.\n</think>\n"
        "<selected schema>\n"
        "[Heart rate]\n"
        "Table Name: eiculike.vitalperiodic , Columns: patientunitstayid, heartrate\n"
        "</selected schema>\n"
        "<schema guideline>\nheartrate is sampled periodically.\n</schema guideline>\n");
    REQUIRE(result.schema.tables.size() == 1);
    CHECK(result.schema.tables[0].feature_label == "Heart rate");
    CHECK(result.schema.tables[0].columns.size() == 2);
    CHECK(result.guideline == "heartrate is sampled periodically.");
}

TEST_CASE("schema linking wrapped lines and prose") {
    auto result = parse_schema_linking(
        "<think>Table Name: fake.table , Columns: nope</think>\n"
        "Here is the selection.\n"
        "Table Name: siclike.cases , Column: case_id,\n"
        "Values: [500001, 500002], Column: admission_age\n");
    REQUIRE(result.schema.tables.size() == 1);
    const auto& t = result.schema.tables[0];
    CHECK(t.qualified_name == "siclike.cases");
    REQUIRE(t.columns.size() == 2);
    CHECK(t.columns[0].values == std::vector<std::string>{"500001", "500002"});

    CHECK_THROWS_AS(parse_schema_linking("no tables in this text"), Error);
    CHECK(thrown_kind([] { parse_schema_linking("prose only"); }) == ErrorKind::Malformed);
}

TEST_CASE("linked schema renders back to prompt text") {
    auto result = parse_schema_linking(
        "Mapping Table: mimiclike.d_items , Column: itemid, Values: [211], Column: label\n"
        "Table Name: mimiclike.chartevents , Columns: icustay_id, valuenum\n");
    std::string text = result.schema.render_text();
    CHECK(text.find("Mapping Table: mimiclike.d_items") != std::string::npos);
    CHECK(text.find("Values: [211]") != std::string::npos);
    CHECK(text.find("Table Name: mimiclike.chartevents , Columns: icustay_id, valuenum") !=
          std::string::npos);

    auto reparsed = parse_schema_linking(text);
    REQUIRE(reparsed.schema.tables.size() == 2);
    CHECK(reparsed.schema.tables[0].is_mapping);
    CHECK(reparsed.schema.tables[1].columns.size() == 2);
}

TEST_CASE("parsers survive random noise without crashing") {
    util::Rng rng(99);
    const std::string alphabet = "<>(){}[]'\",:;|. abcDEF123\\\n";
    int malformed_count = 0;
    for (int i = 0; i < 20000; ++i) {
        std::string noise;
        int len = static_cast<int>(rng.range(0, 60));
        for (int c = 0; c < len; ++c)
            noise += alphabet[static_cast<std::size_t>(rng.range(0, static_cast<int>(alphabet.size()) - 1))];
        try {
            parse_sql_queries(noise, 5);
            parse_similarity_map(noise);
        } catch (const Error&) {
            ++malformed_count;
        }
        try {
            parse_feature_column(noise);
        } catch (const Error&) {
        }
        try {
            parse_schema_linking(noise);
        } catch (const Error&) {
        }
        try {
            parse_tagged_section(noise, "output");
            parse_classification(noise, {"correct", "need more information"});
        } catch (const Error&) {
        }
    }
    // Sanity: the noise actually exercised failure paths.
    CHECK(malformed_count > 0);
}
