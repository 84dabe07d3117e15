#include <doctest.h>

#include "emrkit/util.hpp"

using namespace emrkit;

TEST_CASE("string helpers") {
    CHECK(util::trim("  a b  ") == "a b");
    CHECK(util::trim("\r\n\t x \n") == "x");
    CHECK(util::trim("") == "");
    CHECK(util::lower("AbC1") == "abc1");
    CHECK(util::collapse_ws("a\n  b\t\tc ") == "a b c");
    CHECK(util::normalize_ws_lower("  SELECT *\n FROM t ") == "select * from t");
    CHECK(util::normalize_alnum("Heart rate (ECG)") == "heartrateecg");
    CHECK(util::starts_with("foobar", "foo"));
    CHECK_FALSE(util::starts_with("fo", "foo"));
    CHECK(util::join({"a", "b", "c"}, ", ") == "a, b, c");
    CHECK(util::join({}, ",") == "");
    CHECK(util::replace_all("a{x}b{x}", "{x}", "1") == "a1b1");

    auto parts = util::split("a,b,,c", ',');
    REQUIRE(parts.size() == 4);
    CHECK(parts[2] == "");
}

TEST_CASE("numeric rendering") {
    CHECK(util::format_decimal(30.0, 4) == "30.0000");
    CHECK(util::format_decimal(52.17, 4) == "52.1700");
    CHECK(util::format_decimal(-1.5, 1) == "-1.5");
    CHECK(util::format_double(30.0) == "30.0");
    CHECK(util::format_double(52.3167) == "52.3167");
    CHECK(util::format_double(-0.25) == "-0.25");
}

TEST_CASE("strict parsing") {
    CHECK(util::parse_int("42").value() == 42);
    CHECK(util::parse_int("-7").value() == -7);
    CHECK_FALSE(util::parse_int("").has_value());
    CHECK_FALSE(util::parse_int("4.2").has_value());
    CHECK_FALSE(util::parse_int("x12").has_value());
    CHECK_FALSE(util::parse_int("12x").has_value());

    CHECK(util::parse_real("1.5").value() == doctest::Approx(1.5));
    CHECK(util::parse_real("-2").value() == doctest::Approx(-2.0));
    CHECK_FALSE(util::parse_real("").has_value());
    CHECK_FALSE(util::parse_real("1.5x").has_value());
    CHECK_FALSE(util::parse_real("nan").has_value());
    CHECK_FALSE(util::parse_real("inf").has_value());
}

TEST_CASE("sha256 known vectors") {
    CHECK(util::sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(util::sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("rng determinism and bounds") {
    util::Rng a(12345);
    util::Rng b(12345);
    for (int i = 0; i < 1000; ++i) CHECK(a.next() == b.next());

    util::Rng r(7);
    for (int i = 0; i < 1000; ++i) {
        auto v = r.range(-3, 9);
        CHECK(v >= -3);
        CHECK(v <= 9);
        double u = r.unit();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    CHECK(util::Rng(1).next() != util::Rng(2).next());
    CHECK(util::Rng(5).range(4, 4) == 4);
}

TEST_CASE("csv round trip") {
    std::vector<std::vector<std::string>> rows = {
        {"plain", "with,comma", "with \"quote\""},
        {"line\nbreak", "", "trailing "},
    };
    std::string text;
    for (const auto& row : rows) text += util::csv_render_row(row);
    auto parsed = util::csv_parse(text);
    REQUIRE(parsed.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(parsed[i] == rows[i]);
}

TEST_CASE("fnv1a64 offset basis") {
    CHECK(util::fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(util::fnv1a64("a") != util::fnv1a64("b"));
}
