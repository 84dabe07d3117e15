#include <doctest.h>

#include <functional>
#include <optional>
#include <string>

#include "../support/testutil.hpp"
#include "emrkit/error.hpp"
#include "emrkit/llm/client.hpp"
#include "emrkit/util.hpp"

using emrkit::Error;
using emrkit::ErrorKind;
namespace llm = emrkit::llm;
namespace util = emrkit::util;

namespace {

std::optional<ErrorKind> thrown_kind(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    return std::nullopt;
}

llm::CompletionRequest make_request(const std::string& template_id, const std::string& prompt,
                                    double temperature = 0.0, int round_index = 0) {
    llm::CompletionRequest req;
    req.template_id = template_id;
    req.prompt_text = prompt;
    req.temperature = temperature;
    req.round_index = round_index;
    return req;
}

}  // namespace

TEST_CASE("observation temperature schedule") {
    for (int round = 1; round <= 5; round++) {
        CHECK(llm::temperature_for_round(round) == doctest::Approx(0.0));
    }
    CHECK(llm::temperature_for_round(6) == doctest::Approx(0.1));
    CHECK(llm::temperature_for_round(7) == doctest::Approx(0.2));
    CHECK(llm::temperature_for_round(8) == doctest::Approx(0.3));
    CHECK(llm::temperature_for_round(9) == doctest::Approx(0.4));
    CHECK(llm::temperature_for_round(10) == doctest::Approx(0.5));

    auto kind = thrown_kind([] { llm::temperature_for_round(0); });
    REQUIRE(kind.has_value());
    CHECK(*kind == ErrorKind::Internal);
    kind = thrown_kind([] { llm::temperature_for_round(11); });
    REQUIRE(kind.has_value());
    CHECK(*kind == ErrorKind::Internal);
}

TEST_CASE("request fingerprints") {
    llm::CompletionRequest base = make_request("cfsa_sql_generation", "write the query");

    SUBCASE("stable and sensitive to content") {
        CHECK(llm::fingerprint(base) == llm::fingerprint(base));
        llm::CompletionRequest other = base;
        other.prompt_text = "write the query.";
        CHECK(llm::fingerprint(other) != llm::fingerprint(base));
        other = base;
        other.template_id = "cfsa_sql_sufficiency";
        CHECK(llm::fingerprint(other) != llm::fingerprint(base));
        other = base;
        other.temperature = 0.1;
        CHECK(llm::fingerprint(other) != llm::fingerprint(base));
    }
    SUBCASE("round index does not participate") {
        llm::CompletionRequest other = base;
        other.round_index = 4;
        CHECK(llm::fingerprint(other) == llm::fingerprint(base));
    }
    SUBCASE("matches an independent derivation") {
        std::string payload = "cfsa_sql_generation";
        payload.push_back('\x1f');
        payload += "0.0000";
        payload.push_back('\x1f');
        payload += "write the query";
        CHECK(llm::fingerprint(base) == util::sha256_hex(payload));
    }
}

TEST_CASE("scripted client and usage accounting") {
    auto client = llm::Client::scripted(std::make_unique<llm::ScriptedBackend>(
        [](const llm::CompletionRequest& req) { return "echo:" + req.template_id; }));
    CHECK(client.mode() == llm::Mode::Scripted);

    CHECK(client.complete(make_request("alpha", "12345")) == "echo:alpha");
    CHECK(client.complete(make_request("beta", "xy")) == "echo:beta");
    CHECK(client.usage().completions == 2);
    CHECK(client.usage().prompt_bytes == 7);
    CHECK(client.usage().completion_bytes == 19);
}

TEST_CASE("round temperature invariant is enforced at the client") {
    auto client = llm::Client::scripted(
        std::make_unique<llm::ScriptedBackend>([](const llm::CompletionRequest&) { return "ok"; }));

    CHECK(client.complete(make_request("t", "p", 0.0, 3)) == "ok");
    CHECK(client.complete(make_request("t", "p", 0.2, 7)) == "ok");
    CHECK(client.complete(make_request("t", "p", 1.7, 0)) == "ok");

    auto kind = thrown_kind([&] { client.complete(make_request("t", "p", 0.2, 3)); });
    REQUIRE(kind.has_value());
    CHECK(*kind == ErrorKind::Internal);

    kind = thrown_kind([&] { client.complete(make_request("t", "p", 0.1, 10)); });
    REQUIRE(kind.has_value());
    CHECK(*kind == ErrorKind::Internal);

    kind = thrown_kind([&] { client.complete(make_request("t", "p", 2.5, 0)); });
    REQUIRE(kind.has_value());
    CHECK(*kind == ErrorKind::Config);

    kind = thrown_kind([&] { client.complete(make_request("t", "p", -0.1, 0)); });
    REQUIRE(kind.has_value());
    CHECK(*kind == ErrorKind::Config);
}

TEST_CASE("record and replay round trip") {
    std::string path = emrkit::testing::temp_path("cassette_roundtrip.jsonl");
    emrkit::testing::remove_if_exists(path);

    int serial = 0;
    {
        auto client = llm::Client::scripted(std::make_unique<llm::ScriptedBackend>(
            [&serial](const llm::CompletionRequest&) { return "answer " + std::to_string(++serial); }));
        auto recorder = std::make_shared<llm::Recorder>(path, false);
        client.attach_recorder(recorder);
        client.complete(make_request("gen", "same prompt"));
        client.complete(make_request("gen", "same prompt"));
        client.complete(make_request("check", "other prompt", 0.1, 6));
        recorder->finish();
    }

    llm::Cassette cassette = llm::Cassette::load(path);
    CHECK(cassette.entry_count() == 3);
    CHECK(cassette.complete_sessions());

    SUBCASE("repeated requests consume recorded completions in order") {
        auto client = llm::Client::replay(path);
        CHECK(client.mode() == llm::Mode::Replay);
        CHECK(client.complete(make_request("gen", "same prompt")) == "answer 1");
        CHECK(client.complete(make_request("gen", "same prompt")) == "answer 2");
        CHECK(client.complete(make_request("check", "other prompt", 0.1, 6)) == "answer 3");
    }
    SUBCASE("an exhausted sequence keeps serving its final completion") {
        auto client = llm::Client::replay(path);
        client.complete(make_request("gen", "same prompt"));
        client.complete(make_request("gen", "same prompt"));
        CHECK(client.complete(make_request("gen", "same prompt")) == "answer 2");
    }
    SUBCASE("an uncovered request is a replay miss") {
        auto client = llm::Client::replay(path);
        auto kind = thrown_kind([&] { client.complete(make_request("gen", "unseen prompt")); });
        REQUIRE(kind.has_value());
        CHECK(*kind == ErrorKind::Agent);
    }
}

TEST_CASE("partial cassettes are rejected") {
    std::string path = emrkit::testing::temp_path("cassette_partial.jsonl");
    emrkit::testing::remove_if_exists(path);

    {
        auto client = llm::Client::scripted(
            std::make_unique<llm::ScriptedBackend>([](const llm::CompletionRequest&) { return "x"; }));
        auto recorder = std::make_shared<llm::Recorder>(path, false);
        client.attach_recorder(recorder);
        client.complete(make_request("gen", "p"));
    }

    CHECK_FALSE(llm::Cassette::load(path).complete_sessions());
    auto kind = thrown_kind([&] { llm::Client::replay(path); });
    REQUIRE(kind.has_value());
    CHECK(*kind == ErrorKind::Config);

    SUBCASE("an empty file has no session markers") {
        std::string empty = emrkit::testing::temp_path("cassette_empty.jsonl");
        util::write_file(empty, "");
        CHECK_FALSE(llm::Cassette::load(empty).complete_sessions());
    }
    SUBCASE("a missing file is an environment problem") {
        kind = thrown_kind([] { llm::Cassette::load("/nonexistent/cassette.jsonl"); });
        REQUIRE(kind.has_value());
        CHECK(*kind == ErrorKind::Environment);
    }
    SUBCASE("garbage lines are reported with their line number") {
        std::string bad = emrkit::testing::temp_path("cassette_bad.jsonl");
        util::write_file(bad, "{\"kind\":\"begin\"}\nnot json\n");
        kind = thrown_kind([&] { llm::Cassette::load(bad); });
        REQUIRE(kind.has_value());
        CHECK(*kind == ErrorKind::Config);
    }
}

TEST_CASE("recorder append and overwrite semantics") {
    std::string path = emrkit::testing::temp_path("cassette_sessions.jsonl");
    emrkit::testing::remove_if_exists(path);

    {
        llm::Recorder first(path, false);
        first.record(make_request("gen", "a"), "one");
        first.finish();
    }
    {
        llm::Recorder second(path, false);
        second.record(make_request("gen", "b"), "two");
        second.finish();
    }
    llm::Cassette appended = llm::Cassette::load(path);
    CHECK(appended.entry_count() == 2);
    CHECK(appended.complete_sessions());

    {
        llm::Recorder third(path, true);
        third.record(make_request("gen", "c"), "three");
        third.finish();
    }
    llm::Cassette truncated = llm::Cassette::load(path);
    CHECK(truncated.entry_count() == 1);
    CHECK(truncated.lookup(llm::fingerprint(make_request("gen", "c"))).value() == "three");
    CHECK_FALSE(truncated.lookup(llm::fingerprint(make_request("gen", "a"))).has_value());
}

TEST_CASE("rules backend") {
    std::string path = emrkit::testing::temp_path("rules.jsonl");
    util::write_file(path,
                     "{\"template_id\": \"gen\", \"prompt_contains\": \"heart\", \"completion\": \"hr\"}\n"
                     "{\"template_id\": \"gen\", \"completion\": \"generic gen\"}\n"
                     "\n"
                     "{\"prompt_contains\": \"lactate\", \"completion\": \"lab\"}\n");
    auto backend = llm::make_rules_backend(path);

    CHECK(backend->complete(make_request("gen", "heart rate please")) == "hr");
    CHECK(backend->complete(make_request("gen", "anything else")) == "generic gen");
    CHECK(backend->complete(make_request("other", "serum lactate")) == "lab");
    CHECK(backend->name() == "scripted-rules");

    auto kind = thrown_kind([&] { backend->complete(make_request("other", "no rule for this")); });
    REQUIRE(kind.has_value());
    CHECK(*kind == ErrorKind::Agent);

    SUBCASE("missing file") {
        kind = thrown_kind([] { llm::make_rules_backend("/nonexistent/rules.jsonl"); });
        REQUIRE(kind.has_value());
        CHECK(*kind == ErrorKind::Config);
    }
    SUBCASE("rule without completion") {
        std::string bad = emrkit::testing::temp_path("rules_bad.jsonl");
        util::write_file(bad, "{\"template_id\": \"gen\"}\n");
        kind = thrown_kind([&] { llm::make_rules_backend(bad); });
        REQUIRE(kind.has_value());
        CHECK(*kind == ErrorKind::Config);
    }
    SUBCASE("rule that is not JSON") {
        std::string bad = emrkit::testing::temp_path("rules_notjson.jsonl");
        util::write_file(bad, "completion: nope\n");
        kind = thrown_kind([&] { llm::make_rules_backend(bad); });
        REQUIRE(kind.has_value());
        CHECK(*kind == ErrorKind::Config);
    }
}

TEST_CASE("recording while replaying duplicates the cassette") {
    std::string source = emrkit::testing::temp_path("cassette_source.jsonl");
    std::string copy = emrkit::testing::temp_path("cassette_copy.jsonl");
    emrkit::testing::remove_if_exists(source);
    emrkit::testing::remove_if_exists(copy);

    {
        auto client = llm::Client::scripted(std::make_unique<llm::ScriptedBackend>(
            [](const llm::CompletionRequest& req) { return "v:" + req.prompt_text; }));
        auto recorder = std::make_shared<llm::Recorder>(source, false);
        client.attach_recorder(recorder);
        client.complete(make_request("gen", "alpha"));
        client.complete(make_request("gen", "beta"));
        recorder->finish();
    }
    {
        auto client = llm::Client::replay(source);
        auto recorder = std::make_shared<llm::Recorder>(copy, false);
        client.attach_recorder(recorder);
        CHECK(client.complete(make_request("gen", "alpha")) == "v:alpha");
        CHECK(client.complete(make_request("gen", "beta")) == "v:beta");
        recorder->finish();
    }
    llm::Cassette duplicated = llm::Cassette::load(copy);
    CHECK(duplicated.entry_count() == 2);
    CHECK(duplicated.lookup(llm::fingerprint(make_request("gen", "alpha"))).value() == "v:alpha");
}
