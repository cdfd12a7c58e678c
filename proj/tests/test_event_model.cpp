#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "provtrace/errors.hpp"
#include "provtrace/event.hpp"

#include "support/test_util.hpp"

#include <algorithm>
#include <chrono>
#include <random>

using namespace provtrace;

TEST_CASE("parse_event_line accepts a batch start record") {
    const std::string line =
        R"({"activity_id":"3","seq":0,"kind":"started","class":"sql_batch",)"
        R"("ts":1000,"query_text":"EXECUTE SyncNewSales 2","username":"sa"})";
    QueryEvent e = parse_event_line(line);
    CHECK(e.activity_id == "3");
    CHECK(e.seq == 0);
    CHECK(e.kind == EventKind::Started);
    CHECK(e.klass == EventClass::SqlBatch);
    CHECK(e.ts == 1000);
    CHECK(e.query_text == "EXECUTE SyncNewSales 2");
    CHECK(e.metadata.username == "sa");
}

TEST_CASE("completed event with zero-cost counters is valid") {
    const std::string line =
        R"({"activity_id":"a","seq":5,"kind":"completed","class":"sql_statement",)"
        R"("ts":2000,"cpu_time_us":0,"duration_us":0})";
    QueryEvent e = parse_event_line(line);
    CHECK(e.kind == EventKind::Completed);
    CHECK(e.metadata.cpu_time_us == 0);
    CHECK(e.metadata.duration_us == 0);
}

TEST_CASE("missing required fields are malformed records") {
    CHECK_THROWS_AS(parse_event_line(R"({"activity_id":"a","seq":0,)"
                                     R"("class":"sql_batch","ts":1})"),
                    MalformedRecord); // no kind
    CHECK_THROWS_AS(parse_event_line("not json at all"), MalformedRecord);
    CHECK_THROWS_AS(parse_event_line(R"({"activity_id":"a","seq":0,)"
                                     R"("kind":"started","class":"nope","ts":1})"),
                    MalformedRecord);
    CHECK_THROWS_AS(parse_event_line("[1,2,3]"), MalformedRecord);
}

TEST_CASE("invariant violations are rejected at parse time") {
    // negative duration
    CHECK_THROWS_AS(
        parse_event_line(
            R"({"activity_id":"a","seq":0,"kind":"completed",)"
            R"("class":"sql_statement","ts":1,"cpu_time_us":1,"duration_us":-5})"),
        InvariantViolation);
    // started without query text
    CHECK_THROWS_AS(parse_event_line(R"({"activity_id":"a","seq":0,)"
                                     R"("kind":"started","class":"sql_batch","ts":1})"),
                    InvariantViolation);
}

TEST_CASE("validate_event flags each violated clause") {
    QueryEvent started = testutil::make_event("a", 0, EventKind::Started,
                                              EventClass::SqlBatch, 10, "X");
    started.query_text.clear();
    CHECK_THROWS_AS(validate_event(started), InvariantViolation);

    QueryEvent completed = testutil::make_event("a", 1, EventKind::Completed,
                                                EventClass::SqlBatch, 20);
    completed.metadata.cpu_time_us.reset();
    CHECK_THROWS_AS(validate_event(completed), InvariantViolation);

    QueryEvent ok = testutil::make_event("a", 0, EventKind::Started,
                                         EventClass::SqlBatch, 10,
                                         "EXECUTE SyncNewSales 2");
    CHECK_NOTHROW(validate_event(ok));
}

TEST_CASE("extras are preserved verbatim through the round trip") {
    const std::string line =
        R"({"activity_id":"a","seq":1,"kind":"started","class":"sql_statement",)"
        R"("ts":3,"query_text":"SELECT 1","custom_tag":{"nested":[1,2]},"zz":"v"})";
    QueryEvent e = parse_event_line(line);
    REQUIRE(e.extras.count("custom_tag") == 1);
    REQUIRE(e.extras.count("zz") == 1);

    const std::string out = serialize_event(e);
    QueryEvent e2 = parse_event_line(out);
    CHECK(e2 == e);
    // serialize is deterministic: a second trip is byte-identical
    CHECK(serialize_event(e2) == out);
}

TEST_CASE("large plan payloads stay on one escaped line") {
    QueryEvent e = testutil::make_event("p", 7, EventKind::Completed,
                                        EventClass::SpStatement, 99);
    std::string payload;
    std::mt19937_64 rng(42);
    for (int i = 0; i < 10 * 1024; ++i) {
        payload.push_back(static_cast<char>("ab\ncd\"e\\f\t"[rng() % 10]));
    }
    e.plan_payload = payload;

    const std::string line = serialize_event(e);
    CHECK(std::count(line.begin(), line.end(), '\n') == 0);
    QueryEvent e2 = parse_event_line(line);
    CHECK(e2 == e);
    CHECK(e2.plan_payload == payload);
    CHECK(serialize_event(e2) == line);
}

namespace {

QueryEvent random_event(std::mt19937_64& rng, std::uint64_t seq) {
    const EventKind kind = rng() % 2 ? EventKind::Started : EventKind::Completed;
    const EventClass klass = static_cast<EventClass>(rng() % 3);
    QueryEvent e = testutil::make_event("act" + std::to_string(rng() % 5), seq,
                                        kind, klass,
                                        static_cast<std::int64_t>(seq * 7 + 1),
                                        "SELECT c" + std::to_string(rng() % 100) +
                                            " FROM t WHERE x = 'a''b\"c\\d'");
    if (rng() % 2) e.metadata.rows_returned = static_cast<std::int64_t>(rng() % 1000);
    if (rng() % 4 == 0) e.plan_payload = std::string(rng() % 64, 'p');
    if (rng() % 3 == 0) e.extras["x_custom"] = "\"quoted \\\"text\\\"\"";
    return e;
}

} // namespace

TEST_CASE("property: parse after serialize is the identity") {
    std::mt19937_64 rng(20240901);
    for (int i = 0; i < 500; ++i) {
        QueryEvent e = random_event(rng, static_cast<std::uint64_t>(i));
        QueryEvent back = parse_event_line(serialize_event(e));
        REQUIRE(back == e);
    }
}

TEST_CASE("property: sorting a shuffled log by (ts, seq) restores it") {
    std::mt19937_64 rng(7);
    std::vector<QueryEvent> log;
    std::int64_t ts = 100;
    for (std::uint64_t i = 0; i < 300; ++i) {
        // equal timestamps happen; seq breaks ties
        if (rng() % 3) ts += static_cast<std::int64_t>(rng() % 3);
        log.push_back(testutil::make_event("a", i,
                                           i % 2 ? EventKind::Completed
                                                 : EventKind::Started,
                                           EventClass::SqlStatement, ts, "S"));
    }
    std::vector<QueryEvent> shuffled = log;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    std::sort(shuffled.begin(), shuffled.end(),
              [](const QueryEvent& a, const QueryEvent& b) {
                  return a.ts != b.ts ? a.ts < b.ts : a.seq < b.seq;
              });
    CHECK(shuffled == log);
}

TEST_CASE("parsing throughput is linear in input bytes") {
    // 10 MB baseline vs 100 MB: ten times the bytes must cost at most
    // twelve times the time.
    auto make_corpus = [](std::size_t target_bytes) {
        std::vector<std::string> lines;
        std::mt19937_64 rng(99);
        std::size_t bytes = 0;
        std::uint64_t seq = 0;
        while (bytes < target_bytes) {
            QueryEvent e = testutil::make_event(
                "a" + std::to_string(rng() % 1000), seq,
                seq % 2 ? EventKind::Completed : EventKind::Started,
                EventClass::SpStatement, static_cast<std::int64_t>(seq + 1),
                "UPDATE t SET a = " + std::to_string(rng()) + " WHERE id = " +
                    std::to_string(rng() % 100000));
            lines.push_back(serialize_event(e));
            bytes += lines.back().size() + 1;
            ++seq;
        }
        return lines;
    };

    auto parse_all = [](const std::vector<std::string>& lines) {
        auto start = std::chrono::steady_clock::now();
        std::uint64_t checksum = 0;
        for (const auto& line : lines) {
            checksum += parse_event_line(line).seq;
        }
        auto end = std::chrono::steady_clock::now();
        CHECK(checksum > 0);
        return std::chrono::duration<double>(end - start).count();
    };

    const auto small = make_corpus(10u << 20);
    const auto big = make_corpus(100u << 20);
    // warm-up, then take the better of two runs each to damp scheduler noise
    parse_all(small);
    const double t_small = std::min(parse_all(small), parse_all(small));
    const double t_big = std::min(parse_all(big), parse_all(big));

    INFO("small=", t_small, "s big=", t_big, "s ratio=", t_big / t_small);
    CHECK(t_big / t_small <= 12.0);
}

TEST_CASE("log file naming") {
    CHECK(log_file_name(0, 0) == "events-0-0.ndjson");
    CHECK(log_file_name(3, 12345) == "events-3-12345.ndjson");
}
