#include <doctest.h>

#include <algorithm>
#include <random>

#include "ocel/model.hpp"
#include "ocel/record_codec.hpp"
#include "ocel/timeutil.hpp"

#include "support.hpp"

using namespace ocel;

TEST_SUITE_BEGIN("model");

TEST_CASE("iso8601 parses the documented shapes") {
    CHECK(parse_iso8601("2023-01-01T09:00:00Z")->micros ==
          1672563600ll * 1000000);
    // Space separator and missing zone mean the same instant.
    CHECK(parse_iso8601("2023-01-01 09:00:00") ==
          parse_iso8601("2023-01-01T09:00:00Z"));
    // Offsets shift toward UTC.
    CHECK(parse_iso8601("2023-01-01T10:00:00+01:00") ==
          parse_iso8601("2023-01-01T09:00:00Z"));
    CHECK(parse_iso8601("2023-01-01T08:30:00-00:30") ==
          parse_iso8601("2023-01-01T09:00:00Z"));
    CHECK(parse_iso8601("2023-01-01T10:00:00+0100") ==
          parse_iso8601("2023-01-01T09:00:00Z"));
    CHECK(parse_iso8601("2023-01-01T10:00:00+01") ==
          parse_iso8601("2023-01-01T09:00:00Z"));
    // Fractional seconds keep microseconds and truncate beyond.
    CHECK(parse_iso8601("2023-01-01T09:00:00.123Z")->micros ==
          1672563600123000ll);
    CHECK(parse_iso8601("2023-01-01T09:00:00.123456Z")->micros ==
          1672563600123456ll);
    CHECK(parse_iso8601("2023-01-01T09:00:00.1234569Z")->micros ==
          1672563600123456ll);
    // Pre-epoch dates work.
    CHECK(parse_iso8601("1969-12-31T23:59:59Z")->micros == -1000000);
    // Leap seconds collapse onto the next second.
    CHECK(parse_iso8601("2023-01-01T00:00:60Z") ==
          parse_iso8601("2023-01-01T00:01:00Z"));
}

TEST_CASE("iso8601 rejects malformed text") {
    for (const char* bad :
         {"", "2023-13-01T00:00:00Z", "2023-02-30T00:00:00Z",
          "2023-01-01T24:00:00Z", "2023-01-01", "garbage",
          "2023-01-01T00:00:61Z", "2023-01-01T00:00:00ZZ"}) {
        CAPTURE(bad);
        CHECK(!parse_iso8601(bad).has_value());
    }
}

TEST_CASE("iso8601 formatting round-trips exactly") {
    // Canonical: millisecond precision, six digits only when needed.
    CHECK(format_iso8601(Timestamp{1672563600000000}) ==
          "2023-01-01T09:00:00.000Z");
    CHECK(format_iso8601(Timestamp{1672563600123000}) ==
          "2023-01-01T09:00:00.123Z");
    CHECK(format_iso8601(Timestamp{1672563600123456}) ==
          "2023-01-01T09:00:00.123456Z");

    std::mt19937_64 rng(7);
    for (int i = 0; i < 2000; ++i) {
        // ~ years 1800..2200
        const std::int64_t micros =
            static_cast<std::int64_t>(rng() % 12622780800000000ull) -
            5364662400000000ll;
        const Timestamp ts{micros};
        CHECK(parse_iso8601(format_iso8601(ts)).value() == ts);
    }
}

TEST_CASE("attribute values keep tag and payload in agreement") {
    CHECK(AttributeValue(std::string("x")).tag() == ValueTag::String);
    CHECK(AttributeValue(Timestamp{5}).tag() == ValueTag::TimestampVal);
    CHECK(AttributeValue(std::int64_t{5}).tag() == ValueTag::Integer);
    CHECK(AttributeValue(2.5).tag() == ValueTag::Float);
    CHECK(AttributeValue(true).tag() == ValueTag::Boolean);
    CHECK(AttributeValue(2.5).as_float() == 2.5);
    CHECK(AttributeValue(std::int64_t{5}) != AttributeValue(5.0));
}

TEST_CASE("dedup_omap keeps the first occurrence") {
    EventRecord e;
    e.omap = {"b", "a", "b", "c", "a"};
    dedup_omap(e);
    CHECK(e.omap == std::vector<std::string>{"b", "a", "c"});
}

TEST_CASE("validate: empty log is valid") {
    OcelLog log;
    CHECK(validate(log, false).ok());
    CHECK(validate(log, true).ok());
}

TEST_CASE("validate: sample log is valid, strict included") {
    const OcelLog log = testsupport::sample_log();
    const auto report = validate(log, true);
    for (const auto& v : report.violations) CAPTURE(v);
    CHECK(report.ok());
}

TEST_CASE("validate: dangling omap reference is a violation naming both ids") {
    OcelLog log = testsupport::sample_log();
    log.events[0].omap.push_back("oX");
    const auto report = validate(log, false);
    REQUIRE(!report.ok());
    bool found = false;
    for (const auto& v : report.violations)
        found = found || (v.find("oX") != std::string::npos &&
                          v.find("e1") != std::string::npos);
    CHECK(found);
}

TEST_CASE("validate: duplicate ids, empty ids, bad order are violations") {
    OcelLog log = testsupport::sample_log();
    log.events.push_back(log.events[0]); // duplicate id, also out of order
    CHECK(!validate(log, false).ok());

    log = testsupport::sample_log();
    log.objects.push_back(ObjectRecord{"", "order", {}});
    CHECK(!validate(log, false).ok());

    log = testsupport::sample_log();
    std::swap(log.events[0], log.events[3]);
    CHECK(!validate(log, false).ok());
}

TEST_CASE("validate: strict mode checks metadata coverage") {
    OcelLog log = testsupport::sample_log();
    log.events[0].vmap.emplace("price", AttributeValue(9.5));
    // Non-strict tolerates the undeclared attribute; strict flags it.
    CHECK(validate(log, false).ok());
    CHECK(!validate(log, true).ok());
    log.metadata.attribute_names.insert("price");
    CHECK(validate(log, true).ok());

    log.objects[0].otype = "undeclared";
    CHECK(!validate(log, true).ok());
}

TEST_CASE("validate: empty omap is a warning, not a violation") {
    OcelLog log = testsupport::sample_log();
    log.events[0].omap.clear();
    const auto report = validate(log, false);
    CHECK(report.ok());
    CHECK(!report.warnings.empty());
}

TEST_CASE("sort_events: tie-break, idempotence, permutation") {
    OcelLog log;
    EventRecord a, b;
    a.id = "e2";
    b.id = "e1";
    a.timestamp = b.timestamp = Timestamp{1000};
    log.events = {a, b};
    OcelLog sorted = sort_events(log);
    CHECK(sorted.events[0].id == "e1");
    CHECK(sorted.events[1].id == "e2");

    // Shuffled sample log sorts to the reference order.
    OcelLog sample = testsupport::sample_log();
    OcelLog shuffled = sample;
    std::mt19937_64 rng(3);
    std::shuffle(shuffled.events.begin(), shuffled.events.end(), rng);
    OcelLog resorted = sort_events(shuffled);
    CHECK(resorted.events == sample.events);
    // Idempotent.
    CHECK(sort_events(resorted).events == sample.events);
    // Sorting is what fixes the out-of-order violation.
    CHECK(!validate(shuffled, true).ok());
    CHECK(validate(resorted, true).ok());
}

TEST_CASE("record codec round-trips events and objects") {
    EventRecord ev;
    ev.id = "e1";
    ev.activity = "Create Order";
    ev.timestamp = Timestamp{1672563600123456};
    ev.omap = {"o1", "o2"};
    ev.vmap.emplace("s", AttributeValue(std::string("text \"quoted\"")));
    ev.vmap.emplace("t", AttributeValue(Timestamp{-5}));
    ev.vmap.emplace("i", AttributeValue(std::int64_t{-42}));
    ev.vmap.emplace("f", AttributeValue(0.1));
    ev.vmap.emplace("b", AttributeValue(false));

    std::string buf;
    encode_event(ev, buf);
    EventRecord back;
    REQUIRE(decode_event(buf, back));
    CHECK(back == ev);

    ObjectRecord obj;
    obj.id = "o1";
    obj.otype = "order";
    obj.ovmap.emplace("w", AttributeValue(3.25));
    buf.clear();
    encode_object(obj, buf);
    ObjectRecord oback;
    REQUIRE(decode_object(buf, oback));
    CHECK(oback == obj);

    // Kind confusion is rejected.
    CHECK(!decode_event(buf, back));
}

TEST_CASE("record codec rejects truncation and corruption") {
    EventRecord ev;
    ev.id = "e1";
    ev.activity = "A";
    ev.timestamp = Timestamp{77};
    ev.omap = {"o1"};
    std::string buf;
    encode_event(ev, buf);
    EventRecord back;
    for (std::size_t cut = 0; cut < buf.size(); ++cut) {
        CAPTURE(cut);
        CHECK(!decode_event(std::string_view(buf).substr(0, cut), back));
    }
    // Trailing garbage is rejected too.
    CHECK(!decode_event(buf + "x", back));
}

TEST_CASE("generated logs pass strict validation") {
    const OcelLog log = testsupport::generated_log(11, 2000);
    CHECK(validate(log, true).ok());
}

TEST_SUITE_END();
