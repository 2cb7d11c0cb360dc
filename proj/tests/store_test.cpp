#include <doctest.h>

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "ocel/errors.hpp"
#include "ocel/format.hpp"
#include "ocel/sstable.hpp"
#include "ocel/store.hpp"
#include "ocel/stream.hpp"

#include "support.hpp"

using namespace ocel;
using testsupport::generated_log;
using testsupport::sample_log;
using testsupport::semantic_equal;
using testsupport::store_with;
using testsupport::TempDir;

namespace {

std::vector<EventRecord> drain(EventScan scan) {
    std::vector<EventRecord> out;
    EventRecord ev;
    while (scan.next(ev)) out.push_back(ev);
    return out;
}

std::vector<ObjectRecord> drain(ObjectScan scan) {
    std::vector<ObjectRecord> out;
    ObjectRecord ob;
    while (scan.next(ob)) out.push_back(ob);
    return out;
}

std::uint64_t total_omap(const OcelLog& log) {
    std::uint64_t n = 0;
    for (const auto& e : log.events) n += e.omap.size();
    return n;
}

} // namespace

TEST_SUITE_BEGIN("store");

TEST_CASE("empty ingest: zero stats, empty queries, clean audit") {
    TempDir dir("store_empty");
    OcelLog empty;
    auto store = store_with(dir.path(), empty);
    CHECK(store->event_count() == 0);
    CHECK(store->object_count() == 0);
    CHECK(store->posting_count() == 0);
    CHECK(!store->get_event("e1").has_value());
    CHECK(!store->get_object("o1").has_value());
    CHECK(drain(store->scan_all_events()).empty());
    CHECK(drain(store->scan_objects_by_type("nonexistent")).empty());
    CHECK(store->audit().ok());

    auto exported = store->export_stream();
    LogRecord record;
    CHECK(!exported->next(record));
}

TEST_CASE("sample log: stats, lookups, and scans match the paper example") {
    TempDir dir("store_sample");
    const OcelLog log = sample_log();

    auto store = Store::create(dir.path().string());
    MemoryRecordStream in(log);
    const IngestStats stats = store->ingest(in);

    CHECK(stats.events == log.events.size());
    CHECK(stats.objects == log.objects.size());
    CHECK(stats.postings == total_omap(log)); // Σ|omap|, counted directly
    CHECK(stats.segment_bytes == store->segment_bytes());
    CHECK(stats.index_bytes == store->index_bytes());
    CHECK(stats.segment_bytes > 0);
    CHECK(stats.index_bytes > 0);

    const auto e1 = store->get_event("e1");
    REQUIRE(e1.has_value());
    CHECK(e1->activity == "Create Order");
    CHECK(*e1 == log.events[0]);

    const auto i1 = store->get_object("i1");
    REQUIRE(i1.has_value());
    CHECK(i1->otype == "invoice");
    CHECK(store->object_type_of("i1") == std::string("invoice"));
    CHECK(!store->object_type_of("ghost").has_value());

    // Both orders begin with Create Order.
    auto by_activity = drain(store->scan_events_by_activity("Create Order"));
    REQUIRE(by_activity.size() == 2);
    CHECK(by_activity[0].id == "e1");
    CHECK(by_activity[1].id == "e2");

    // o1's two events in order: the paper's first lifecycle.
    auto o1_events = drain(store->scan_events_by_object("o1"));
    REQUIRE(o1_events.size() == 2);
    CHECK(o1_events[0].activity == "Create Order");
    CHECK(o1_events[1].activity == "Payment");

    CHECK(store->audit().ok());
}

TEST_CASE("scans agree with full-scan oracles on a generated log") {
    TempDir dir("store_scans");
    const OcelLog log = generated_log(31, 5000);
    auto store = store_with(dir.path(), log);

    // Collect the distinct keys straight from the log.
    std::set<std::string> activities, otypes;
    std::set<std::string> object_ids;
    for (const auto& e : log.events) {
        activities.insert(e.activity);
        for (const auto& o : e.omap) object_ids.insert(o);
    }
    for (const auto& o : log.objects) otypes.insert(o.otype);

    for (const auto& act : activities) {
        std::vector<EventRecord> want;
        for (const auto& e : log.events)
            if (e.activity == act) want.push_back(e);
        std::sort(want.begin(), want.end(), event_order_less);
        auto scan = store->scan_events_by_activity(act);
        CHECK(scan.matches() == want.size());
        CHECK(drain(std::move(scan)) == want);
    }

    std::size_t checked = 0;
    for (const auto& oid : object_ids) {
        if (++checked > 200) break; // a sample is plenty
        std::vector<EventRecord> want;
        for (const auto& e : log.events)
            if (std::find(e.omap.begin(), e.omap.end(), oid) != e.omap.end())
                want.push_back(e);
        std::sort(want.begin(), want.end(), event_order_less);
        auto scan = store->scan_events_by_object(oid);
        CHECK(scan.matches() == want.size());
        CHECK(drain(std::move(scan)) == want);
    }

    for (const auto& t : otypes) {
        std::vector<ObjectRecord> want;
        for (const auto& o : log.objects)
            if (o.otype == t) want.push_back(o);
        std::sort(want.begin(), want.end(),
                  [](const ObjectRecord& a, const ObjectRecord& b) {
                      return a.id < b.id;
                  });
        CHECK(drain(store->scan_objects_by_type(t)) == want);
    }

    // Full scans return everything in order.
    auto all_events = drain(store->scan_all_events());
    CHECK(all_events.size() == log.events.size());
    CHECK(std::is_sorted(all_events.begin(), all_events.end(), event_order_less));

    // Referenced-object walk agrees with the omap index shape.
    std::map<std::string, std::uint64_t> refs_want;
    for (const auto& e : log.events)
        for (const auto& o : e.omap) ++refs_want[o];
    std::map<std::string, std::uint64_t> refs_got;
    store->for_each_referenced_object_id(
        [&](std::string_view id, std::uint64_t refs) {
            refs_got.emplace(std::string(id), refs);
        });
    CHECK(refs_got == refs_want);
}

TEST_CASE("indexed reads touch only matching records") {
    TempDir dir("store_touched");
    const OcelLog log = generated_log(32, 3000);
    auto store = store_with(dir.path(), log);

    store->reset_records_touched();
    CHECK(store->get_event("nope") == std::nullopt);
    CHECK(store->records_touched() == 0); // miss resolved by index alone

    store->reset_records_touched();
    REQUIRE(store->get_event(log.events[100].id).has_value());
    CHECK(store->records_touched() == 1);

    store->reset_records_touched();
    auto scan = store->scan_events_by_activity(log.events[0].activity);
    const auto matched = drain(std::move(scan));
    CHECK(store->records_touched() == matched.size());

    // The omap-index walk reads no records at all.
    store->reset_records_touched();
    store->for_each_referenced_object_id([](std::string_view, std::uint64_t) {});
    CHECK(store->records_touched() == 0);
}

TEST_CASE("duplicate ids abort the ingest before anything is written") {
    TempDir dir("store_dup");
    OcelLog bad = sample_log();
    bad.events.push_back(bad.events[0]); // duplicate "e1"
    bad = sort_events(bad);

    auto store = Store::create(dir.path().string());
    {
        MemoryRecordStream in(bad);
        try {
            store->ingest(in);
            FAIL("expected DataError");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find("e1") != std::string::npos);
        }
    }
    CHECK(store->event_count() == 0);

    // The failed attempt left no log behind, so a clean ingest still works.
    {
        MemoryRecordStream in(sample_log());
        const IngestStats stats = store->ingest(in);
        CHECK(stats.events == 7);
    }
    CHECK(store->audit().ok());

    TempDir dir2("store_dup_obj");
    OcelLog bad_obj = sample_log();
    bad_obj.objects.push_back(bad_obj.objects[0]);
    auto store2 = Store::create(dir2.path().string());
    MemoryRecordStream in2(bad_obj);
    CHECK_THROWS_AS(store2->ingest(in2), DataError);
}

TEST_CASE("one writer at a time; reads may run alongside") {
    TempDir dir("store_lock");
    {
        auto writer = store_with(dir.path(), sample_log());
        // Second writable handle is refused while the first is open.
        CHECK_THROWS_AS(Store::open(dir.path().string()), IoError);
        // Read-only handles are fine and see the committed state.
        auto reader = Store::open_read_only(dir.path().string());
        CHECK(reader->event_count() == 7);
        CHECK(reader->read_only());
    }
    // Lock released on close.
    auto again = Store::open(dir.path().string());
    CHECK(again->event_count() == 7);
}

TEST_CASE("read-only handles cannot ingest; create refuses occupied roots") {
    TempDir dir("store_ro");
    { store_with(dir.path(), sample_log()); }

    auto ro = Store::open_read_only(dir.path().string());
    MemoryRecordStream in(sample_log());
    CHECK_THROWS_AS(ro->ingest(in), ConfigError);

    CHECK_THROWS(Store::create(dir.path().string()));

    // A second ingest into a store that already holds a log is refused.
    auto rw = Store::open(dir.path().string());
    MemoryRecordStream in2(sample_log());
    CHECK_THROWS_AS(rw->ingest(in2), ConfigError);
}

TEST_CASE("export round-trips through the store") {
    TempDir dir("store_export");
    const OcelLog log = generated_log(33, 1200);
    auto store = store_with(dir.path(), log);

    auto exported = store->export_stream();
    const OcelLog back = collect(*exported);
    CHECK(semantic_equal(back, log));
    CHECK(back.events.size() == store->event_count()); // conservation
}

TEST_CASE("reopen after clean close answers identically") {
    TempDir dir("store_reopen");
    const OcelLog log = generated_log(34, 800);
    std::vector<EventRecord> want;
    {
        auto store = store_with(dir.path(), log);
        want = drain(store->scan_events_by_activity(log.events[0].activity));
    }
    auto store = Store::open_read_only(dir.path().string());
    CHECK(store->event_count() == log.events.size());
    CHECK(drain(store->scan_events_by_activity(log.events[0].activity)) == want);
    CHECK(semantic_equal(collect(*store->export_stream()), log));
}

TEST_CASE("audit pinpoints a surgically removed index posting") {
    TempDir dir("store_doctor");
    { store_with(dir.path(), generated_log(35, 400)); }

    // Rewrite the activity index with one posting dropped from one key.
    const auto index_path = dir.path() / "index" / "activity.idx";
    const auto tmp_path = dir.path() / "index" / "activity.idx.new";
    std::string victim;
    SstWriter::Totals totals;
    {
        SstReader reader(index_path.string(), IndexKind::Activity);
        SstWriter writer(tmp_path.string(), IndexKind::Activity);
        bool dropped = false;
        reader.scan([&](std::string_view key,
                        const std::vector<std::uint64_t>& postings) {
            std::vector<std::uint64_t> kept = postings;
            if (!dropped && kept.size() > 1) {
                victim = std::string(key);
                kept.pop_back();
                dropped = true;
            }
            writer.add(key, kept);
        });
        REQUIRE(dropped);
        totals = writer.finish();
    }
    std::filesystem::rename(tmp_path, index_path);

    // Keep the manifest in step so only the dropped posting is off.
    const auto manifest_path = dir.path() / "MANIFEST";
    nlohmann::json manifest;
    {
        std::ifstream in(manifest_path);
        in >> manifest;
    }
    manifest["indexes"]["activity"]["bytes"] = totals.file_bytes;
    manifest["indexes"]["activity"]["crc"] = totals.crc;
    manifest["indexes"]["activity"]["postings"] = totals.postings_total;
    {
        std::ofstream out(manifest_path);
        out << manifest.dump(2) << "\n";
    }

    auto store = Store::open(dir.path().string());
    const AuditReport report = store->audit();
    REQUIRE(report.violations.size() == 1);
    CHECK(report.violations[0].find("activity.idx") != std::string::npos);
    CHECK(report.violations[0].find(victim) != std::string::npos);
    CHECK(report.violations[0].find("missing 1 posting") != std::string::npos);
}

TEST_CASE("crash recovery: truncated tail discarded, survivors queryable") {
    TempDir dir("store_crash");
    const OcelLog log = generated_log(36, 600);
    std::uint64_t committed_events = 0;
    {
        auto store = store_with(dir.path(), log);
        committed_events = store->event_count();
    }

    // Chop bytes off the event segment mid-record and delete one index, as
    // a crash between segment write and index commit would.
    const auto seg = dir.path() / "segments" / "events-000.seg";
    std::filesystem::resize_file(seg, std::filesystem::file_size(seg) - 101);
    std::filesystem::remove(dir.path() / "index" / "omap.idx");

    // Read-only open refuses: the store needs recovery.
    CHECK_THROWS(Store::open_read_only(dir.path().string()));

    auto store = Store::open(dir.path().string());
    CHECK(!store->recovery_notes().empty());
    CHECK(store->event_count() < committed_events);
    CHECK(store->event_count() > 0);

    // Recovery rebuilt a consistent view: audit passes and carries notes.
    const AuditReport report = store->audit();
    for (const auto& v : report.violations) CAPTURE(v);
    CHECK(report.ok());
    CHECK(!report.notes.empty());

    // Every surviving event is still fully queryable via every path.
    std::vector<EventRecord> survivors = drain(store->scan_all_events());
    CHECK(survivors.size() == store->event_count());
    for (std::size_t i = 0; i < survivors.size(); i += 37) {
        const auto& ev = survivors[i];
        const auto got = store->get_event(ev.id);
        REQUIRE(got.has_value());
        CHECK(*got == ev);
        const auto by_act = drain(store->scan_events_by_activity(ev.activity));
        CHECK(std::find(by_act.begin(), by_act.end(), ev) != by_act.end());
        if (!ev.omap.empty()) {
            const auto by_obj = drain(store->scan_events_by_object(ev.omap[0]));
            CHECK(std::find(by_obj.begin(), by_obj.end(), ev) != by_obj.end());
        }
    }

    // The recovered state persists across a clean reopen.
    const std::uint64_t recovered = store->event_count();
    store.reset();
    auto reopened = Store::open_read_only(dir.path().string());
    CHECK(reopened->event_count() == recovered);
    CHECK(reopened->audit().ok());
}

TEST_CASE("segments beat JSON on size for a 1000-event log") {
    TempDir dir("store_compact");
    const OcelLog log = generated_log(37, 1000);
    auto store = store_with(dir.path(), log);

    StringSink sink;
    MemoryRecordStream stream(log);
    write_log_to(stream, sink, LogFormat::Json);
    CHECK(store->segment_bytes() < sink.str().size());
}

TEST_SUITE_END();
