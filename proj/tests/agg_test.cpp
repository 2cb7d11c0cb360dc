#include <doctest.h>

#include <algorithm>

#include "ocel/agg.hpp"
#include "ocel/errors.hpp"
#include "ocel/stream.hpp"

#include "support.hpp"

using namespace ocel;
using testsupport::generated_log;
using testsupport::sample_log;
using testsupport::TempDir;

namespace {

struct UnwindResult {
    std::vector<LifecycleEntry> entries;
    UnwindMetrics metrics;
};

UnwindResult run_unwind(const OcelLog& log, std::size_t budget,
                        const std::filesystem::path& spill_dir,
                        std::size_t workers = 1) {
    OcelLog sorted = sort_events(log);
    MemoryEventSource source(std::move(sorted.events));
    LifecycleStream stream = unwind_group(source, budget, spill_dir, workers);
    UnwindResult result;
    LifecycleEntry entry;
    while (stream.next(entry)) result.entries.push_back(std::move(entry));
    result.metrics = stream.metrics();
    return result;
}

UnwindResult run_filtered(const OcelLog& log,
                          const std::set<std::string>& filter,
                          std::size_t budget,
                          const std::filesystem::path& spill_dir) {
    OcelLog sorted = sort_events(log);
    std::map<std::string, std::string> type_of;
    for (const auto& o : log.objects) type_of[o.id] = o.otype;
    auto resolver = [&type_of](const std::string& id) {
        auto it = type_of.find(id);
        return it == type_of.end() ? kUnknownType : it->second;
    };
    MemoryEventSource source(std::move(sorted.events));
    LifecycleStream stream =
        unwind_group_filtered(source, filter, resolver, budget, spill_dir);
    UnwindResult result;
    LifecycleEntry entry;
    while (stream.next(entry)) result.entries.push_back(std::move(entry));
    result.metrics = stream.metrics();
    return result;
}

std::uint64_t total_steps(const std::vector<LifecycleEntry>& entries) {
    std::uint64_t n = 0;
    for (const auto& e : entries) n += e.lifecycle.size();
    return n;
}

std::vector<std::string> activities_of(const LifecycleEntry& e) {
    std::vector<std::string> out;
    for (const auto& s : e.lifecycle) out.push_back(s.activity);
    return out;
}

} // namespace

TEST_SUITE_BEGIN("agg");

TEST_CASE("empty event stream unwinds to nothing") {
    TempDir dir("agg_empty");
    const auto result = run_unwind(OcelLog{}, 1 << 20, dir.sub("spill"));
    CHECK(result.entries.empty());
    CHECK(result.metrics.spill_bytes == 0);
}

TEST_CASE("sample log lifecycles match the worked example") {
    TempDir dir("agg_sample");
    const auto result = run_unwind(sample_log(), 1 << 20, dir.sub("spill"));

    REQUIRE(result.entries.size() == 3);
    // Ascending object_id order: i1, o1, o2.
    CHECK(result.entries[0].object_id == "i1");
    CHECK(activities_of(result.entries[0]) ==
          std::vector<std::string>{"Emit Invoice", "Record Payment"});
    CHECK(result.entries[1].object_id == "o1");
    CHECK(activities_of(result.entries[1]) ==
          std::vector<std::string>{"Create Order", "Payment"});
    CHECK(result.entries[2].object_id == "o2");
    CHECK(activities_of(result.entries[2]) ==
          std::vector<std::string>{"Create Order", "Change Order",
                                   "Cancel Order"});

    // Triples carry matching timestamps and event ids.
    const OcelLog log = sample_log();
    for (const auto& entry : result.entries)
        for (const auto& step : entry.lifecycle) {
            const auto ev = std::find_if(
                log.events.begin(), log.events.end(),
                [&](const EventRecord& e) { return e.id == step.event_id; });
            REQUIRE(ev != log.events.end());
            CHECK(ev->activity == step.activity);
            CHECK(ev->timestamp == step.timestamp);
            CHECK(std::find(ev->omap.begin(), ev->omap.end(),
                            entry.object_id) != ev->omap.end());
        }
}

TEST_CASE("unwind agrees with the brute-force oracle") {
    TempDir dir("agg_oracle");
    const OcelLog log = generated_log(41, 3000);
    const auto result = run_unwind(log, 64 << 20, dir.sub("spill"));

    const auto want = testsupport::oracle_lifecycles(log);
    REQUIRE(result.entries.size() == want.size());
    for (const auto& entry : result.entries) {
        auto it = want.find(entry.object_id);
        REQUIRE(it != want.end());
        CHECK(entry.lifecycle == it->second);
    }
}

TEST_CASE("spilled runs equal the unlimited-budget run") {
    TempDir dir("agg_spill");
    const OcelLog log = generated_log(42, 50000, 4, 400, 4);

    const auto unlimited = run_unwind(log, 1 << 30, dir.sub("big"));
    CHECK(unlimited.metrics.spill_bytes == 0);

    const auto tight = run_unwind(log, 1 << 20, dir.sub("small"));
    CHECK(tight.metrics.spill_bytes > 0);
    CHECK(tight.entries == unlimited.entries);

    // Conservation: Σ|lifecycle| = Σ|omap|.
    std::uint64_t postings = 0;
    for (const auto& e : log.events) postings += e.omap.size();
    CHECK(total_steps(tight.entries) == postings);

    // Output is in ascending object_id order.
    CHECK(std::is_sorted(tight.entries.begin(), tight.entries.end(),
                         [](const LifecycleEntry& a, const LifecycleEntry& b) {
                             return a.object_id < b.object_id;
                         }));

    // Spill files are gone once the stream is drained.
    std::size_t leftovers = 0;
    if (std::filesystem::exists(dir.sub("small")))
        for ([[maybe_unused]] const auto& e :
             std::filesystem::directory_iterator(dir.sub("small")))
            ++leftovers;
    CHECK(leftovers == 0);
}

TEST_CASE("budget accounting stays under budget plus one record") {
    TempDir dir("agg_budget");
    const OcelLog log = generated_log(43, 20000, 3, 200, 4);
    const std::size_t budget = 256 << 10;
    const auto result = run_unwind(log, budget, dir.sub("spill"));
    CHECK(result.metrics.spill_bytes > 0);
    // Slack of one encoded record; generated events are far below 4 KiB.
    CHECK(result.metrics.high_water_bytes <= budget + 4096);
}

TEST_CASE("a budget below a single entry is refused") {
    TempDir dir("agg_tiny");
    OcelLog log = sample_log();
    CHECK_THROWS_AS(run_unwind(log, 1, dir.sub("spill")), ConfigError);
}

TEST_CASE("two runs over the same input are identical") {
    TempDir dir("agg_deterministic");
    const OcelLog log = generated_log(44, 20000, 4, 300, 4);
    const auto a = run_unwind(log, 512 << 10, dir.sub("a"));
    const auto b = run_unwind(log, 512 << 10, dir.sub("b"));
    CHECK(a.entries == b.entries);
    CHECK(a.metrics.high_water_bytes == b.metrics.high_water_bytes);
    CHECK(a.metrics.spill_bytes == b.metrics.spill_bytes);
}

TEST_CASE("parallel partition processing changes nothing observable") {
    TempDir dir("agg_parallel");
    const OcelLog log = generated_log(45, 30000, 4, 300, 4);
    const auto serial = run_unwind(log, 512 << 10, dir.sub("s"), 1);
    CHECK(serial.metrics.spill_bytes > 0);
    for (std::size_t workers : {2, 4, 8}) {
        CAPTURE(workers);
        const auto parallel = run_unwind(log, 512 << 10, dir.sub("p"), workers);
        CHECK(parallel.entries == serial.entries);
        // Metrics may differ in the parallel phase but stay bounded.
        CHECK(parallel.metrics.spill_bytes == serial.metrics.spill_bytes);
    }
}

TEST_CASE("filtered unwind respects the type filter") {
    TempDir dir("agg_filter");
    const OcelLog log = sample_log();

    // Empty filter: empty output.
    const auto none = run_filtered(log, {}, 1 << 20, dir.sub("none"));
    CHECK(none.entries.empty());

    // Orders only.
    const auto orders = run_filtered(log, {"order"}, 1 << 20, dir.sub("ord"));
    REQUIRE(orders.entries.size() == 2);
    CHECK(orders.entries[0].object_id == "o1");
    CHECK(orders.entries[1].object_id == "o2");

    // All types: identical to the unfiltered run.
    const auto all =
        run_filtered(log, {"order", "invoice"}, 1 << 20, dir.sub("all"));
    const auto plain = run_unwind(log, 1 << 20, dir.sub("plain"));
    CHECK(all.entries == plain.entries);
}

TEST_CASE("dangling object ids resolve to the unknown type") {
    TempDir dir("agg_unknown");
    OcelLog log = sample_log();
    log.events[0].omap.push_back("ghost"); // no object record

    const auto unknown =
        run_filtered(log, {kUnknownType}, 1 << 20, dir.sub("u"));
    REQUIRE(unknown.entries.size() == 1);
    CHECK(unknown.entries[0].object_id == "ghost");
    CHECK(activities_of(unknown.entries[0]) ==
          std::vector<std::string>{"Create Order"});

    // And the typed filter does not pick the ghost up.
    const auto orders = run_filtered(log, {"order"}, 1 << 20, dir.sub("o"));
    for (const auto& e : orders.entries) CHECK(e.object_id != "ghost");
}

TEST_CASE("filtered unwind under spill pressure equals the roomy run") {
    TempDir dir("agg_filter_spill");
    const OcelLog log = generated_log(46, 30000, 4, 300, 4);
    const std::string keep_type = log.objects.front().otype;

    const auto roomy = run_filtered(log, {keep_type}, 1 << 30, dir.sub("r"));
    const auto tight = run_filtered(log, {keep_type}, 256 << 10, dir.sub("t"));
    CHECK(tight.metrics.spill_bytes > 0);
    CHECK(tight.entries == roomy.entries);

    // Conservation within the filter scope.
    std::set<std::string> kept_ids;
    for (const auto& o : log.objects)
        if (o.otype == keep_type) kept_ids.insert(o.id);
    std::uint64_t scoped = 0;
    for (const auto& e : log.events)
        for (const auto& oid : e.omap) scoped += kept_ids.count(oid);
    CHECK(total_steps(tight.entries) == scoped);
}

TEST_SUITE_END();
