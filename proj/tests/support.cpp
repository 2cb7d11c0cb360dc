#include "support.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>

#include "ocel/bench.hpp"
#include "ocel/stream.hpp"
#include "ocel/timeutil.hpp"

namespace fs = std::filesystem;
using namespace ocel;

namespace testsupport {

TempDir::TempDir(const std::string& label) {
    static std::atomic<unsigned> counter{0};
    dir_ = fs::temp_directory_path() /
           ("ocel-test-" + label + "-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter.fetch_add(1)));
    std::error_code ec;
    fs::remove_all(dir_, ec);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(dir_, ec);
}

OcelLog sample_log() {
    OcelLog log;
    log.metadata.version = "1.0";
    log.metadata.ordering = "timestamp";
    log.metadata.object_types = {"order", "invoice"};

    auto event = [](const char* id, const char* activity, const char* ts,
                    std::vector<std::string> omap) {
        EventRecord e;
        e.id = id;
        e.activity = activity;
        e.timestamp = parse_iso8601(ts).value();
        e.omap = std::move(omap);
        return e;
    };
    log.events = {
        event("e1", "Create Order", "2023-01-01T09:00:00Z", {"o1"}),
        event("e2", "Create Order", "2023-01-01T10:00:00Z", {"o2"}),
        event("e3", "Payment", "2023-01-02T09:00:00Z", {"o1"}),
        event("e4", "Change Order", "2023-01-02T11:00:00Z", {"o2"}),
        event("e5", "Cancel Order", "2023-01-03T09:00:00Z", {"o2"}),
        event("e6", "Emit Invoice", "2023-01-03T10:00:00Z", {"i1"}),
        event("e7", "Record Payment", "2023-01-04T09:00:00Z", {"i1"}),
    };
    log.objects = {
        ObjectRecord{"o1", "order", {}},
        ObjectRecord{"o2", "order", {}},
        ObjectRecord{"i1", "invoice", {}},
    };
    return log;
}

std::string sample_log_json() {
    return R"({
  "ocel:global-log": {
    "ocel:version": "1.0",
    "ocel:ordering": "timestamp",
    "ocel:attribute-names": [],
    "ocel:object-types": ["order", "invoice"]
  },
  "ocel:global-event": {},
  "ocel:global-object": {},
  "ocel:events": {
    "e1": {"ocel:activity": "Create Order", "ocel:timestamp": "2023-01-01T09:00:00Z", "ocel:omap": ["o1"], "ocel:vmap": {}},
    "e2": {"ocel:activity": "Create Order", "ocel:timestamp": "2023-01-01T10:00:00Z", "ocel:omap": ["o2"], "ocel:vmap": {}},
    "e3": {"ocel:activity": "Payment", "ocel:timestamp": "2023-01-02T09:00:00Z", "ocel:omap": ["o1"], "ocel:vmap": {}},
    "e4": {"ocel:activity": "Change Order", "ocel:timestamp": "2023-01-02T11:00:00Z", "ocel:omap": ["o2"], "ocel:vmap": {}},
    "e5": {"ocel:activity": "Cancel Order", "ocel:timestamp": "2023-01-03T09:00:00Z", "ocel:omap": ["o2"], "ocel:vmap": {}},
    "e6": {"ocel:activity": "Emit Invoice", "ocel:timestamp": "2023-01-03T10:00:00Z", "ocel:omap": ["i1"], "ocel:vmap": {}},
    "e7": {"ocel:activity": "Record Payment", "ocel:timestamp": "2023-01-04T09:00:00Z", "ocel:omap": ["i1"], "ocel:vmap": {}}
  },
  "ocel:objects": {
    "o1": {"ocel:type": "order", "ocel:ovmap": {}},
    "o2": {"ocel:type": "order", "ocel:ovmap": {}},
    "i1": {"ocel:type": "invoice", "ocel:ovmap": {}}
  }
}
)";
}

std::unique_ptr<Store> store_with(const fs::path& dir, const OcelLog& log,
                                  std::size_t budget) {
    auto store = Store::create(dir.string(), StoreOptions{budget});
    MemoryRecordStream stream(log);
    store->ingest(stream);
    return store;
}

OcelLog generated_log(std::uint64_t seed, std::uint64_t n_events,
                      std::uint32_t types, std::uint32_t objects_per_type,
                      std::uint32_t omap_max) {
    GenSpec spec;
    spec.seed = seed;
    spec.n_events = n_events;
    spec.n_object_types = types;
    spec.objects_per_type = objects_per_type;
    spec.omap_min = 1;
    spec.omap_max = omap_max;
    spec.activities_per_type = 5;
    spec.vmap_attributes = 2;
    auto stream = generator_stream(spec);
    return collect(*stream);
}

namespace {

bool sorted_by_id_equal(std::vector<EventRecord> a, std::vector<EventRecord> b) {
    auto by_id = [](const EventRecord& x, const EventRecord& y) {
        return x.id < y.id;
    };
    std::sort(a.begin(), a.end(), by_id);
    std::sort(b.begin(), b.end(), by_id);
    return a == b;
}

bool sorted_by_id_equal(std::vector<ObjectRecord> a,
                        std::vector<ObjectRecord> b) {
    auto by_id = [](const ObjectRecord& x, const ObjectRecord& y) {
        return x.id < y.id;
    };
    std::sort(a.begin(), a.end(), by_id);
    std::sort(b.begin(), b.end(), by_id);
    return a == b;
}

// id -> otype, with dangling omap ids mapping to kUnknownType.
std::map<std::string, std::string> type_of_map(const OcelLog& log) {
    std::map<std::string, std::string> out;
    for (const auto& obj : log.objects) out[obj.id] = obj.otype;
    return out;
}

} // namespace

bool semantic_equal(const OcelLog& a, const OcelLog& b) {
    return a.metadata == b.metadata &&
           sorted_by_id_equal(a.events, b.events) &&
           sorted_by_id_equal(a.objects, b.objects);
}

std::map<std::string, std::vector<LifecycleStep>> oracle_lifecycles(
    const OcelLog& log) {
    OcelLog sorted = sort_events(log);
    std::map<std::string, std::vector<LifecycleStep>> out;
    for (const auto& ev : sorted.events) {
        EventRecord deduped = ev;
        dedup_omap(deduped);
        for (const auto& oid : deduped.omap)
            out[oid].push_back(
                LifecycleStep{ev.activity, ev.timestamp, ev.id});
    }
    return out;
}

Mdfg oracle_mdfg(const OcelLog& log, const std::set<std::string>* types) {
    Mdfg out;
    out.event_count = log.events.size();
    const auto resolve_map = type_of_map(log);
    auto resolve = [&](const std::string& oid) -> std::string {
        auto it = resolve_map.find(oid);
        return it == resolve_map.end() ? kUnknownType : it->second;
    };

    if (types) {
        for (const auto& t : *types) out.types[t];
        if (types->empty()) return out;
    } else {
        for (const auto& t : log.metadata.object_types) out.types[t];
        for (const auto& obj : log.objects) out.types[obj.otype];
    }

    // Distinct (type, activity, event) triples for node_events.
    std::map<std::string, std::map<std::string, std::set<std::string>>>
        type_act_events;

    for (const auto& [oid, steps] : oracle_lifecycles(log)) {
        const std::string type = resolve(oid);
        if (types && !types->count(type)) continue;
        MdfgType& graph = out.types[type];
        std::set<std::string> seen_activities;
        for (std::size_t i = 0; i < steps.size(); ++i) {
            type_act_events[type][steps[i].activity].insert(steps[i].event_id);
            if (seen_activities.insert(steps[i].activity).second)
                ++graph.node_objects[steps[i].activity];
            if (i + 1 < steps.size())
                ++graph.arcs[{steps[i].activity, steps[i + 1].activity}];
        }
        ++graph.start_objects[steps.front().activity];
        ++graph.end_objects[steps.back().activity];
    }
    for (const auto& [type, acts] : type_act_events)
        for (const auto& [act, events] : acts)
            out.types[type].node_events[act] = events.size();
    return out;
}

ActivityStats oracle_activity_stats(const OcelLog& log) {
    ActivityStats out;
    std::map<std::string, std::set<std::string>> uniq;
    for (const auto& ev : log.events) {
        EventRecord deduped = ev;
        dedup_omap(deduped);
        ActivityRow& row = out[ev.activity];
        ++row.event_count;
        row.total_objects += deduped.omap.size();
        for (const auto& oid : deduped.omap) uniq[ev.activity].insert(oid);
    }
    for (auto& [act, row] : out)
        row.unique_objects = uniq[act].size();
    return out;
}

ObjectTypeStats oracle_object_type_stats(const OcelLog& log) {
    ObjectTypeStats out;
    const auto resolve = type_of_map(log);
    for (const auto& obj : log.objects) ++out[obj.otype].object_count;
    std::set<std::string> referenced;
    for (const auto& ev : log.events)
        for (const auto& oid : ev.omap) referenced.insert(oid);
    for (const auto& oid : referenced) {
        auto it = resolve.find(oid);
        if (it == resolve.end()) {
            ObjectTypeRow& row = out[kUnknownType];
            ++row.object_count;
            ++row.referenced_count;
        } else {
            ++out[it->second].referenced_count;
        }
    }
    return out;
}

ActivityPairTimes oracle_pair_times(const OcelLog& log) {
    std::map<std::pair<std::string, std::string>, std::vector<std::int64_t>>
        deltas;
    for (const auto& [oid, steps] : oracle_lifecycles(log))
        for (std::size_t i = 0; i + 1 < steps.size(); ++i)
            deltas[{steps[i].activity, steps[i + 1].activity}].push_back(
                steps[i + 1].timestamp.micros - steps[i].timestamp.micros);

    ActivityPairTimes out;
    for (auto& [pair, micros] : deltas) {
        std::sort(micros.begin(), micros.end());
        PairTimesRow row;
        row.n = micros.size();
        row.min_s = static_cast<double>(micros.front()) / 1e6;
        row.max_s = static_cast<double>(micros.back()) / 1e6;
        double sum = 0;
        for (const auto d : micros) sum += static_cast<double>(d) / 1e6;
        row.mean_s = sum / static_cast<double>(row.n);
        row.median_s =
            static_cast<double>(micros[(micros.size() - 1) / 2]) / 1e6;
        double m2 = 0;
        for (const auto d : micros) {
            const double x = static_cast<double>(d) / 1e6 - row.mean_s;
            m2 += x * x;
        }
        row.stdev_s = std::sqrt(m2 / static_cast<double>(row.n));
        out[pair] = row;
    }
    return out;
}

bool close_rel(double a, double b, double tol) {
    const double scale = std::max({std::fabs(a), std::fabs(b), 1.0});
    return std::fabs(a - b) <= tol * scale;
}

std::string diff_pair_times(const ActivityPairTimes& got,
                            const ActivityPairTimes& want) {
    if (got.size() != want.size())
        return "pair count " + std::to_string(got.size()) + " vs " +
               std::to_string(want.size());
    auto it = want.begin();
    for (const auto& [pair, row] : got) {
        const auto& [wpair, wrow] = *it++;
        const std::string name = pair.first + "->" + pair.second;
        if (pair != wpair) return "pair key mismatch at " + name;
        if (row.n != wrow.n) return name + ": n";
        if (row.min_s != wrow.min_s) return name + ": min";
        if (row.max_s != wrow.max_s) return name + ": max";
        if (row.median_s != wrow.median_s) return name + ": median";
        if (!close_rel(row.mean_s, wrow.mean_s)) return name + ": mean";
        if (!close_rel(row.stdev_s, wrow.stdev_s)) return name + ": stdev";
    }
    return "";
}

} // namespace testsupport
