#include "ocel/mining.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <unordered_map>

#include <unistd.h>

#include <json.hpp>

#include "ocel/bytes.hpp"
#include "ocel/errors.hpp"
#include "ocel/external_sort.hpp"
#include "ocel/record_codec.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ocel {

namespace {

// Operations that spill get a dedicated directory: the caller's, or a fresh
// one under the system temp dir that is removed when the operation ends.
class SpillDirGuard {
public:
    explicit SpillDirGuard(const fs::path& given) {
        if (given.empty()) {
            static std::atomic<unsigned> counter{0};
            dir_ = fs::temp_directory_path() /
                   ("ocel-mining-" + std::to_string(::getpid()) + "-" +
                    std::to_string(counter.fetch_add(1)));
            owned_ = true;
        } else {
            dir_ = given;
        }
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec)
            throw IoError("cannot create spill directory " + dir_.string());
    }

    ~SpillDirGuard() {
        if (owned_) {
            std::error_code ec;
            fs::remove_all(dir_, ec);
        }
    }

    const fs::path& dir() const { return dir_; }

private:
    fs::path dir_;
    bool owned_ = false;
};

void put_str(std::string& out, std::string_view s) {
    put_varint(out, s.size());
    out.append(s);
}

bool get_str(std::string_view data, std::size_t& pos, std::string& out) {
    std::uint64_t len = 0;
    if (!get_varint(data, pos, len) || data.size() - pos < len) return false;
    out.assign(data.substr(pos, len));
    pos += static_cast<std::size_t>(len);
    return true;
}

std::size_t sorter_budget(std::size_t budget) {
    return std::max<std::size_t>(64 << 10, budget / 8);
}

Mdfg run_mdfg(Store& store, const std::set<std::string>* types,
              std::size_t budget, const fs::path& spill_dir,
              std::size_t workers) {
    Mdfg out;
    out.event_count = store.event_count();

    if (types) {
        for (const auto& t : *types)
            if (t != kUnknownType && !store.metadata().object_types.count(t))
                throw DataError("unknown object type '" + t + "'");
        for (const auto& t : *types) out.types[t];
        if (types->empty()) return out;
    } else {
        for (const auto& t : store.metadata().object_types) out.types[t];
    }

    SpillDirGuard guard(spill_dir);

    std::unordered_map<std::string, std::string> type_cache;
    std::function<std::string(const std::string&)> resolve =
        [&](const std::string& id) -> std::string {
        auto it = type_cache.find(id);
        if (it != type_cache.end()) return it->second;
        auto t = store.object_type_of(id);
        std::string ty = t ? std::move(*t) : std::string(kUnknownType);
        type_cache.emplace(id, ty);
        return ty;
    };

    auto events = store.scan_all_events();
    LifecycleStream stream =
        types ? unwind_group_filtered(events, *types, resolve, budget,
                                      guard.dir(), workers)
              : unwind_group(events, budget, guard.dir(), workers);

    // node_events needs distinct (activity, event) pairs per type: the same
    // event reappears once per object of the type, so pairs go through a
    // dedup sort.
    std::map<std::string, std::unique_ptr<ExternalSorter>> pair_sorters;
    std::size_t sorter_no = 0;

    LifecycleEntry entry;
    std::set<std::string> seen_activities;
    std::string key;
    while (stream.next(entry)) {
        const std::string ty = resolve(entry.object_id);
        MdfgType& g = out.types[ty];
        for (std::size_t i = 0; i + 1 < entry.lifecycle.size(); ++i)
            ++g.arcs[{entry.lifecycle[i].activity,
                      entry.lifecycle[i + 1].activity}];
        seen_activities.clear();
        for (const auto& step : entry.lifecycle)
            seen_activities.insert(step.activity);
        for (const auto& a : seen_activities) ++g.node_objects[a];
        ++g.start_objects[entry.lifecycle.front().activity];
        ++g.end_objects[entry.lifecycle.back().activity];

        auto& sorter = pair_sorters[ty];
        if (!sorter)
            sorter = std::make_unique<ExternalSorter>(
                guard.dir(), "node-events-" + std::to_string(sorter_no++),
                sorter_budget(budget));
        for (const auto& step : entry.lifecycle) {
            key.clear();
            put_str(key, step.activity);
            put_str(key, step.event_id);
            sorter->add(key, {});
        }
    }

    for (auto& [ty, sorter] : pair_sorters) {
        MdfgType& g = out.types[ty];
        auto it = sorter->finish();
        std::string k;
        std::string v;
        std::string prev;
        bool first = true;
        while (it->next(k, v)) {
            if (!first && k == prev) continue;
            std::size_t pos = 0;
            std::string activity;
            if (!get_str(k, pos, activity))
                throw CorruptionError("mdfg: malformed node-event key");
            ++g.node_events[activity];
            prev = k;
            first = false;
        }
    }

    out.agg_metrics = stream.metrics();
    return out;
}

} // namespace

Mdfg mdfg(Store& store, const std::set<std::string>& types,
          std::size_t budget_bytes, const fs::path& spill_dir,
          std::size_t workers) {
    return run_mdfg(store, &types, budget_bytes, spill_dir, workers);
}

Mdfg mdfg_all(Store& store, std::size_t budget_bytes,
              const fs::path& spill_dir, std::size_t workers) {
    return run_mdfg(store, nullptr, budget_bytes, spill_dir, workers);
}

ActivityStats activity_stats(Store& store, const fs::path& spill_dir) {
    ActivityStats out;
    SpillDirGuard guard(spill_dir);
    ExternalSorter sorter(guard.dir(), "activity-object",
                          sorter_budget(store.memory_budget()));
    auto events = store.scan_all_events();
    EventRecord ev;
    std::string key;
    while (events.next(ev)) {
        ActivityRow& row = out[ev.activity];
        ++row.event_count;
        row.total_objects += ev.omap.size();
        for (const auto& oid : ev.omap) {
            key.clear();
            put_str(key, ev.activity);
            put_str(key, oid);
            sorter.add(key, {});
        }
    }
    auto it = sorter.finish();
    std::string k;
    std::string v;
    std::string prev;
    bool first = true;
    while (it->next(k, v)) {
        if (!first && k == prev) continue;
        std::size_t pos = 0;
        std::string activity;
        if (!get_str(k, pos, activity))
            throw CorruptionError("activity_stats: malformed sort key");
        ++out[activity].unique_objects;
        prev = k;
        first = false;
    }
    return out;
}

ObjectTypeStats object_type_stats(Store& store) {
    ObjectTypeStats out;
    // Objects stream in id order and the omap index scans its keys in id
    // order, so one co-walk classifies every referenced id. Referenced ids
    // with no object record land under kUnknownType.
    auto objects = store.scan_all_objects();
    ObjectRecord ob;
    bool have = objects.next(ob);
    store.for_each_referenced_object_id(
        [&](std::string_view id, std::uint64_t) {
            while (have && ob.id < id) {
                ++out[ob.otype].object_count;
                have = objects.next(ob);
            }
            if (have && ob.id == id) {
                auto& row = out[ob.otype];
                ++row.object_count;
                ++row.referenced_count;
                have = objects.next(ob);
            } else {
                auto& row = out[kUnknownType];
                ++row.object_count;
                ++row.referenced_count;
            }
        });
    while (have) {
        ++out[ob.otype].object_count;
        have = objects.next(ob);
    }
    return out;
}

ActivityPairTimes time_between_activities(Store& store,
                                          std::size_t budget_bytes,
                                          const fs::path& spill_dir) {
    ActivityPairTimes out;
    SpillDirGuard guard(spill_dir);

    struct Acc {
        std::uint64_t n = 0;
        double mean = 0;
        double m2 = 0;
        std::int64_t min_us = 0;
        std::int64_t max_us = 0;
    };
    std::map<std::pair<std::string, std::string>, Acc> accs;

    ExternalSorter deltas(guard.dir(), "pair-deltas",
                          sorter_budget(budget_bytes));
    {
        auto events = store.scan_all_events();
        auto stream = unwind_group(events, budget_bytes / 2, guard.dir());
        LifecycleEntry entry;
        std::string key;
        while (stream.next(entry)) {
            for (std::size_t i = 0; i + 1 < entry.lifecycle.size(); ++i) {
                const auto& a = entry.lifecycle[i];
                const auto& b = entry.lifecycle[i + 1];
                const std::int64_t delta_us =
                    b.timestamp.micros - a.timestamp.micros;
                Acc& acc = accs[{a.activity, b.activity}];
                if (acc.n == 0 || delta_us < acc.min_us) acc.min_us = delta_us;
                if (acc.n == 0 || delta_us > acc.max_us) acc.max_us = delta_us;
                ++acc.n;
                const double x = static_cast<double>(delta_us) / 1e6;
                const double d = x - acc.mean;
                acc.mean += d / static_cast<double>(acc.n);
                acc.m2 += d * (x - acc.mean);

                key.clear();
                put_str(key, a.activity);
                put_str(key, b.activity);
                append_sortable_int64(key, delta_us);
                deltas.add(key, {});
            }
        }
    }

    // Second pass over the sorted deltas picks the lower median of each
    // pair group by index; group sizes are already known from the
    // accumulators.
    auto it = deltas.finish();
    std::string k;
    std::string v;
    std::pair<std::string, std::string> cur;
    bool have_cur = false;
    std::uint64_t index = 0;
    while (it->next(k, v)) {
        std::size_t pos = 0;
        std::pair<std::string, std::string> pair;
        if (!get_str(k, pos, pair.first) || !get_str(k, pos, pair.second) ||
            k.size() - pos != 8)
            throw CorruptionError("time_between_activities: malformed sort key");
        const std::int64_t delta_us = read_sortable_int64(
            std::string_view(k).substr(pos));
        if (!have_cur || pair != cur) {
            cur = pair;
            have_cur = true;
            index = 0;
        }
        const Acc& acc = accs.at(pair);
        if (index == (acc.n - 1) / 2) {
            PairTimesRow& row = out[pair];
            row.median_s = static_cast<double>(delta_us) / 1e6;
        }
        ++index;
    }

    for (const auto& [pair, acc] : accs) {
        PairTimesRow& row = out[pair];
        row.n = acc.n;
        row.min_s = static_cast<double>(acc.min_us) / 1e6;
        row.max_s = static_cast<double>(acc.max_us) / 1e6;
        row.mean_s = acc.mean;
        row.stdev_s = acc.n ? std::sqrt(acc.m2 / static_cast<double>(acc.n)) : 0;
    }
    return out;
}

std::optional<LifecycleEntry> lifecycle(Store& store,
                                        const std::string& object_id) {
    auto scan = store.scan_events_by_object(object_id);
    LifecycleEntry entry;
    entry.object_id = object_id;
    EventRecord ev;
    while (scan.next(ev))
        entry.lifecycle.push_back(
            LifecycleStep{ev.activity, ev.timestamp, ev.id});
    if (entry.lifecycle.empty()) return std::nullopt;
    return entry;
}

// --- serialization -----------------------------------------------------------

namespace {

json counts_to_json(const std::map<std::string, std::uint64_t>& m) {
    json out = json::object();
    for (const auto& [k, v] : m) out[k] = v;
    return out;
}

std::string dot_escape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (const char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

std::string csv_quote(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos)
        return std::string(s);
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void append_double(std::string& out, double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
}

} // namespace

std::string mdfg_to_json(const Mdfg& g) {
    json root;
    root["event_count"] = g.event_count;
    json types = json::object();
    for (const auto& [name, t] : g.types) {
        json arcs = json::array();
        for (const auto& [pair, count] : t.arcs)
            arcs.push_back(json{{"from", pair.first},
                                {"to", pair.second},
                                {"count", count}});
        types[name] = json{{"arcs", arcs},
                           {"node_events", counts_to_json(t.node_events)},
                           {"node_objects", counts_to_json(t.node_objects)},
                           {"start_objects", counts_to_json(t.start_objects)},
                           {"end_objects", counts_to_json(t.end_objects)}};
    }
    root["types"] = types;
    return root.dump(2) + "\n";
}

std::string mdfg_to_dot(const Mdfg& g) {
    std::string out;
    bool first_graph = true;
    for (const auto& [name, t] : g.types) {
        if (!first_graph) out += "\n";
        first_graph = false;
        out += "digraph \"" + dot_escape(name) + "\" {\n";
        out += "  rankdir=LR;\n";
        out += "  node [shape=box];\n";
        const bool endpoints = !t.start_objects.empty();
        if (endpoints) {
            out += "  \"__start\" [shape=circle, label=\"\xE2\x96\xB6\"];\n";
            out += "  \"__end\" [shape=doublecircle, label=\"\xE2\x96\xA0\"];\n";
        }
        for (const auto& [activity, events] : t.node_events) {
            const auto obj_it = t.node_objects.find(activity);
            const std::uint64_t objects =
                obj_it == t.node_objects.end() ? 0 : obj_it->second;
            out += "  \"" + dot_escape(activity) + "\" [label=\"" +
                   dot_escape(activity) + "\\nevents: " +
                   std::to_string(events) + ", objects: " +
                   std::to_string(objects) + "\"];\n";
        }
        for (const auto& [pair, count] : t.arcs)
            out += "  \"" + dot_escape(pair.first) + "\" -> \"" +
                   dot_escape(pair.second) + "\" [label=\"" +
                   std::to_string(count) + "\"];\n";
        // Endpoint arcs are presentation only: no labels, dashed.
        for (const auto& [activity, count] : t.start_objects)
            out += "  \"__start\" -> \"" + dot_escape(activity) +
                   "\" [style=dashed];\n";
        for (const auto& [activity, count] : t.end_objects)
            out += "  \"" + dot_escape(activity) +
                   "\" -> \"__end\" [style=dashed];\n";
        out += "}\n";
    }
    return out;
}

std::string activity_stats_to_json(const ActivityStats& s) {
    json root = json::object();
    for (const auto& [activity, row] : s)
        root[activity] = json{{"event_count", row.event_count},
                              {"total_objects", row.total_objects},
                              {"unique_objects", row.unique_objects}};
    return root.dump(2) + "\n";
}

std::string activity_stats_to_csv(const ActivityStats& s) {
    std::string out = "activity,event_count,total_objects,unique_objects\n";
    for (const auto& [activity, row] : s) {
        out += csv_quote(activity);
        out += "," + std::to_string(row.event_count);
        out += "," + std::to_string(row.total_objects);
        out += "," + std::to_string(row.unique_objects);
        out += "\n";
    }
    return out;
}

std::string object_type_stats_to_json(const ObjectTypeStats& s) {
    json root = json::object();
    for (const auto& [otype, row] : s)
        root[otype] = json{{"object_count", row.object_count},
                           {"referenced_count", row.referenced_count}};
    return root.dump(2) + "\n";
}

std::string object_type_stats_to_csv(const ObjectTypeStats& s) {
    std::string out = "object_type,object_count,referenced_count\n";
    for (const auto& [otype, row] : s) {
        out += csv_quote(otype);
        out += "," + std::to_string(row.object_count);
        out += "," + std::to_string(row.referenced_count);
        out += "\n";
    }
    return out;
}

std::string pair_times_to_json(const ActivityPairTimes& t) {
    json root = json::array();
    for (const auto& [pair, row] : t)
        root.push_back(json{{"from", pair.first},
                            {"to", pair.second},
                            {"n", row.n},
                            {"min_s", row.min_s},
                            {"max_s", row.max_s},
                            {"mean_s", row.mean_s},
                            {"median_s", row.median_s},
                            {"stdev_s", row.stdev_s}});
    return root.dump(2) + "\n";
}

std::string pair_times_to_csv(const ActivityPairTimes& t) {
    std::string out = "from,to,n,min_s,max_s,mean_s,median_s,stdev_s\n";
    for (const auto& [pair, row] : t) {
        out += csv_quote(pair.first) + "," + csv_quote(pair.second);
        out += "," + std::to_string(row.n);
        for (const double v :
             {row.min_s, row.max_s, row.mean_s, row.median_s, row.stdev_s}) {
            out += ",";
            append_double(out, v);
        }
        out += "\n";
    }
    return out;
}

} // namespace ocel
