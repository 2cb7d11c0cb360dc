#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>

#include "ocel/agg.hpp"
#include "ocel/store.hpp"

namespace ocel {

// Directly-follows graph for one object type. Arcs hold only observed
// successions; start/end frequencies are kept separately so renderers can
// draw ▶/■ endpoints without them ever entering the arc data.
struct MdfgType {
    // (activity_a, activity_b) -> number of direct successions in the
    // lifecycles of this type's objects.
    std::map<std::pair<std::string, std::string>, std::uint64_t> arcs;
    // activity -> events carrying >= 1 object of this type.
    std::map<std::string, std::uint64_t> node_events;
    // activity -> distinct objects of this type seen at this activity.
    std::map<std::string, std::uint64_t> node_objects;
    // activity -> objects whose lifecycle starts/ends with it
    // (presentation data for graph endpoints).
    std::map<std::string, std::uint64_t> start_objects;
    std::map<std::string, std::uint64_t> end_objects;

    bool operator==(const MdfgType&) const = default;
};

// Multi-DFG: one graph per object type, plus the global event count.
struct Mdfg {
    std::map<std::string, MdfgType> types;
    std::uint64_t event_count = 0;
    UnwindMetrics agg_metrics; // from the underlying unwind/group run

    bool arcs_equal(const Mdfg& other) const {
        if (types.size() != other.types.size()) return false;
        for (const auto& [name, g] : types) {
            auto it = other.types.find(name);
            if (it == other.types.end() || g != it->second) return false;
        }
        return event_count == other.event_count;
    }
};

struct ActivityRow {
    std::uint64_t event_count = 0;
    std::uint64_t total_objects = 0;  // sum of |omap| over the events
    std::uint64_t unique_objects = 0; // distinct object ids over the events

    bool operator==(const ActivityRow&) const = default;
};
using ActivityStats = std::map<std::string, ActivityRow>;

struct ObjectTypeRow {
    std::uint64_t object_count = 0;     // objects declared with this type
    std::uint64_t referenced_count = 0; // of those, referenced by >= 1 event

    bool operator==(const ObjectTypeRow&) const = default;
};
using ObjectTypeStats = std::map<std::string, ObjectTypeRow>;

struct PairTimesRow {
    std::uint64_t n = 0;
    double min_s = 0;
    double max_s = 0;
    double mean_s = 0;
    double median_s = 0; // lower median for even n
    double stdev_s = 0;  // population standard deviation
};
using ActivityPairTimes =
    std::map<std::pair<std::string, std::string>, PairTimesRow>;

// Computes the multi-DFG for the given object types (kUnknownType selects
// the bucket of object ids that have no object record). Unknown type names
// raise DataError. The result does not depend on the budget; spill files go
// under spill_dir (a fresh directory under the system temp dir when empty).
// workers > 1 processes spilled aggregation partitions on that many threads.
Mdfg mdfg(Store& store, const std::set<std::string>& types,
          std::size_t budget_bytes,
          const std::filesystem::path& spill_dir = {},
          std::size_t workers = 1);

// Multi-DFG over every object type in the store (dangling references
// included under kUnknownType).
Mdfg mdfg_all(Store& store, std::size_t budget_bytes,
              const std::filesystem::path& spill_dir = {},
              std::size_t workers = 1);

// Per-activity event and object counts; single scan over the events.
// unique_objects is exact (distinct sets spill through the sorter).
ActivityStats activity_stats(Store& store,
                             const std::filesystem::path& spill_dir = {});

// Per-type declared and referenced object counts. Dangling references
// surface as a kUnknownType row whose object_count equals referenced_count.
ObjectTypeStats object_type_stats(Store& store);

// Timestamp deltas of adjacent lifecycle steps, pooled across all object
// types, per ordered activity pair, in seconds.
ActivityPairTimes time_between_activities(
    Store& store, std::size_t budget_bytes,
    const std::filesystem::path& spill_dir = {});

// Ordered lifecycle of one object via the omap index (no full scan);
// nullopt when no event references the id.
std::optional<LifecycleEntry> lifecycle(Store& store,
                                        const std::string& object_id);

// Byte-deterministic serializations (keys sorted everywhere).
std::string mdfg_to_json(const Mdfg& g);
std::string mdfg_to_dot(const Mdfg& g);
std::string activity_stats_to_json(const ActivityStats& s);
std::string activity_stats_to_csv(const ActivityStats& s);
std::string object_type_stats_to_json(const ObjectTypeStats& s);
std::string object_type_stats_to_csv(const ObjectTypeStats& s);
std::string pair_times_to_json(const ActivityPairTimes& t);
std::string pair_times_to_csv(const ActivityPairTimes& t);

} // namespace ocel
