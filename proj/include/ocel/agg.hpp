#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "ocel/model.hpp"
#include "ocel/stream.hpp"

namespace ocel {

// One element of an object's lifecycle: an event that referenced the object.
struct LifecycleStep {
    std::string activity;
    Timestamp timestamp{0};
    std::string event_id;

    bool operator==(const LifecycleStep&) const = default;
};

// Everything that ever happened to one object, in (timestamp, event_id)
// order. Objects referenced by no event produce no entry.
struct LifecycleEntry {
    std::string object_id;
    std::vector<LifecycleStep> lifecycle;

    bool operator==(const LifecycleEntry&) const = default;
};

struct UnwindMetrics {
    // Peak of the group-table byte accounting (binary-encoding sizes of the
    // buffered keys and triples). Stays within budget plus one in-flight
    // record.
    std::uint64_t high_water_bytes = 0;
    // Total bytes written to spill files; zero when everything fit.
    std::uint64_t spill_bytes = 0;
};

// Pull stream of lifecycle entries in ascending object_id order. Owns its
// spill files: they are deleted once the stream is drained or dropped, and
// kept with a .failed suffix if the operation failed.
class LifecycleStream {
public:
    LifecycleStream(LifecycleStream&&) noexcept;
    LifecycleStream& operator=(LifecycleStream&&) noexcept;
    ~LifecycleStream();

    bool next(LifecycleEntry& out);
    const UnwindMetrics& metrics() const;

    struct Impl; // private to agg.cpp

private:
    explicit LifecycleStream(std::unique_ptr<Impl> impl);
    std::unique_ptr<Impl> impl_;

    friend LifecycleStream unwind_group(EventSource&, std::size_t,
                                        const std::filesystem::path&,
                                        std::size_t);
    friend LifecycleStream unwind_group_filtered(
        EventSource&, const std::set<std::string>&,
        const std::function<std::string(const std::string&)>&, std::size_t,
        const std::filesystem::path&, std::size_t);
};

// Unrolls each event's omap and groups by object id, collecting per-object
// event sequences. Bounded memory: when the in-memory group table exceeds
// budget_bytes it is flushed partition-wise to spill files under spill_dir,
// and partitions are merged after the input ends. The input must arrive in
// (timestamp, event_id) order (store scans guarantee this).
//
// The input pass is always single-threaded; workers > 1 processes the spilled
// partitions on that many threads (results are identical, metrics may differ).
//
// Errors: IoError if spill_dir cannot be written; ConfigError if the budget
// cannot hold even a single object's entry.
LifecycleStream unwind_group(EventSource& events, std::size_t budget_bytes,
                             const std::filesystem::path& spill_dir,
                             std::size_t workers = 1);

// Same, restricted to objects whose resolved type is in object_type_filter.
// The resolver maps object ids to types (ids without an object record
// resolve to kUnknownType); an empty filter yields an empty stream.
LifecycleStream unwind_group_filtered(
    EventSource& events, const std::set<std::string>& object_type_filter,
    const std::function<std::string(const std::string&)>& object_resolver,
    std::size_t budget_bytes, const std::filesystem::path& spill_dir,
    std::size_t workers = 1);

} // namespace ocel
