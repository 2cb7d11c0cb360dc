#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ocel/model.hpp"
#include "ocel/stream.hpp"

namespace ocel {

struct StoreOptions {
    // Working-memory budget in bytes, shared by ingest-time sorting and by
    // the aggregation operations bound to this store.
    std::size_t memory_budget = 256ull << 20;
};

struct IngestStats {
    std::uint64_t events = 0;
    std::uint64_t objects = 0;
    std::uint64_t postings = 0; // omap multikey postings = sum of |omap|
    std::uint64_t segment_bytes = 0;
    std::uint64_t index_bytes = 0;
    double wall_seconds = 0;
};

struct AuditReport {
    std::vector<std::string> violations;
    std::vector<std::string> notes;
    bool ok() const { return violations.empty(); }
};

// Record location: segment number in the high 24 bits, byte offset of the
// record frame within the segment in the low 40.
constexpr std::uint64_t make_location(std::uint32_t segment, std::uint64_t offset) {
    return (static_cast<std::uint64_t>(segment) << 40) | offset;
}
constexpr std::uint32_t location_segment(std::uint64_t loc) {
    return static_cast<std::uint32_t>(loc >> 40);
}
constexpr std::uint64_t location_offset(std::uint64_t loc) {
    return loc & ((std::uint64_t{1} << 40) - 1);
}

class Store;

// Streaming scan over event records, in (timestamp, id) order.
class EventScan final : public EventSource {
public:
    EventScan(EventScan&&) noexcept;
    EventScan& operator=(EventScan&&) noexcept;
    ~EventScan() override;
    bool next(EventRecord& out) override;
    // Number of matching records (known up front for indexed scans and
    // full walks alike).
    std::uint64_t matches() const;

private:
    friend class Store;
    struct Impl;
    explicit EventScan(std::unique_ptr<Impl> impl);
    std::unique_ptr<Impl> impl_;
};

// Streaming scan over object records, in id order.
class ObjectScan final {
public:
    ObjectScan(ObjectScan&&) noexcept;
    ObjectScan& operator=(ObjectScan&&) noexcept;
    ~ObjectScan();
    bool next(ObjectRecord& out);
    std::uint64_t matches() const;

private:
    friend class Store;
    struct Impl;
    explicit ObjectScan(std::unique_ptr<Impl> impl);
    std::unique_ptr<Impl> impl_;
};

// Embedded single-log store: two record-segment collections plus five
// sorted-string-table indexes, committed through a manifest. One writer at
// a time (lock file); any number of read-only handles.
class Store {
public:
    // Creates an empty store at `root` (which must not already hold one)
    // and opens it writable.
    static std::unique_ptr<Store> create(const std::string& root,
                                         StoreOptions options = {});
    // Opens an existing store writable. If the last session did not commit
    // or on-disk state disagrees with the manifest, recovery rebuilds the
    // indexes from the surviving segment records first.
    static std::unique_ptr<Store> open(const std::string& root,
                                       StoreOptions options = {});
    // Opens the last committed state; never writes. Fails if the store
    // needs recovery.
    static std::unique_ptr<Store> open_read_only(const std::string& root,
                                                 StoreOptions options = {});
    ~Store();

    Store(const Store&) = delete;
    Store& operator=(const Store&) = delete;

    // Bulk-loads one log. The store must be writable and not yet hold a
    // log (one store directory = one log). Duplicate event/object ids
    // raise DataError naming the id, before anything is written.
    IngestStats ingest(RecordStream& stream);

    std::optional<EventRecord> get_event(const std::string& id);
    std::optional<ObjectRecord> get_object(const std::string& id);
    // Type of the object, or nullopt for ids with no object record.
    std::optional<std::string> object_type_of(const std::string& id);

    EventScan scan_events_by_activity(const std::string& activity);
    EventScan scan_events_by_object(const std::string& object_id);
    ObjectScan scan_objects_by_type(const std::string& otype);
    EventScan scan_all_events();
    ObjectScan scan_all_objects();

    // Walks the distinct object ids referenced by at least one event, in
    // ascending id order, with the number of referencing events. Reads only
    // the omap index, no segment records.
    void for_each_referenced_object_id(
        const std::function<void(std::string_view id, std::uint64_t refs)>& fn);

    // Streams metadata, then all objects, then all events; composing with
    // serialize_json/serialize_xml yields a valid document.
    std::unique_ptr<RecordStream> export_stream();

    // Cross-checks segments against all five indexes. Violations are data,
    // not errors; notes carry recovery history.
    AuditReport audit();

    const LogMetadata& metadata() const;
    std::uint64_t event_count() const;
    std::uint64_t object_count() const;
    std::uint64_t posting_count() const;
    std::uint64_t segment_bytes() const;
    std::uint64_t index_bytes() const;

    // Segment records read through this handle (lookups, scans, exports,
    // audits). Lets tests assert that indexed paths do not scan.
    std::uint64_t records_touched() const;
    void reset_records_touched();

    std::size_t memory_budget() const;
    const std::string& root() const;
    bool read_only() const;
    // Notes recorded by recovery during open (also persisted in the
    // manifest and surfaced by audit).
    const std::vector<std::string>& recovery_notes() const;

    struct Impl; // definition private to store.cpp

private:
    explicit Store(std::unique_ptr<Impl> impl);
    std::unique_ptr<Impl> impl_;
};

} // namespace ocel
