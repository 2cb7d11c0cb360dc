#pragma once

#include <memory>
#include <variant>

#include "ocel/model.hpp"

namespace ocel {

using LogRecord = std::variant<EventRecord, ObjectRecord>;

// Pull-based stream over one log: metadata first, then a mixed sequence of
// event and object records. Single-consumer; implementations buffer at most
// a bounded number of records (see max_buffered_records).
class RecordStream {
public:
    virtual ~RecordStream() = default;

    // Complete before the first next() call and stable afterwards.
    virtual const LogMetadata& metadata() = 0;

    // Fills `out` and returns true, or returns false at end of stream.
    virtual bool next(LogRecord& out) = 0;

    // High-water mark of records held inside the stream at any point.
    // Streaming sources keep this a small constant, independent of log size.
    virtual std::size_t max_buffered_records() const { return 1; }
};

// Pull-based stream of events only, in (timestamp, id) order. Store scans
// and the aggregation engine speak this interface.
class EventSource {
public:
    virtual ~EventSource() = default;
    virtual bool next(EventRecord& out) = 0;
};

// In-memory EventSource over a vector (test and oracle convenience).
// Events must already be in (timestamp, id) order.
class MemoryEventSource : public EventSource {
public:
    explicit MemoryEventSource(std::vector<EventRecord> events)
        : events_(std::move(events)) {}
    bool next(EventRecord& out) override {
        if (pos_ >= events_.size()) return false;
        out = events_[pos_++];
        return true;
    }

private:
    std::vector<EventRecord> events_;
    std::size_t pos_ = 0;
};

// In-memory adapter: yields the log's objects (given order), then its
// events sorted by (timestamp, id).
class MemoryRecordStream : public RecordStream {
public:
    explicit MemoryRecordStream(OcelLog log);
    const LogMetadata& metadata() override { return log_.metadata; }
    bool next(LogRecord& out) override;
    std::size_t max_buffered_records() const override {
        return log_.events.size() + log_.objects.size();
    }

private:
    OcelLog log_;
    std::size_t next_object_ = 0;
    std::size_t next_event_ = 0;
};

// Drains a stream into an OcelLog. Test and small-log convenience; not for
// larger-than-memory inputs.
OcelLog collect(RecordStream& stream);

} // namespace ocel
