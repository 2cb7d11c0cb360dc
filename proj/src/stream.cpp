#include "ocel/stream.hpp"

namespace ocel {

MemoryRecordStream::MemoryRecordStream(OcelLog log) : log_(sort_events(std::move(log))) {}

bool MemoryRecordStream::next(LogRecord& out) {
    if (next_object_ < log_.objects.size()) {
        out = log_.objects[next_object_++];
        return true;
    }
    if (next_event_ < log_.events.size()) {
        out = log_.events[next_event_++];
        return true;
    }
    return false;
}

OcelLog collect(RecordStream& stream) {
    OcelLog log;
    log.metadata = stream.metadata();
    LogRecord record;
    while (stream.next(record)) {
        if (auto* event = std::get_if<EventRecord>(&record))
            log.events.push_back(std::move(*event));
        else
            log.objects.push_back(std::move(std::get<ObjectRecord>(record)));
    }
    return log;
}

} // namespace ocel
