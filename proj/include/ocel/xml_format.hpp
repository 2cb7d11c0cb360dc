#pragma once

#include <memory>

#include "ocel/bytes.hpp"
#include "ocel/stream.hpp"

namespace ocel {

// Streaming XML-OCEL reader (element-per-record, typed value elements
// string/date/int/float/boolean, <list> nesting). Malformed XML raises
// ParseError with the line number; an unknown value element or a missing
// mandatory child raises SchemaError.
std::unique_ptr<RecordStream> parse_xml(std::unique_ptr<ByteSource> source);

// Canonical XML-OCEL writer, two-space indented, semantically equivalent
// to serialize_json for the same stream. Same ordering contract: events
// must arrive in (timestamp, id) order, objects are buffered and emitted
// sorted by id.
void serialize_xml(RecordStream& stream, ByteSink& sink);

} // namespace ocel
