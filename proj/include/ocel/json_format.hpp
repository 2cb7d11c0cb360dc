#pragma once

#include <memory>

#include "ocel/bytes.hpp"
#include "ocel/stream.hpp"

namespace ocel {

// Streaming JSON-OCEL reader. Holds at most one record at a time; errors
// are ParseError (malformed JSON, with byte offset) or SchemaError (missing
// mandatory keys, naming the record). The ocel:global-* sections must
// precede ocel:events / ocel:objects, which real writers always satisfy.
std::unique_ptr<RecordStream> parse_json(std::unique_ptr<ByteSource> source);

// Canonical JSON-OCEL writer: compact, sorted metadata sets, events in
// (timestamp, id) order (enforced; out-of-order input is rejected), objects
// sorted by id, shortest round-tripping float text. Byte-deterministic for
// a given input stream, and a fixed point under parse-then-serialize.
void serialize_json(RecordStream& stream, ByteSink& sink);

} // namespace ocel
