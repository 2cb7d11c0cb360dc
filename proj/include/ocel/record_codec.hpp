#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "ocel/model.hpp"

namespace ocel {

// Binary record payloads: tag-length-value with a one-byte kind tag, varint
// lengths, UTF-8 strings, and 8-byte little-endian microsecond timestamps.
//
//   event  := 0x01 str(id) str(activity) fixed64(ts)
//             varint(n) str(oid)*n varint(m) (str(key) value)*m
//   object := 0x02 str(id) str(type) varint(m) (str(key) value)*m
//   value  := tag byte, then: string -> str, timestamp -> fixed64,
//             integer -> zigzag varint, float -> fixed64 (IEEE bits),
//             boolean -> one byte
//   str    := varint(len) bytes
//
// The same encoding sizes the aggregation engine's memory accounting, so
// encoded_size_* must stay equal to the emitted byte counts.

constexpr std::uint8_t kEventRecordTag = 0x01;
constexpr std::uint8_t kObjectRecordTag = 0x02;

void encode_event(const EventRecord& event, std::string& out);
void encode_object(const ObjectRecord& object, std::string& out);

std::size_t encoded_size(const EventRecord& event);
std::size_t encoded_size(const ObjectRecord& object);
std::size_t encoded_size(const AttributeValue& value);
std::size_t encoded_size_str(std::string_view s);

// Decoders return false on any malformed payload (wrong tag, truncation,
// trailing bytes).
bool decode_event(std::string_view payload, EventRecord& out);
bool decode_object(std::string_view payload, ObjectRecord& out);

// Peeks the kind tag of a payload; 0 if empty.
inline std::uint8_t payload_kind(std::string_view payload) {
    return payload.empty() ? 0 : static_cast<std::uint8_t>(payload[0]);
}

} // namespace ocel
