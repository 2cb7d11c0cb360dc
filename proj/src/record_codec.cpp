#include "ocel/record_codec.hpp"

#include <bit>
#include <cstring>

#include "ocel/bytes.hpp"

namespace ocel {
namespace {

void put_str(std::string& out, std::string_view s) {
    put_varint(out, s.size());
    out.append(s.data(), s.size());
}

bool get_str(std::string_view data, std::size_t& pos, std::string& out) {
    std::uint64_t len = 0;
    if (!get_varint(data, pos, len)) return false;
    if (pos + len > data.size()) return false;
    out.assign(data.data() + pos, len);
    pos += len;
    return true;
}

void put_value(std::string& out, const AttributeValue& v) {
    out.push_back(static_cast<char>(v.tag()));
    switch (v.tag()) {
    case ValueTag::String:
        put_str(out, v.as_string());
        break;
    case ValueTag::TimestampVal:
        put_fixed64(out, static_cast<std::uint64_t>(v.as_timestamp().micros));
        break;
    case ValueTag::Integer:
        put_varint(out, zigzag_encode(v.as_integer()));
        break;
    case ValueTag::Float:
        put_fixed64(out, std::bit_cast<std::uint64_t>(v.as_float()));
        break;
    case ValueTag::Boolean:
        out.push_back(v.as_boolean() ? 1 : 0);
        break;
    }
}

bool get_value(std::string_view data, std::size_t& pos, AttributeValue& out) {
    if (pos >= data.size()) return false;
    const auto tag = static_cast<unsigned char>(data[pos++]);
    std::uint64_t u = 0;
    switch (static_cast<ValueTag>(tag)) {
    case ValueTag::String: {
        std::string s;
        if (!get_str(data, pos, s)) return false;
        out = AttributeValue(std::move(s));
        return true;
    }
    case ValueTag::TimestampVal:
        if (!get_fixed64(data, pos, u)) return false;
        out = AttributeValue(Timestamp{static_cast<std::int64_t>(u)});
        return true;
    case ValueTag::Integer:
        if (!get_varint(data, pos, u)) return false;
        out = AttributeValue(zigzag_decode(u));
        return true;
    case ValueTag::Float:
        if (!get_fixed64(data, pos, u)) return false;
        out = AttributeValue(std::bit_cast<double>(u));
        return true;
    case ValueTag::Boolean:
        if (pos >= data.size()) return false;
        out = AttributeValue(data[pos++] != 0);
        return true;
    }
    return false;
}

void put_attr_map(std::string& out, const AttributeMap& map) {
    put_varint(out, map.size());
    for (const auto& [key, value] : map) {
        put_str(out, key);
        put_value(out, value);
    }
}

bool get_attr_map(std::string_view data, std::size_t& pos, AttributeMap& out) {
    std::uint64_t n = 0;
    if (!get_varint(data, pos, n)) return false;
    for (std::uint64_t i = 0; i < n; ++i) {
        std::string key;
        AttributeValue value;
        if (!get_str(data, pos, key) || !get_value(data, pos, value)) return false;
        out.emplace(std::move(key), std::move(value));
    }
    return true;
}

std::size_t attr_map_size(const AttributeMap& map) {
    std::size_t n = varint_size(map.size());
    for (const auto& [key, value] : map) n += encoded_size_str(key) + encoded_size(value);
    return n;
}

} // namespace

void encode_event(const EventRecord& event, std::string& out) {
    out.push_back(static_cast<char>(kEventRecordTag));
    put_str(out, event.id);
    put_str(out, event.activity);
    put_fixed64(out, static_cast<std::uint64_t>(event.timestamp.micros));
    put_varint(out, event.omap.size());
    for (const auto& oid : event.omap) put_str(out, oid);
    put_attr_map(out, event.vmap);
}

void encode_object(const ObjectRecord& object, std::string& out) {
    out.push_back(static_cast<char>(kObjectRecordTag));
    put_str(out, object.id);
    put_str(out, object.otype);
    put_attr_map(out, object.ovmap);
}

std::size_t encoded_size_str(std::string_view s) {
    return varint_size(s.size()) + s.size();
}

std::size_t encoded_size(const AttributeValue& value) {
    switch (value.tag()) {
    case ValueTag::String:
        return 1 + encoded_size_str(value.as_string());
    case ValueTag::TimestampVal:
    case ValueTag::Float:
        return 1 + 8;
    case ValueTag::Integer:
        return 1 + varint_size(zigzag_encode(value.as_integer()));
    case ValueTag::Boolean:
        return 2;
    }
    return 0;
}

std::size_t encoded_size(const EventRecord& event) {
    std::size_t n = 1 + encoded_size_str(event.id) + encoded_size_str(event.activity) + 8;
    n += varint_size(event.omap.size());
    for (const auto& oid : event.omap) n += encoded_size_str(oid);
    n += attr_map_size(event.vmap);
    return n;
}

std::size_t encoded_size(const ObjectRecord& object) {
    return 1 + encoded_size_str(object.id) + encoded_size_str(object.otype) +
           attr_map_size(object.ovmap);
}

bool decode_event(std::string_view payload, EventRecord& out) {
    std::size_t pos = 0;
    if (payload.empty() || static_cast<std::uint8_t>(payload[pos++]) != kEventRecordTag)
        return false;
    out = EventRecord{};
    if (!get_str(payload, pos, out.id) || !get_str(payload, pos, out.activity)) return false;
    std::uint64_t ts = 0;
    if (!get_fixed64(payload, pos, ts)) return false;
    out.timestamp = Timestamp{static_cast<std::int64_t>(ts)};
    std::uint64_t n = 0;
    if (!get_varint(payload, pos, n)) return false;
    out.omap.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        std::string oid;
        if (!get_str(payload, pos, oid)) return false;
        out.omap.push_back(std::move(oid));
    }
    if (!get_attr_map(payload, pos, out.vmap)) return false;
    return pos == payload.size();
}

bool decode_object(std::string_view payload, ObjectRecord& out) {
    std::size_t pos = 0;
    if (payload.empty() || static_cast<std::uint8_t>(payload[pos++]) != kObjectRecordTag)
        return false;
    out = ObjectRecord{};
    if (!get_str(payload, pos, out.id) || !get_str(payload, pos, out.otype)) return false;
    if (!get_attr_map(payload, pos, out.ovmap)) return false;
    return pos == payload.size();
}

} // namespace ocel
