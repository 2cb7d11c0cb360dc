#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "ocel/timeutil.hpp"

namespace ocel {

enum class ValueTag : std::uint8_t {
    String = 0,
    TimestampVal = 1,
    Integer = 2,
    Float = 3,
    Boolean = 4,
};

// Typed scalar carried by event vmaps and object ovmaps. The variant index
// is the tag; they cannot disagree.
class AttributeValue {
public:
    AttributeValue() : value_(std::string{}) {}
    explicit AttributeValue(std::string s) : value_(std::move(s)) {}
    explicit AttributeValue(Timestamp t) : value_(t) {}
    explicit AttributeValue(std::int64_t i) : value_(i) {}
    explicit AttributeValue(double f) : value_(f) {}
    explicit AttributeValue(bool b) : value_(b) {}

    ValueTag tag() const { return static_cast<ValueTag>(value_.index()); }

    const std::string& as_string() const { return std::get<std::string>(value_); }
    Timestamp as_timestamp() const { return std::get<Timestamp>(value_); }
    std::int64_t as_integer() const { return std::get<std::int64_t>(value_); }
    double as_float() const { return std::get<double>(value_); }
    bool as_boolean() const { return std::get<bool>(value_); }

    bool operator==(const AttributeValue&) const = default;

private:
    std::variant<std::string, Timestamp, std::int64_t, double, bool> value_;
};

using AttributeMap = std::map<std::string, AttributeValue>;

// One event of the log: the unit of the events collection.
struct EventRecord {
    std::string id;
    std::string activity;
    Timestamp timestamp;
    std::vector<std::string> omap; // related object ids, input order, deduplicated
    AttributeMap vmap;

    bool operator==(const EventRecord&) const = default;
};

// One object of the log: the unit of the objects collection.
struct ObjectRecord {
    std::string id;
    std::string otype;
    AttributeMap ovmap;

    bool operator==(const ObjectRecord&) const = default;
};

// Log-level header: version, ordering, declared attribute names and object
// types, and the per-scope default attribute maps.
struct LogMetadata {
    std::string version = "1.0";
    std::string ordering = "timestamp";
    std::set<std::string> attribute_names;
    std::set<std::string> object_types;
    AttributeMap global_event;
    AttributeMap global_object;

    bool operator==(const LogMetadata&) const = default;
};

struct OcelLog {
    LogMetadata metadata;
    std::vector<EventRecord> events;
    std::vector<ObjectRecord> objects;
};

// Pseudo-type assigned to object ids that appear in an omap but have no
// object record. Mining tolerates them; validation reports them.
inline const std::string kUnknownType = "\xE2\x8A\xA5unknown"; // "⊥unknown"

// Drops repeated omap entries, first occurrence wins.
void dedup_omap(EventRecord& event);

// Strict ascending (timestamp, id) order for events.
inline bool event_order_less(const EventRecord& a, const EventRecord& b) {
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    return a.id < b.id;
}

struct ValidationReport {
    std::vector<std::string> violations;
    // Permitted oddities worth surfacing: events with an empty omap.
    std::vector<std::string> warnings;

    bool ok() const { return violations.empty(); }
};

// Checks the OCEL invariants. Violations are data, not errors: the log is
// never mutated and nothing throws. Strict mode additionally requires the
// metadata attribute-name / object-type sets to cover everything the
// records use.
ValidationReport validate(const OcelLog& log, bool strict);

// Events sorted ascending by (timestamp, id); stable for equal keys,
// idempotent, and a permutation of the input.
OcelLog sort_events(OcelLog log);

} // namespace ocel
