#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace ocel {

// UTC instant, microseconds since the UNIX epoch. Fixed-width and sortable;
// lossless for ISO-8601 inputs down to microsecond precision.
struct Timestamp {
    std::int64_t micros = 0;

    auto operator<=>(const Timestamp&) const = default;
};

// Accepts "YYYY-MM-DD[T ]HH:MM:SS[.fractional][Z|±HH:MM|±HHMM|±HH]".
// A missing zone designator means UTC. Fractional digits beyond
// microseconds are truncated. Returns nullopt on any malformed input.
std::optional<Timestamp> parse_iso8601(std::string_view text);

// Canonical form: "YYYY-MM-DDTHH:MM:SS.mmmZ", extended to six fractional
// digits only when sub-millisecond precision is present. parse_iso8601 of
// the result reproduces the input exactly.
std::string format_iso8601(Timestamp ts);

} // namespace ocel
