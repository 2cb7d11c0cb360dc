#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ocel {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input document. Carries the byte offset (JSON) or line (XML)
// where parsing gave up.
class ParseError : public Error {
public:
    ParseError(const std::string& msg, std::uint64_t position)
        : Error(msg), position_(position) {}
    std::uint64_t position() const { return position_; }

private:
    std::uint64_t position_;
};

// Structurally valid document that violates the OCEL schema
// (missing mandatory key, wrong value shape). Names the offending record
// when one is known.
class SchemaError : public Error {
public:
    explicit SchemaError(const std::string& msg) : Error(msg) {}
};

// Filesystem / OS level failure.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

// A stored file failed a checksum, decode, or invariant check.
class CorruptionError : public Error {
public:
    explicit CorruptionError(const std::string& msg) : Error(msg) {}
};

// Semantically invalid request or data: duplicate ids, unknown object type.
class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(msg) {}
};

// Unusable configuration, e.g. a memory budget smaller than a single entry.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

} // namespace ocel
