#include "ocel/json_format.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <system_error>
#include <vector>

#include "ocel/errors.hpp"

namespace ocel {
namespace {

constexpr int kMaxSkipDepth = 128;

enum class JTok : std::uint8_t {
    ObjBegin,
    ObjEnd,
    ArrBegin,
    ArrEnd,
    Colon,
    Comma,
    Str,
    Int,
    Flt,
    True,
    False,
    Null,
    End,
};

struct JsonToken {
    JTok kind = JTok::End;
    std::string text; // Str: unescaped content; Int/Flt: raw literal
    std::int64_t int_value = 0;
    double flt_value = 0.0;
    std::uint64_t offset = 0;
};

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else {
        out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    }
}

class JsonLexer {
public:
    explicit JsonLexer(ByteSource& src) : r_(src) {}

    void next(JsonToken& t) {
        int c = r_.get();
        while (c == ' ' || c == '\t' || c == '\n' || c == '\r') c = r_.get();
        t.offset = r_.offset() == 0 ? 0 : r_.offset() - 1;
        switch (c) {
        case -1:
            t.kind = JTok::End;
            return;
        case '{':
            t.kind = JTok::ObjBegin;
            return;
        case '}':
            t.kind = JTok::ObjEnd;
            return;
        case '[':
            t.kind = JTok::ArrBegin;
            return;
        case ']':
            t.kind = JTok::ArrEnd;
            return;
        case ':':
            t.kind = JTok::Colon;
            return;
        case ',':
            t.kind = JTok::Comma;
            return;
        case '"':
            lex_string(t);
            return;
        case 't':
            expect_word("rue", t.offset);
            t.kind = JTok::True;
            return;
        case 'f':
            expect_word("alse", t.offset);
            t.kind = JTok::False;
            return;
        case 'n':
            expect_word("ull", t.offset);
            t.kind = JTok::Null;
            return;
        default:
            if (c == '-' || (c >= '0' && c <= '9')) {
                lex_number(t, c);
                return;
            }
            fail("unexpected character", t.offset);
        }
    }

private:
    [[noreturn]] void fail(const std::string& msg, std::uint64_t off) {
        throw ParseError("malformed JSON: " + msg + " at byte " + std::to_string(off), off);
    }

    void expect_word(const char* rest, std::uint64_t off) {
        for (const char* p = rest; *p; ++p)
            if (r_.get() != *p) fail("invalid literal", off);
    }

    int hex_digit(std::uint64_t off) {
        const int c = r_.get();
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        fail("invalid \\u escape", off);
    }

    std::uint32_t hex4(std::uint64_t off) {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 4) | static_cast<std::uint32_t>(hex_digit(off));
        return v;
    }

    void lex_string(JsonToken& t) {
        t.kind = JTok::Str;
        t.text.clear();
        for (;;) {
            const int c = r_.get();
            if (c == -1) fail("unterminated string", t.offset);
            if (c == '"') return;
            if (static_cast<unsigned char>(c) < 0x20) fail("raw control character in string", t.offset);
            if (c != '\\') {
                t.text.push_back(static_cast<char>(c));
                continue;
            }
            const int e = r_.get();
            switch (e) {
            case '"': t.text.push_back('"'); break;
            case '\\': t.text.push_back('\\'); break;
            case '/': t.text.push_back('/'); break;
            case 'b': t.text.push_back('\b'); break;
            case 'f': t.text.push_back('\f'); break;
            case 'n': t.text.push_back('\n'); break;
            case 'r': t.text.push_back('\r'); break;
            case 't': t.text.push_back('\t'); break;
            case 'u': {
                std::uint32_t cp = hex4(t.offset);
                if (cp >= 0xd800 && cp <= 0xdbff) {
                    if (r_.get() != '\\' || r_.get() != 'u') fail("unpaired surrogate", t.offset);
                    const std::uint32_t lo = hex4(t.offset);
                    if (lo < 0xdc00 || lo > 0xdfff) fail("unpaired surrogate", t.offset);
                    cp = 0x10000 + ((cp - 0xd800) << 10) + (lo - 0xdc00);
                } else if (cp >= 0xdc00 && cp <= 0xdfff) {
                    fail("unpaired surrogate", t.offset);
                }
                append_utf8(t.text, cp);
                break;
            }
            default:
                fail("invalid escape", t.offset);
            }
        }
    }

    void lex_number(JsonToken& t, int first) {
        t.text.clear();
        t.text.push_back(static_cast<char>(first));
        bool is_float = false;
        int c = first;
        if (c == '-') {
            c = r_.get();
            if (c < '0' || c > '9') fail("invalid number", t.offset);
            t.text.push_back(static_cast<char>(c));
        }
        const bool leading_zero = c == '0';
        int digits_after_first = 0;
        for (;;) {
            c = r_.peek();
            if (c >= '0' && c <= '9') {
                r_.get();
                t.text.push_back(static_cast<char>(c));
                ++digits_after_first;
            } else {
                break;
            }
        }
        if (leading_zero && digits_after_first > 0) fail("invalid number", t.offset);
        if (c == '.') {
            is_float = true;
            r_.get();
            t.text.push_back('.');
            int frac = 0;
            while ((c = r_.peek()) >= '0' && c <= '9') {
                r_.get();
                t.text.push_back(static_cast<char>(c));
                ++frac;
            }
            if (frac == 0) fail("invalid number", t.offset);
        }
        if (c == 'e' || c == 'E') {
            is_float = true;
            r_.get();
            t.text.push_back(static_cast<char>(c));
            c = r_.peek();
            if (c == '+' || c == '-') {
                r_.get();
                t.text.push_back(static_cast<char>(c));
            }
            int digits = 0;
            while ((c = r_.peek()) >= '0' && c <= '9') {
                r_.get();
                t.text.push_back(static_cast<char>(c));
                ++digits;
            }
            if (digits == 0) fail("invalid number", t.offset);
        }
        if (!is_float) {
            std::int64_t v = 0;
            const auto [ptr, ec] =
                std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
            if (ec == std::errc{} && ptr == t.text.data() + t.text.size()) {
                t.kind = JTok::Int;
                t.int_value = v;
                return;
            }
            // Fits JSON grammar but not int64: carry it as a float.
        }
        double d = 0.0;
        const auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), d);
        if (ec != std::errc{} || ptr != t.text.data() + t.text.size())
            fail("invalid number", t.offset);
        t.kind = JTok::Flt;
        t.flt_value = d;
    }

    ByteReader r_;
};

const std::string kKeyGlobalLog = "ocel:global-log";
const std::string kKeyGlobalEvent = "ocel:global-event";
const std::string kKeyGlobalObject = "ocel:global-object";
const std::string kKeyEvents = "ocel:events";
const std::string kKeyObjects = "ocel:objects";

// Strips the "ocel:" prefix used by JSON-OCEL global attribute keys so both
// serializations meet in the same in-memory form.
std::string strip_prefix(const std::string& key) {
    if (key.rfind("ocel:", 0) == 0) return key.substr(5);
    return key;
}

class OcelJsonStream : public RecordStream {
public:
    explicit OcelJsonStream(std::unique_ptr<ByteSource> source)
        : source_(std::move(source)), lexer_(*source_) {
        advance();
        expect(JTok::ObjBegin, "top-level object");
        first_member_ = true;
        scan_top_level();
    }

    const LogMetadata& metadata() override { return metadata_; }

    bool next(LogRecord& out) override {
        for (;;) {
            switch (phase_) {
            case Phase::InEvents:
            case Phase::InObjects: {
                if (tok_.kind == JTok::ObjEnd) {
                    advance();
                    phase_ = Phase::TopLevel;
                    scan_top_level();
                    continue;
                }
                if (!section_first_) {
                    expect(JTok::Comma, "',' between records");
                }
                section_first_ = false;
                if (tok_.kind != JTok::Str) fail_here("record id string key");
                std::string id = std::move(tok_.text);
                advance();
                expect(JTok::Colon, "':' after record id");
                if (phase_ == Phase::InEvents) {
                    out = parse_event(std::move(id));
                } else {
                    out = parse_object(std::move(id));
                }
                return true;
            }
            case Phase::TopLevel:
                scan_top_level();
                continue;
            case Phase::Done:
                return false;
            }
        }
    }

    std::size_t max_buffered_records() const override { return 1; }

private:
    enum class Phase { TopLevel, InEvents, InObjects, Done };

    void advance() { lexer_.next(tok_); }

    void expect(JTok kind, const std::string& what) {
        if (tok_.kind != kind) fail_here(what);
        advance();
    }

    [[noreturn]] void fail_here(const std::string& expected) {
        throw ParseError("malformed JSON-OCEL: expected " + expected + " at byte " +
                             std::to_string(tok_.offset),
                         tok_.offset);
    }

    // Walks top-level members until a streaming section opens or the
    // document ends. Global sections parse eagerly; they are small.
    void scan_top_level() {
        for (;;) {
            if (tok_.kind == JTok::ObjEnd) {
                advance();
                if (tok_.kind != JTok::End)
                    throw ParseError("malformed JSON: trailing content at byte " +
                                         std::to_string(tok_.offset),
                                     tok_.offset);
                phase_ = Phase::Done;
                return;
            }
            if (!first_member_) expect(JTok::Comma, "',' between members");
            first_member_ = false;
            if (tok_.kind != JTok::Str) fail_here("member key");
            const std::string key = std::move(tok_.text);
            advance();
            expect(JTok::Colon, "':' after key");

            if (key == kKeyEvents || key == kKeyObjects) {
                expect(JTok::ObjBegin, "'{' opening " + key);
                records_started_ = true;
                section_first_ = true;
                phase_ = key == kKeyEvents ? Phase::InEvents : Phase::InObjects;
                return;
            }
            if (key == kKeyGlobalLog) {
                require_early(key);
                parse_global_log();
            } else if (key == kKeyGlobalEvent) {
                require_early(key);
                metadata_.global_event = parse_attr_object(key);
            } else if (key == kKeyGlobalObject) {
                require_early(key);
                metadata_.global_object = parse_attr_object(key);
            } else {
                skip_value(0);
            }
        }
    }

    void require_early(const std::string& key) {
        if (records_started_)
            throw SchemaError(key + " must precede ocel:events and ocel:objects "
                                    "in a streamed document");
    }

    void parse_global_log() {
        expect(JTok::ObjBegin, "'{' opening ocel:global-log");
        bool first = true;
        while (tok_.kind != JTok::ObjEnd) {
            if (!first) expect(JTok::Comma, "','");
            first = false;
            if (tok_.kind != JTok::Str) fail_here("global-log key");
            const std::string key = strip_prefix(tok_.text);
            advance();
            expect(JTok::Colon, "':'");
            if (key == "version") {
                metadata_.version = take_string("ocel:version");
            } else if (key == "ordering") {
                metadata_.ordering = take_string("ocel:ordering");
            } else if (key == "attribute-names") {
                parse_string_array(metadata_.attribute_names);
            } else if (key == "object-types") {
                parse_string_array(metadata_.object_types);
            } else {
                skip_value(0);
            }
        }
        advance();
    }

    std::string take_string(const char* what) {
        if (tok_.kind != JTok::Str) fail_here(std::string(what) + " string");
        std::string s = std::move(tok_.text);
        advance();
        return s;
    }

    void parse_string_array(std::set<std::string>& out) {
        expect(JTok::ArrBegin, "'['");
        bool first = true;
        while (tok_.kind != JTok::ArrEnd) {
            if (!first) expect(JTok::Comma, "','");
            first = false;
            out.insert(take_string("array element"));
        }
        advance();
    }

    // {name: scalar, ...} with the ocel: prefix stripped from names; used
    // for the global default maps.
    AttributeMap parse_attr_object(const std::string& section) {
        AttributeMap map;
        expect(JTok::ObjBegin, "'{' opening " + section);
        bool first = true;
        while (tok_.kind != JTok::ObjEnd) {
            if (!first) expect(JTok::Comma, "','");
            first = false;
            if (tok_.kind != JTok::Str) fail_here("attribute key");
            std::string key = strip_prefix(tok_.text);
            advance();
            expect(JTok::Colon, "':'");
            AttributeValue value;
            if (!take_scalar(value, key == "timestamp"))
                throw SchemaError("non-scalar value for " + key + " in " + section);
            map.emplace(std::move(key), std::move(value));
        }
        advance();
        return map;
    }

    // Consumes one scalar token into `value`; returns false (consuming the
    // whole value) when the value is an object or array.
    bool take_scalar(AttributeValue& value, bool timestamp_position) {
        switch (tok_.kind) {
        case JTok::Str:
            if (timestamp_position) {
                if (auto ts = parse_iso8601(tok_.text)) {
                    value = AttributeValue(*ts);
                    advance();
                    return true;
                }
            }
            value = AttributeValue(std::move(tok_.text));
            advance();
            return true;
        case JTok::Int:
            value = AttributeValue(tok_.int_value);
            advance();
            return true;
        case JTok::Flt:
            value = AttributeValue(tok_.flt_value);
            advance();
            return true;
        case JTok::True:
        case JTok::False:
            value = AttributeValue(tok_.kind == JTok::True);
            advance();
            return true;
        case JTok::Null:
            throw SchemaError("null attribute value at byte " + std::to_string(tok_.offset));
        case JTok::ObjBegin:
        case JTok::ArrBegin:
            skip_value(0);
            return false;
        default:
            fail_here("attribute value");
        }
    }

    void skip_value(int depth) {
        if (depth > kMaxSkipDepth)
            throw ParseError("malformed JSON: nesting too deep at byte " +
                                 std::to_string(tok_.offset),
                             tok_.offset);
        switch (tok_.kind) {
        case JTok::Str:
        case JTok::Int:
        case JTok::Flt:
        case JTok::True:
        case JTok::False:
        case JTok::Null:
            advance();
            return;
        case JTok::ObjBegin: {
            advance();
            bool first = true;
            while (tok_.kind != JTok::ObjEnd) {
                if (!first) expect(JTok::Comma, "','");
                first = false;
                if (tok_.kind != JTok::Str) fail_here("member key");
                advance();
                expect(JTok::Colon, "':'");
                skip_value(depth + 1);
            }
            advance();
            return;
        }
        case JTok::ArrBegin: {
            advance();
            bool first = true;
            while (tok_.kind != JTok::ArrEnd) {
                if (!first) expect(JTok::Comma, "','");
                first = false;
                skip_value(depth + 1);
            }
            advance();
            return;
        }
        default:
            fail_here("value");
        }
    }

    EventRecord parse_event(std::string id) {
        EventRecord event;
        event.id = std::move(id);
        bool have_activity = false, have_timestamp = false;
        expect(JTok::ObjBegin, "'{' opening event " + event.id);
        bool first = true;
        while (tok_.kind != JTok::ObjEnd) {
            if (!first) expect(JTok::Comma, "','");
            first = false;
            if (tok_.kind != JTok::Str) fail_here("event field key");
            const std::string key = std::move(tok_.text);
            advance();
            expect(JTok::Colon, "':'");
            if (key == "ocel:activity") {
                event.activity = take_string("ocel:activity");
                have_activity = true;
            } else if (key == "ocel:timestamp") {
                const std::string text = take_string("ocel:timestamp");
                const auto ts = parse_iso8601(text);
                if (!ts)
                    throw SchemaError("event " + event.id + ": unparseable ocel:timestamp '" +
                                      text + "'");
                event.timestamp = *ts;
                have_timestamp = true;
            } else if (key == "ocel:omap") {
                expect(JTok::ArrBegin, "'[' opening ocel:omap");
                bool f = true;
                while (tok_.kind != JTok::ArrEnd) {
                    if (!f) expect(JTok::Comma, "','");
                    f = false;
                    if (tok_.kind != JTok::Str)
                        throw SchemaError("event " + event.id + ": non-string ocel:omap entry");
                    event.omap.push_back(std::move(tok_.text));
                    advance();
                }
                advance();
            } else if (key == "ocel:vmap") {
                parse_vmap(event.vmap, "event " + event.id);
            } else if (key == "ocel:id") {
                const std::string inner = take_string("ocel:id");
                if (inner != event.id)
                    throw SchemaError("event " + event.id + ": conflicting ocel:id '" + inner +
                                      "'");
            } else if (tok_.kind == JTok::Null) {
                advance();
            } else {
                // Unknown per-record scalar keys are kept as attributes;
                // unknown nested or null values are skipped.
                AttributeValue value;
                if (take_scalar(value, false)) event.vmap.emplace(key, std::move(value));
            }
        }
        advance();
        if (!have_activity) throw SchemaError("event " + event.id + " missing ocel:activity");
        if (!have_timestamp) throw SchemaError("event " + event.id + " missing ocel:timestamp");
        dedup_omap(event);
        return event;
    }

    ObjectRecord parse_object(std::string id) {
        ObjectRecord object;
        object.id = std::move(id);
        bool have_type = false;
        expect(JTok::ObjBegin, "'{' opening object " + object.id);
        bool first = true;
        while (tok_.kind != JTok::ObjEnd) {
            if (!first) expect(JTok::Comma, "','");
            first = false;
            if (tok_.kind != JTok::Str) fail_here("object field key");
            const std::string key = std::move(tok_.text);
            advance();
            expect(JTok::Colon, "':'");
            if (key == "ocel:type") {
                object.otype = take_string("ocel:type");
                have_type = true;
            } else if (key == "ocel:ovmap") {
                parse_vmap(object.ovmap, "object " + object.id);
            } else if (key == "ocel:id") {
                const std::string inner = take_string("ocel:id");
                if (inner != object.id)
                    throw SchemaError("object " + object.id + ": conflicting ocel:id '" + inner +
                                      "'");
            } else if (tok_.kind == JTok::Null) {
                advance();
            } else {
                AttributeValue value;
                if (take_scalar(value, false)) object.ovmap.emplace(key, std::move(value));
            }
        }
        advance();
        if (!have_type) throw SchemaError("object " + object.id + " missing ocel:type");
        return object;
    }

    void parse_vmap(AttributeMap& map, const std::string& owner) {
        expect(JTok::ObjBegin, "'{' opening value map of " + owner);
        bool first = true;
        while (tok_.kind != JTok::ObjEnd) {
            if (!first) expect(JTok::Comma, "','");
            first = false;
            if (tok_.kind != JTok::Str) fail_here("attribute key");
            std::string key = std::move(tok_.text);
            advance();
            expect(JTok::Colon, "':'");
            AttributeValue value;
            if (!take_scalar(value, false))
                throw SchemaError(owner + ": non-scalar value for attribute '" + key + "'");
            map.emplace(std::move(key), std::move(value));
        }
        advance();
    }

    std::unique_ptr<ByteSource> source_;
    JsonLexer lexer_;
    JsonToken tok_;
    LogMetadata metadata_;
    Phase phase_ = Phase::TopLevel;
    bool first_member_ = true;
    bool section_first_ = true;
    bool records_started_ = false;
};

// --- serialization ---------------------------------------------------------

void append_json_string(std::string& out, std::string_view s) {
    out.push_back('"');
    for (const char ch : s) {
        const auto c = static_cast<unsigned char>(ch);
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\b': out += "\\b"; break;
        case '\f': out += "\\f"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        case '\t': out += "\\t"; break;
        default:
            if (c < 0x20) {
                char buf[8];
                std::snprintf(buf, sizeof buf, "\\u%04x", c);
                out += buf;
            } else {
                out.push_back(ch);
            }
        }
    }
    out.push_back('"');
}

void append_number(std::string& out, double v) {
    if (!std::isfinite(v)) throw SchemaError("non-finite float attribute cannot be serialized");
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    const std::string_view text(buf, static_cast<std::size_t>(ptr - buf));
    out.append(text);
    // An integral value renders without '.' or exponent; keep it float-typed
    // for the reader, which infers the type from the number's shape.
    if (text.find('.') == std::string_view::npos &&
        text.find('e') == std::string_view::npos)
        out += ".0";
}

void append_json_value(std::string& out, const AttributeValue& v) {
    switch (v.tag()) {
    case ValueTag::String:
        append_json_string(out, v.as_string());
        break;
    case ValueTag::TimestampVal:
        append_json_string(out, format_iso8601(v.as_timestamp()));
        break;
    case ValueTag::Integer: {
        char buf[24];
        const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v.as_integer());
        out.append(buf, ptr);
        break;
    }
    case ValueTag::Float:
        append_number(out, v.as_float());
        break;
    case ValueTag::Boolean:
        out += v.as_boolean() ? "true" : "false";
        break;
    }
}

void append_attr_object(std::string& out, const AttributeMap& map, bool prefixed) {
    out.push_back('{');
    bool first = true;
    for (const auto& [key, value] : map) {
        if (!first) out.push_back(',');
        first = false;
        append_json_string(out, prefixed ? "ocel:" + key : key);
        out.push_back(':');
        append_json_value(out, value);
    }
    out.push_back('}');
}

class JsonWriter {
public:
    explicit JsonWriter(ByteSink& sink) : sink_(sink) {}

    void metadata(const LogMetadata& meta) {
        buf_ = "{\"ocel:global-log\":{\"ocel:version\":";
        append_json_string(buf_, meta.version);
        buf_ += ",\"ocel:ordering\":";
        append_json_string(buf_, meta.ordering);
        buf_ += ",\"ocel:attribute-names\":[";
        bool first = true;
        for (const auto& name : meta.attribute_names) {
            if (!first) buf_.push_back(',');
            first = false;
            append_json_string(buf_, name);
        }
        buf_ += "],\"ocel:object-types\":[";
        first = true;
        for (const auto& type : meta.object_types) {
            if (!first) buf_.push_back(',');
            first = false;
            append_json_string(buf_, type);
        }
        buf_ += "]},\"ocel:global-event\":";
        append_attr_object(buf_, meta.global_event, true);
        buf_ += ",\"ocel:global-object\":";
        append_attr_object(buf_, meta.global_object, true);
        buf_ += ",\"ocel:events\":{";
        flush_buffer();
    }

    void event(const EventRecord& e) {
        if (!first_event_) buf_.push_back(',');
        first_event_ = false;
        append_json_string(buf_, e.id);
        buf_ += ":{\"ocel:activity\":";
        append_json_string(buf_, e.activity);
        buf_ += ",\"ocel:timestamp\":";
        append_json_string(buf_, format_iso8601(e.timestamp));
        buf_ += ",\"ocel:omap\":[";
        bool first = true;
        for (const auto& oid : e.omap) {
            if (!first) buf_.push_back(',');
            first = false;
            append_json_string(buf_, oid);
        }
        buf_ += "],\"ocel:vmap\":";
        append_attr_object(buf_, e.vmap, false);
        buf_.push_back('}');
        if (buf_.size() >= kFlushThreshold) flush_buffer();
    }

    void object(const ObjectRecord& o) {
        if (!first_object_) buf_.push_back(',');
        first_object_ = false;
        append_json_string(buf_, o.id);
        buf_ += ":{\"ocel:type\":";
        append_json_string(buf_, o.otype);
        buf_ += ",\"ocel:ovmap\":";
        append_attr_object(buf_, o.ovmap, false);
        buf_.push_back('}');
        if (buf_.size() >= kFlushThreshold) flush_buffer();
    }

    void begin_objects() {
        buf_ += "},\"ocel:objects\":{";
    }

    void finish() {
        buf_ += "}}";
        flush_buffer();
        sink_.flush();
    }

private:
    static constexpr std::size_t kFlushThreshold = 1 << 16;

    void flush_buffer() {
        sink_.write(buf_.data(), buf_.size());
        buf_.clear();
    }

    ByteSink& sink_;
    std::string buf_;
    bool first_event_ = true;
    bool first_object_ = true;
};

} // namespace

std::unique_ptr<RecordStream> parse_json(std::unique_ptr<ByteSource> source) {
    return std::make_unique<OcelJsonStream>(std::move(source));
}

void serialize_json(RecordStream& stream, ByteSink& sink) {
    JsonWriter writer(sink);
    writer.metadata(stream.metadata());

    // Events stream through in arrival order, which must already be
    // (timestamp, id); objects are held back and emitted sorted by id.
    std::vector<ObjectRecord> objects;
    bool have_prev = false;
    Timestamp prev_ts{};
    std::string prev_id;
    LogRecord record;
    while (stream.next(record)) {
        if (auto* event = std::get_if<EventRecord>(&record)) {
            if (have_prev &&
                (event->timestamp < prev_ts ||
                 (event->timestamp == prev_ts && event->id <= prev_id)))
                throw SchemaError("serialize_json requires events in (timestamp, id) order; "
                                  "event " + event->id + " arrived out of order");
            prev_ts = event->timestamp;
            prev_id = event->id;
            have_prev = true;
            writer.event(*event);
        } else {
            objects.push_back(std::move(std::get<ObjectRecord>(record)));
        }
    }
    std::sort(objects.begin(), objects.end(),
              [](const ObjectRecord& a, const ObjectRecord& b) { return a.id < b.id; });
    writer.begin_objects();
    for (const auto& object : objects) writer.object(object);
    writer.finish();
}

} // namespace ocel
