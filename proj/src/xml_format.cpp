#include "ocel/xml_format.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <deque>
#include <string>
#include <utility>
#include <vector>

#include "ocel/errors.hpp"
#include "ocel/model.hpp"
#include "ocel/timeutil.hpp"

namespace ocel {

namespace {

[[noreturn]] void fail(const std::string& msg, std::size_t line) {
    throw ParseError("xml: " + msg + " at line " + std::to_string(line), line);
}

bool is_name_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c == ':';
}

bool is_name_char(char c) {
    return is_name_start(c) || (c >= '0' && c <= '9') || c == '-' || c == '.';
}

struct XmlAttr {
    std::string name;
    std::string value;
};

struct XmlTag {
    std::string name;
    std::vector<XmlAttr> attrs;
    bool self_closing = false;
    std::size_t line = 1;

    const std::string* find(const char* key) const {
        for (const auto& a : attrs) {
            if (a.name == key) return &a.value;
        }
        return nullptr;
    }
};

// Minimal pull lexer over the subset of XML the OCEL dialect uses: a
// prolog, comments, and nested elements whose payload lives entirely in
// attributes. Text content between tags is ignored; CDATA and DTDs are
// rejected rather than half-supported.
class XmlLexer {
public:
    explicit XmlLexer(std::unique_ptr<ByteSource> source)
        : source_(std::move(source)), reader_(*source_) {}

    std::size_t line() const { return line_; }

    // Advances to the next start or end tag. Returns false at end of
    // document. `tag` holds the parsed tag; `is_end` tells which kind.
    bool next_tag(XmlTag& tag, bool& is_end) {
        for (;;) {
            if (!skip_to_angle()) return false;
            std::size_t tag_line = line_;
            int c = get();
            if (c == '?') {
                skip_past("?>");
                continue;
            }
            if (c == '!') {
                lex_bang();
                continue;
            }
            if (c == '/') {
                tag.name = lex_name();
                tag.attrs.clear();
                tag.self_closing = false;
                tag.line = tag_line;
                skip_ws();
                expect('>');
                is_end = true;
                return true;
            }
            if (c < 0 || !is_name_start(static_cast<char>(c)))
                fail("malformed tag", tag_line);
            unget(static_cast<char>(c));
            tag.name = lex_name();
            tag.attrs.clear();
            tag.self_closing = false;
            tag.line = tag_line;
            lex_attrs(tag);
            is_end = false;
            return true;
        }
    }

private:
    std::unique_ptr<ByteSource> source_;
    ByteReader reader_;
    std::size_t line_ = 1;
    char pushed_ = 0;
    bool has_pushed_ = false;

    int get() {
        if (has_pushed_) {
            has_pushed_ = false;
            return static_cast<unsigned char>(pushed_);
        }
        int c = reader_.get();
        if (c == '\n') ++line_;
        return c;
    }

    void unget(char c) {
        pushed_ = c;
        has_pushed_ = true;
    }

    void expect(char want) {
        int c = get();
        if (c != want)
            fail(std::string("expected '") + want + "'", line_);
    }

    void skip_ws() {
        for (;;) {
            int c = get();
            if (c == ' ' || c == '\t' || c == '\r' || c == '\n') continue;
            if (c >= 0) unget(static_cast<char>(c));
            return;
        }
    }

    // Consumes text until the next '<'. Everything outside tags is either
    // whitespace or ignorable character data in this dialect.
    bool skip_to_angle() {
        for (;;) {
            int c = get();
            if (c < 0) return false;
            if (c == '<') return true;
        }
    }

    void skip_past(const char* terminator) {
        std::size_t matched = 0;
        std::size_t len = std::char_traits<char>::length(terminator);
        for (;;) {
            int c = get();
            if (c < 0) fail("unterminated markup", line_);
            if (static_cast<char>(c) == terminator[matched]) {
                if (++matched == len) return;
            } else {
                matched = (static_cast<char>(c) == terminator[0]) ? 1 : 0;
            }
        }
    }

    void lex_bang() {
        int c = get();
        if (c == '-') {
            expect('-');
            skip_past("-->");
            return;
        }
        fail("unsupported markup declaration", line_);
    }

    std::string lex_name() {
        std::string name;
        int c = get();
        if (c < 0 || !is_name_start(static_cast<char>(c)))
            fail("expected name", line_);
        name.push_back(static_cast<char>(c));
        for (;;) {
            c = get();
            if (c >= 0 && is_name_char(static_cast<char>(c))) {
                name.push_back(static_cast<char>(c));
            } else {
                if (c >= 0) unget(static_cast<char>(c));
                return name;
            }
        }
    }

    void lex_attrs(XmlTag& tag) {
        for (;;) {
            skip_ws();
            int c = get();
            if (c == '>') return;
            if (c == '/') {
                expect('>');
                tag.self_closing = true;
                return;
            }
            if (c < 0 || !is_name_start(static_cast<char>(c)))
                fail("malformed attribute list", line_);
            unget(static_cast<char>(c));
            XmlAttr attr;
            attr.name = lex_name();
            skip_ws();
            expect('=');
            skip_ws();
            int quote = get();
            if (quote != '"' && quote != '\'')
                fail("expected quoted attribute value", line_);
            attr.value = lex_attr_value(static_cast<char>(quote));
            tag.attrs.push_back(std::move(attr));
        }
    }

    std::string lex_attr_value(char quote) {
        std::string out;
        for (;;) {
            int c = get();
            if (c < 0) fail("unterminated attribute value", line_);
            if (static_cast<char>(c) == quote) return out;
            if (c == '&') {
                lex_entity(out);
            } else {
                out.push_back(static_cast<char>(c));
            }
        }
    }

    void lex_entity(std::string& out) {
        std::string name;
        for (;;) {
            int c = get();
            if (c < 0) fail("unterminated entity reference", line_);
            if (c == ';') break;
            name.push_back(static_cast<char>(c));
            if (name.size() > 10) fail("malformed entity reference", line_);
        }
        if (name == "amp") {
            out.push_back('&');
        } else if (name == "lt") {
            out.push_back('<');
        } else if (name == "gt") {
            out.push_back('>');
        } else if (name == "quot") {
            out.push_back('"');
        } else if (name == "apos") {
            out.push_back('\'');
        } else if (!name.empty() && name[0] == '#') {
            append_charref(out, name);
        } else {
            fail("unknown entity &" + name + ";", line_);
        }
    }

    void append_charref(std::string& out, const std::string& name) {
        std::uint32_t cp = 0;
        const char* first = name.c_str() + 1;
        const char* last = name.c_str() + name.size();
        std::from_chars_result r{};
        if (first < last && (*first == 'x' || *first == 'X')) {
            r = std::from_chars(first + 1, last, cp, 16);
        } else {
            r = std::from_chars(first, last, cp, 10);
        }
        if (r.ec != std::errc() || r.ptr != last || cp > 0x10FFFF ||
            (cp >= 0xD800 && cp <= 0xDFFF))
            fail("malformed character reference", line_);
        // Encode as UTF-8.
        if (cp < 0x80) {
            out.push_back(static_cast<char>(cp));
        } else if (cp < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else if (cp < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        }
    }
};

AttributeValue typed_value(const XmlTag& tag, const std::string& text) {
    if (tag.name == "string") return AttributeValue(text);
    if (tag.name == "date") {
        auto ts = parse_iso8601(text);
        if (!ts)
            throw SchemaError("xml: invalid date value '" + text + "' at line " +
                              std::to_string(tag.line));
        return AttributeValue(*ts);
    }
    if (tag.name == "int") {
        std::int64_t v = 0;
        auto r = std::from_chars(text.data(), text.data() + text.size(), v);
        if (r.ec != std::errc() || r.ptr != text.data() + text.size())
            throw SchemaError("xml: invalid int value '" + text + "' at line " +
                              std::to_string(tag.line));
        return AttributeValue(v);
    }
    if (tag.name == "float") {
        double v = 0;
        auto r = std::from_chars(text.data(), text.data() + text.size(), v);
        if (r.ec != std::errc() || r.ptr != text.data() + text.size())
            throw SchemaError("xml: invalid float value '" + text + "' at line " +
                              std::to_string(tag.line));
        return AttributeValue(v);
    }
    if (tag.name == "boolean") {
        if (text == "true") return AttributeValue(true);
        if (text == "false") return AttributeValue(false);
        throw SchemaError("xml: invalid boolean value '" + text + "' at line " +
                          std::to_string(tag.line));
    }
    throw SchemaError("xml: unknown value element <" + tag.name + "> at line " +
                      std::to_string(tag.line));
}

bool is_value_element(const std::string& name) {
    return name == "string" || name == "date" || name == "int" ||
           name == "float" || name == "boolean";
}

class OcelXmlStream final : public RecordStream {
public:
    explicit OcelXmlStream(std::unique_ptr<ByteSource> source)
        : lexer_(std::move(source)) {
        XmlTag tag;
        bool is_end = false;
        if (!lexer_.next_tag(tag, is_end) || is_end || tag.name != "log")
            throw SchemaError("xml: expected <log> root element");
        if (tag.self_closing) {
            done_ = true;
            return;
        }
        advance_section();
    }

    const LogMetadata& metadata() override { return meta_; }

    bool next(LogRecord& out) override {
        for (;;) {
            if (done_) return false;
            XmlTag tag;
            bool is_end = false;
            if (!lexer_.next_tag(tag, is_end)) {
                if (section_.empty() && depth_ == 0) {
                    done_ = true;
                    return false;
                }
                fail("unexpected end of document", lexer_.line());
            }
            if (is_end) {
                if (tag.name == section_) {
                    section_.clear();
                    continue;
                }
                if (tag.name == "log") {
                    done_ = true;
                    return false;
                }
                fail("unexpected </" + tag.name + ">", tag.line);
            }
            if (section_.empty()) {
                enter_section(tag);
                continue;
            }
            if (section_ == "events") {
                if (tag.name != "event")
                    fail("expected <event> inside <events>", tag.line);
                out = parse_event(tag);
                return true;
            }
            if (tag.name != "object")
                fail("expected <object> inside <objects>", tag.line);
            out = parse_object(tag);
            return true;
        }
    }

private:
    XmlLexer lexer_;
    LogMetadata meta_;
    std::string section_;
    bool done_ = false;
    bool records_started_ = false;
    int depth_ = 0;

    void advance_section() {
        // Consume globals until the first record section opens (or the
        // document ends). Record sections themselves are left for next().
        XmlTag tag;
        bool is_end = false;
        for (;;) {
            if (!lexer_.next_tag(tag, is_end))
                fail("unexpected end of document", lexer_.line());
            if (is_end) {
                if (tag.name == "log") {
                    done_ = true;
                    return;
                }
                fail("unexpected </" + tag.name + ">", tag.line);
            }
            if (tag.name == "global") {
                parse_global(tag);
                continue;
            }
            enter_section(tag);
            return;
        }
    }

    void enter_section(const XmlTag& tag) {
        if (tag.name == "events" || tag.name == "objects") {
            records_started_ = true;
            if (tag.self_closing) return;
            section_ = tag.name;
            return;
        }
        if (tag.name == "global") {
            if (records_started_)
                throw SchemaError(
                    "xml: <global> must precede <events> and <objects> "
                    "(line " + std::to_string(tag.line) + ")");
            parse_global(tag);
            return;
        }
        fail("unexpected <" + tag.name + "> in <log>", tag.line);
    }

    // Reads one complete element subtree rooted at an already-consumed
    // start tag, flattening typed children into `values` (lists flatten
    // via `on_list`). Used for globals, events, and objects alike.
    template <typename OnValue, typename OnList>
    void walk_children(const XmlTag& root, OnValue on_value, OnList on_list) {
        if (root.self_closing) return;
        XmlTag tag;
        bool is_end = false;
        for (;;) {
            if (!lexer_.next_tag(tag, is_end))
                fail("unterminated <" + root.name + ">", root.line);
            if (is_end) {
                if (tag.name != root.name)
                    fail("mismatched </" + tag.name + ">", tag.line);
                return;
            }
            if (tag.name == "list") {
                on_list(tag);
                continue;
            }
            if (!is_value_element(tag.name))
                throw SchemaError("xml: unknown value element <" + tag.name +
                                  "> at line " + std::to_string(tag.line));
            const std::string* key = tag.find("key");
            const std::string* value = tag.find("value");
            if (!key || !value)
                fail("value element needs key and value attributes", tag.line);
            if (!tag.self_closing) close_element(tag);
            on_value(*key, typed_value(tag, *value));
        }
    }

    void close_element(const XmlTag& open) {
        XmlTag tag;
        bool is_end = false;
        if (!lexer_.next_tag(tag, is_end) || !is_end || tag.name != open.name)
            fail("expected </" + open.name + ">", open.line);
    }

    // <list> whose children are value elements; returns value strings in
    // document order (used for omap, attribute-names, object-types).
    std::vector<std::string> string_list(const XmlTag& root) {
        std::vector<std::string> out;
        walk_children(
            root,
            [&](const std::string&, AttributeValue v) {
                if (v.tag() != ValueTag::String)
                    throw SchemaError("xml: expected string entries in <list key=\"" +
                                      (root.find("key") ? *root.find("key") : "") +
                                      "\"> at line " + std::to_string(root.line));
                out.push_back(std::move(v).as_string());
            },
            [&](const XmlTag& nested) { skip_subtree(nested); });
        return out;
    }

    AttributeMap attr_map(const XmlTag& root) {
        AttributeMap out;
        walk_children(
            root,
            [&](const std::string& key, AttributeValue v) {
                out.insert_or_assign(key, std::move(v));
            },
            [&](const XmlTag& nested) {
                throw SchemaError("xml: non-scalar attribute value at line " +
                                  std::to_string(nested.line));
            });
        return out;
    }

    void skip_subtree(const XmlTag& root) {
        if (root.self_closing) return;
        int depth = 1;
        XmlTag tag;
        bool is_end = false;
        while (depth > 0) {
            if (!lexer_.next_tag(tag, is_end))
                fail("unterminated <" + root.name + ">", root.line);
            if (is_end) {
                --depth;
            } else if (!tag.self_closing) {
                ++depth;
                if (depth > 128) fail("element nesting too deep", tag.line);
            }
        }
    }

    void parse_global(const XmlTag& root) {
        const std::string* scope = root.find("scope");
        if (!scope)
            fail("<global> needs a scope attribute", root.line);
        if (*scope == "log") {
            walk_children(
                root,
                [&](const std::string& key, AttributeValue v) {
                    if (key == "version" && v.tag() == ValueTag::String) {
                        meta_.version = std::move(v).as_string();
                    } else if (key == "ordering" && v.tag() == ValueTag::String) {
                        meta_.ordering = std::move(v).as_string();
                    }
                },
                [&](const XmlTag& nested) {
                    const std::string* key = nested.find("key");
                    if (key && *key == "attribute-names") {
                        for (auto& name : string_list(nested))
                            meta_.attribute_names.insert(std::move(name));
                    } else if (key && *key == "object-types") {
                        for (auto& name : string_list(nested))
                            meta_.object_types.insert(std::move(name));
                    } else {
                        skip_subtree(nested);
                    }
                });
        } else if (*scope == "event") {
            meta_.global_event = attr_map(root);
        } else if (*scope == "object") {
            meta_.global_object = attr_map(root);
        } else {
            fail("unknown global scope '" + *scope + "'", root.line);
        }
    }

    EventRecord parse_event(const XmlTag& root) {
        EventRecord ev;
        bool have_activity = false;
        bool have_timestamp = false;
        walk_children(
            root,
            [&](const std::string& key, AttributeValue v) {
                if (key == "id" && v.tag() == ValueTag::String) {
                    ev.id = std::move(v).as_string();
                } else if (key == "activity" && v.tag() == ValueTag::String) {
                    ev.activity = std::move(v).as_string();
                    have_activity = true;
                } else if (key == "timestamp" &&
                           v.tag() == ValueTag::TimestampVal) {
                    ev.timestamp = v.as_timestamp();
                    have_timestamp = true;
                } else {
                    ev.vmap.insert_or_assign(key, std::move(v));
                }
            },
            [&](const XmlTag& nested) {
                const std::string* key = nested.find("key");
                if (key && *key == "omap") {
                    ev.omap = string_list(nested);
                } else if (key && *key == "vmap") {
                    for (auto& [k, v] : attr_map(nested))
                        ev.vmap.insert_or_assign(k, std::move(v));
                } else {
                    skip_subtree(nested);
                }
            });
        if (ev.id.empty())
            throw SchemaError("xml: event without id at line " +
                              std::to_string(root.line));
        if (!have_activity)
            throw SchemaError("xml: event " + ev.id + " missing activity");
        if (!have_timestamp)
            throw SchemaError("xml: event " + ev.id + " missing timestamp");
        dedup_omap(ev);
        return ev;
    }

    ObjectRecord parse_object(const XmlTag& root) {
        ObjectRecord ob;
        bool have_type = false;
        walk_children(
            root,
            [&](const std::string& key, AttributeValue v) {
                if (key == "id" && v.tag() == ValueTag::String) {
                    ob.id = std::move(v).as_string();
                } else if (key == "type" && v.tag() == ValueTag::String) {
                    ob.otype = std::move(v).as_string();
                    have_type = true;
                } else {
                    ob.ovmap.insert_or_assign(key, std::move(v));
                }
            },
            [&](const XmlTag& nested) {
                const std::string* key = nested.find("key");
                if (key && *key == "ovmap") {
                    for (auto& [k, v] : attr_map(nested))
                        ob.ovmap.insert_or_assign(k, std::move(v));
                } else {
                    skip_subtree(nested);
                }
            });
        if (ob.id.empty())
            throw SchemaError("xml: object without id at line " +
                              std::to_string(root.line));
        if (!have_type)
            throw SchemaError("xml: object " + ob.id + " missing type");
        return ob;
    }
};

// --- Serialization ---------------------------------------------------------

class XmlWriter {
public:
    explicit XmlWriter(ByteSink& sink) : sink_(sink) {}

    ~XmlWriter() {
        // Flushing is explicit; the destructor must not throw.
    }

    void raw(std::string_view s) {
        buf_.append(s);
        maybe_flush();
    }

    void indent(int depth) {
        buf_.append(static_cast<std::size_t>(depth) * 2, ' ');
    }

    void open_line(int depth, std::string_view tag) {
        indent(depth);
        buf_.push_back('<');
        buf_.append(tag);
        buf_.append(">\n");
        maybe_flush();
    }

    void close_line(int depth, std::string_view tag) {
        indent(depth);
        buf_.append("</");
        buf_.append(tag);
        buf_.append(">\n");
        maybe_flush();
    }

    void value_line(int depth, std::string_view element, std::string_view key,
                    std::string_view value) {
        indent(depth);
        buf_.push_back('<');
        buf_.append(element);
        buf_.append(" key=\"");
        escape(key);
        buf_.append("\" value=\"");
        escape(value);
        buf_.append("\"/>\n");
        maybe_flush();
    }

    void attr_line(int depth, const std::string& key, const AttributeValue& v) {
        switch (v.tag()) {
        case ValueTag::String:
            value_line(depth, "string", key, v.as_string());
            break;
        case ValueTag::TimestampVal:
            value_line(depth, "date", key, format_iso8601(v.as_timestamp()));
            break;
        case ValueTag::Integer: {
            char tmp[24];
            auto r = std::to_chars(tmp, tmp + sizeof tmp, v.as_integer());
            value_line(depth, "int", key, std::string_view(tmp, r.ptr - tmp));
            break;
        }
        case ValueTag::Float: {
            char tmp[40];
            auto r = std::to_chars(tmp, tmp + sizeof tmp, v.as_float());
            value_line(depth, "float", key, std::string_view(tmp, r.ptr - tmp));
            break;
        }
        case ValueTag::Boolean:
            value_line(depth, "boolean", key, v.as_boolean() ? "true" : "false");
            break;
        }
    }

    void finish() {
        if (!buf_.empty()) {
            sink_.write(buf_.data(), buf_.size());
            buf_.clear();
        }
        sink_.flush();
    }

private:
    ByteSink& sink_;
    std::string buf_;

    void maybe_flush() {
        if (buf_.size() >= 64 * 1024) {
            sink_.write(buf_.data(), buf_.size());
            buf_.clear();
        }
    }

    void escape(std::string_view s) {
        for (char ch : s) {
            unsigned char c = static_cast<unsigned char>(ch);
            switch (ch) {
            case '&': buf_.append("&amp;"); break;
            case '<': buf_.append("&lt;"); break;
            case '>': buf_.append("&gt;"); break;
            case '"': buf_.append("&quot;"); break;
            case '\t': buf_.append("&#9;"); break;
            case '\n': buf_.append("&#10;"); break;
            case '\r': buf_.append("&#13;"); break;
            default:
                if (c < 0x20)
                    throw SchemaError(
                        "xml: control character not representable in XML");
                buf_.push_back(ch);
            }
        }
    }
};

void write_globals(XmlWriter& w, const LogMetadata& meta) {
    w.raw("  <global scope=\"log\">\n");
    w.value_line(2, "string", "version", meta.version);
    w.value_line(2, "string", "ordering", meta.ordering);
    w.open_line(2, "list key=\"attribute-names\"");
    for (const auto& name : meta.attribute_names)
        w.value_line(3, "string", "attribute-name", name);
    w.close_line(2, "list");
    w.open_line(2, "list key=\"object-types\"");
    for (const auto& name : meta.object_types)
        w.value_line(3, "string", "object-type", name);
    w.close_line(2, "list");
    w.raw("  </global>\n");
    w.raw("  <global scope=\"event\">\n");
    for (const auto& [key, value] : meta.global_event) w.attr_line(2, key, value);
    w.raw("  </global>\n");
    w.raw("  <global scope=\"object\">\n");
    for (const auto& [key, value] : meta.global_object) w.attr_line(2, key, value);
    w.raw("  </global>\n");
}

void write_event(XmlWriter& w, const EventRecord& ev) {
    w.open_line(2, "event");
    w.value_line(3, "string", "id", ev.id);
    w.value_line(3, "string", "activity", ev.activity);
    w.value_line(3, "date", "timestamp", format_iso8601(ev.timestamp));
    w.open_line(3, "list key=\"omap\"");
    for (const auto& oid : ev.omap) w.value_line(4, "string", "object-id", oid);
    w.close_line(3, "list");
    w.open_line(3, "list key=\"vmap\"");
    for (const auto& [key, value] : ev.vmap) w.attr_line(4, key, value);
    w.close_line(3, "list");
    w.close_line(2, "event");
}

void write_object(XmlWriter& w, const ObjectRecord& ob) {
    w.open_line(2, "object");
    w.value_line(3, "string", "id", ob.id);
    w.value_line(3, "string", "type", ob.otype);
    w.open_line(3, "list key=\"ovmap\"");
    for (const auto& [key, value] : ob.ovmap) w.attr_line(4, key, value);
    w.close_line(3, "list");
    w.close_line(2, "object");
}

} // namespace

std::unique_ptr<RecordStream> parse_xml(std::unique_ptr<ByteSource> source) {
    return std::make_unique<OcelXmlStream>(std::move(source));
}

void serialize_xml(RecordStream& stream, ByteSink& sink) {
    XmlWriter w(sink);
    w.raw("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<log>\n");
    write_globals(w, stream.metadata());

    std::vector<ObjectRecord> objects;
    bool events_open = false;
    bool have_prev = false;
    Timestamp prev_ts{0};
    std::string prev_id;

    LogRecord rec;
    while (stream.next(rec)) {
        if (std::holds_alternative<ObjectRecord>(rec)) {
            objects.push_back(std::move(std::get<ObjectRecord>(rec)));
            continue;
        }
        auto& ev = std::get<EventRecord>(rec);
        if (have_prev) {
            if (ev.timestamp < prev_ts ||
                (ev.timestamp == prev_ts && ev.id <= prev_id))
                throw SchemaError(
                    "serialize: events not in (timestamp, id) order near " +
                    ev.id);
        }
        prev_ts = ev.timestamp;
        prev_id = ev.id;
        have_prev = true;
        if (!events_open) {
            w.raw("  <events>\n");
            events_open = true;
        }
        write_event(w, ev);
    }
    if (!events_open) w.raw("  <events>\n");
    w.raw("  </events>\n");

    std::sort(objects.begin(), objects.end(),
              [](const ObjectRecord& a, const ObjectRecord& b) {
                  return a.id < b.id;
              });
    w.raw("  <objects>\n");
    for (const auto& ob : objects) write_object(w, ob);
    w.raw("  </objects>\n");
    w.raw("</log>\n");
    w.finish();
}

} // namespace ocel
