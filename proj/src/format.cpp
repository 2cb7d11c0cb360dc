#include "ocel/format.hpp"

#include <utility>

#include "ocel/errors.hpp"
#include "ocel/gzipio.hpp"
#include "ocel/json_format.hpp"
#include "ocel/xml_format.hpp"

namespace ocel {

namespace {

// Replays already-sniffed bytes before reading on from the wrapped source.
class PrefixedSource final : public ByteSource {
public:
    PrefixedSource(std::string head, std::unique_ptr<ByteSource> inner)
        : head_(std::move(head)), inner_(std::move(inner)) {}

    std::size_t read(char* buf, std::size_t n) override {
        if (pos_ < head_.size()) {
            std::size_t take = std::min(n, head_.size() - pos_);
            head_.copy(buf, take, pos_);
            pos_ += take;
            return take;
        }
        return inner_->read(buf, n);
    }

private:
    std::string head_;
    std::size_t pos_ = 0;
    std::unique_ptr<ByteSource> inner_;
};

std::size_t read_fully(ByteSource& src, char* buf, std::size_t n) {
    std::size_t got = 0;
    while (got < n) {
        std::size_t r = src.read(buf + got, n - got);
        if (r == 0) break;
        got += r;
    }
    return got;
}

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Decompress if the stream starts with the gzip magic.
std::unique_ptr<ByteSource> maybe_gunzip(std::unique_ptr<ByteSource> src) {
    char head[2];
    std::size_t got = read_fully(*src, head, sizeof head);
    if (got == 2 &&
        looks_like_gzip(reinterpret_cast<const unsigned char*>(head), got))
        return wrap_gunzip(std::move(src), std::string(head, got));
    return std::make_unique<PrefixedSource>(std::string(head, got),
                                            std::move(src));
}

} // namespace

LogFormat format_from_name(std::string_view name) {
    if (name == "auto") return LogFormat::Auto;
    if (name == "json") return LogFormat::Json;
    if (name == "xml") return LogFormat::Xml;
    throw ConfigError("unknown format '" + std::string(name) +
                      "' (expected auto, json, or xml)");
}

LogFormat format_from_path(std::string_view path) {
    if (ends_with(path, ".gz")) path.remove_suffix(3);
    if (ends_with(path, ".json") || ends_with(path, ".jsonocel"))
        return LogFormat::Json;
    if (ends_with(path, ".xml") || ends_with(path, ".xmlocel"))
        return LogFormat::Xml;
    return LogFormat::Auto;
}

std::unique_ptr<RecordStream> open_log_stream(const std::string& path,
                                              LogFormat format) {
    return open_log_stream_from(open_file_source(path), format);
}

std::unique_ptr<RecordStream> open_log_stream_from(
    std::unique_ptr<ByteSource> source, LogFormat format) {
    auto src = maybe_gunzip(std::move(source));
    if (format == LogFormat::Auto) {
        // Skip a UTF-8 byte-order mark and whitespace, then dispatch on the
        // first content byte. Skipped whitespace is replayed to the parser.
        std::string consumed;
        char c;
        int first = -1;
        while (src->read(&c, 1) == 1) {
            if (consumed.empty() && static_cast<unsigned char>(c) == 0xEF) {
                char bom[2];
                if (read_fully(*src, bom, 2) == 2 &&
                    static_cast<unsigned char>(bom[0]) == 0xBB &&
                    static_cast<unsigned char>(bom[1]) == 0xBF)
                    continue;
                throw ParseError("cannot detect log format: not JSON or XML", 0);
            }
            if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                consumed.push_back(c);
                continue;
            }
            consumed.push_back(c);
            first = static_cast<unsigned char>(c);
            break;
        }
        if (first == '{') {
            format = LogFormat::Json;
        } else if (first == '<') {
            format = LogFormat::Xml;
        } else {
            throw ParseError("cannot detect log format: not JSON or XML", 0);
        }
        src = std::make_unique<PrefixedSource>(std::move(consumed),
                                               std::move(src));
    }
    if (format == LogFormat::Json) return parse_json(std::move(src));
    return parse_xml(std::move(src));
}

void write_log(RecordStream& stream, const std::string& path, LogFormat format) {
    if (format == LogFormat::Auto) {
        format = format_from_path(path);
        if (format == LogFormat::Auto) format = LogFormat::Json;
    }
    auto sink = open_file_sink(path);
    if (ends_with(path, ".gz")) sink = wrap_gzip(std::move(sink));
    write_log_to(stream, *sink, format);
}

void write_log_to(RecordStream& stream, ByteSink& sink, LogFormat format) {
    if (format == LogFormat::Json) {
        serialize_json(stream, sink);
    } else if (format == LogFormat::Xml) {
        serialize_xml(stream, sink);
    } else {
        throw ConfigError("write_log_to requires a concrete format");
    }
}

} // namespace ocel
