#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "ocel/bytes.hpp"
#include "ocel/stream.hpp"

namespace ocel {

enum class LogFormat { Auto, Json, Xml };

// "auto" | "json" | "xml" (case-sensitive); anything else raises ConfigError.
LogFormat format_from_name(std::string_view name);

// Infers a format from the file extension, ignoring a trailing ".gz":
// .json/.jsonocel, .xml/.xmlocel. Unknown extensions map to Auto.
LogFormat format_from_path(std::string_view path);

// Opens a log file for streaming reads. Transparently inflates gzip input
// (by magic bytes, regardless of extension). Auto resolves by sniffing the
// first content byte: '{' is JSON, '<' is XML.
std::unique_ptr<RecordStream> open_log_stream(const std::string& path,
                                              LogFormat format = LogFormat::Auto);

// Same, over an arbitrary source (used for stdin and tests).
std::unique_ptr<RecordStream> open_log_stream_from(std::unique_ptr<ByteSource> source,
                                                   LogFormat format = LogFormat::Auto);

// Serializes a stream to a file. A ".gz" suffix gzip-compresses the output.
// Auto resolves from the remaining extension and defaults to JSON.
void write_log(RecordStream& stream, const std::string& path,
               LogFormat format = LogFormat::Auto);

// Serializer dispatch without file handling. `format` must not be Auto.
void write_log_to(RecordStream& stream, ByteSink& sink, LogFormat format);

} // namespace ocel
