#pragma once

#include <memory>

#include "ocel/bytes.hpp"

namespace ocel {

// True when the source starts with the gzip magic bytes 0x1f 0x8b.
// Peeks without consuming more than two bytes of state; wrap_gzip_* below
// take ownership of the already-sniffed source.
bool looks_like_gzip(const unsigned char* head, std::size_t n);

// Inflating wrapper; `head` holds bytes already consumed for sniffing.
std::unique_ptr<ByteSource> wrap_gunzip(std::unique_ptr<ByteSource> inner,
                                        std::string head = {});

// Deflating wrapper writing a gzip container. flush() finishes the stream;
// it must be called exactly once, after the last write.
std::unique_ptr<ByteSink> wrap_gzip(std::unique_ptr<ByteSink> inner);

} // namespace ocel
