#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ocel/bytes.hpp"

namespace ocel {

// Immutable sorted index file: key -> postings list of record locations.
//
//   header  := "OCIX" version(1) kind(1)
//   entry   := varint(klen) key varint(count) varint(loc0) varint(delta)...
//   dirent  := varint(klen) key varint(entry_offset)   (every 64th entry)
//   footer  := fixed64(dir_offset) fixed64(entry_count)
//              fixed64(postings_total) fixed32(crc) "OCIX"
//
// Postings are strictly ascending and delta-encoded; the footer CRC covers
// every preceding byte. The sparse directory is loaded into memory on open,
// so a lookup reads one entry block of at most 64 keys.

constexpr std::uint8_t kIndexFormatVersion = 1;

enum class IndexKind : std::uint8_t {
    EventId = 1,
    Activity = 2,
    Omap = 3,
    ObjectId = 4,
    ObjectType = 5,
};

// Streaming writer; add() keys must be strictly ascending, postings
// strictly ascending per key.
class SstWriter {
public:
    SstWriter(const std::string& path, IndexKind kind);
    ~SstWriter();

    void add(std::string_view key, const std::vector<std::uint64_t>& postings);

    struct Totals {
        std::uint64_t file_bytes = 0;
        std::uint64_t entry_count = 0;
        std::uint64_t postings_total = 0;
        std::uint32_t crc = 0; // footer checksum (covers the whole body)
    };
    // Writes directory + footer and flushes. Must be called exactly once.
    Totals finish();

private:
    void emit(std::string_view bytes);

    std::string path_;
    IndexKind kind_;
    std::unique_ptr<ByteSink> sink_;
    std::string buf_;
    std::uint64_t offset_ = 0;
    std::uint32_t crc_ = 0;
    std::uint64_t entry_count_ = 0;
    std::uint64_t postings_total_ = 0;
    std::string last_key_;
    // (key, entry offset) every 64th entry.
    std::vector<std::pair<std::string, std::uint64_t>> directory_;
    bool finished_ = false;
};

class SstReader {
public:
    // Opens and structurally checks the file (magics, version, kind,
    // directory). Throws CorruptionError on mismatch. The full checksum is
    // only verified by verify_checksum().
    SstReader(const std::string& path, IndexKind kind);

    // Postings for key, empty if absent.
    std::vector<std::uint64_t> lookup(std::string_view key) const;

    // Streams every (key, postings) pair in key order.
    void scan(const std::function<void(std::string_view key,
                                       const std::vector<std::uint64_t>& postings)>& fn) const;

    // Recomputes the body CRC against the footer. False on mismatch.
    bool verify_checksum() const;

    std::uint64_t entry_count() const { return entry_count_; }
    std::uint64_t postings_total() const { return postings_total_; }
    std::uint64_t file_bytes() const { return file_.size(); }
    std::uint32_t crc() const { return crc_; }

private:
    RandomAccessFile file_;
    IndexKind kind_;
    std::uint64_t dir_offset_ = 0;
    std::uint64_t entry_count_ = 0;
    std::uint64_t postings_total_ = 0;
    std::uint32_t crc_ = 0;
    std::vector<std::pair<std::string, std::uint64_t>> directory_;
};

} // namespace ocel
