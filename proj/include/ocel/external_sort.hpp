#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace ocel {

// Appends an order-preserving big-endian encoding of v: bytewise
// comparison of the 8 encoded bytes matches signed integer order.
void append_sortable_int64(std::string& out, std::int64_t v);
std::int64_t read_sortable_int64(std::string_view key);

// Yields (key, value) pairs in ascending (key, value) byte order.
class SortedRunIterator {
public:
    virtual ~SortedRunIterator() = default;
    virtual bool next(std::string& key, std::string& value) = 0;
};

// Bounded-memory sorter over opaque (key, value) byte records. Records are
// buffered up to `budget_bytes`, spilled to sorted run files under `dir`,
// and merged on finish(). Output order is total and deterministic:
// ascending by key bytes, ties by value bytes.
class ExternalSorter {
public:
    // Run files are created lazily as `dir/name-<n>.run`; `dir` is created
    // if missing. The sorter removes its run files when destroyed.
    ExternalSorter(std::filesystem::path dir, std::string name,
                   std::size_t budget_bytes);
    ~ExternalSorter();

    ExternalSorter(const ExternalSorter&) = delete;
    ExternalSorter& operator=(const ExternalSorter&) = delete;

    void add(std::string_view key, std::string_view value);

    // Ends the add phase and returns the merged iteration. Call once; the
    // sorter must outlive the iterator.
    std::unique_ptr<SortedRunIterator> finish();

    // Bytes written to spill runs so far (0 when everything fit in memory).
    std::uint64_t spill_bytes() const { return spill_bytes_; }
    std::size_t runs_written() const { return runs_total_; }

private:
    struct Entry {
        std::string key;
        std::string value;
    };

    void flush_run();
    std::filesystem::path merge_runs(std::size_t first, std::size_t count);

    std::filesystem::path dir_;
    std::string name_;
    std::size_t budget_bytes_;
    std::size_t buffered_bytes_ = 0;
    std::vector<Entry> entries_;
    std::vector<std::filesystem::path> runs_;
    std::size_t runs_total_ = 0;
    std::uint64_t spill_bytes_ = 0;
    bool finished_ = false;
};

} // namespace ocel
