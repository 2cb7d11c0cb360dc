#include "ocel/external_sort.hpp"

#include <algorithm>
#include <queue>
#include <utility>

#include "ocel/bytes.hpp"
#include "ocel/errors.hpp"

namespace fs = std::filesystem;

namespace ocel {

void append_sortable_int64(std::string& out, std::int64_t v) {
    // Flip the sign bit so that two's-complement order becomes unsigned
    // order, then emit big-endian.
    const std::uint64_t u =
        static_cast<std::uint64_t>(v) ^ (std::uint64_t{1} << 63);
    for (int i = 7; i >= 0; --i)
        out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

std::int64_t read_sortable_int64(std::string_view key) {
    std::uint64_t u = 0;
    for (int i = 0; i < 8 && static_cast<std::size_t>(i) < key.size(); ++i)
        u = (u << 8) | static_cast<unsigned char>(key[i]);
    return static_cast<std::int64_t>(u ^ (std::uint64_t{1} << 63));
}

namespace {

bool entry_less(std::string_view ak, std::string_view av, std::string_view bk,
                std::string_view bv) {
    if (int c = ak.compare(bk); c != 0) return c < 0;
    return av < bv;
}

// Framing inside a run file: varint(klen) varint(vlen) key value, repeated.
void write_framed(ByteSink& sink, std::string& scratch, std::string_view key,
                  std::string_view value) {
    scratch.clear();
    put_varint(scratch, key.size());
    put_varint(scratch, value.size());
    sink.write(scratch.data(), scratch.size());
    sink.write(key.data(), key.size());
    sink.write(value.data(), value.size());
}

class RunReader {
public:
    explicit RunReader(const fs::path& path)
        : source_(open_file_source(path.string())), reader_(*source_) {}

    bool next() {
        if (reader_.peek() < 0) return false;
        std::uint64_t klen = 0;
        std::uint64_t vlen = 0;
        if (!get_varint(reader_, klen) || !get_varint(reader_, vlen))
            throw CorruptionError("spill run truncated");
        key.resize(klen);
        value.resize(vlen);
        if (!reader_.read_exact(key.data(), klen) ||
            !reader_.read_exact(value.data(), vlen))
            throw CorruptionError("spill run truncated");
        return true;
    }

    std::string key;
    std::string value;

private:
    std::unique_ptr<ByteSource> source_;
    ByteReader reader_;
};

class MemoryIterator final : public SortedRunIterator {
public:
    explicit MemoryIterator(std::vector<std::pair<std::string, std::string>> entries)
        : entries_(std::move(entries)) {}

    bool next(std::string& key, std::string& value) override {
        if (pos_ >= entries_.size()) return false;
        key = std::move(entries_[pos_].first);
        value = std::move(entries_[pos_].second);
        ++pos_;
        return true;
    }

private:
    std::vector<std::pair<std::string, std::string>> entries_;
    std::size_t pos_ = 0;
};

class MergeIterator final : public SortedRunIterator {
public:
    explicit MergeIterator(const std::vector<fs::path>& runs) {
        readers_.reserve(runs.size());
        for (const auto& p : runs) readers_.push_back(std::make_unique<RunReader>(p));
        for (std::size_t i = 0; i < readers_.size(); ++i)
            if (readers_[i]->next()) heap_.push_back(i);
        std::make_heap(heap_.begin(), heap_.end(), Greater{this});
    }

    bool next(std::string& key, std::string& value) override {
        if (heap_.empty()) return false;
        std::pop_heap(heap_.begin(), heap_.end(), Greater{this});
        const std::size_t idx = heap_.back();
        key = std::move(readers_[idx]->key);
        value = std::move(readers_[idx]->value);
        if (readers_[idx]->next()) {
            std::push_heap(heap_.begin(), heap_.end(), Greater{this});
        } else {
            heap_.pop_back();
        }
        return true;
    }

private:
    // Min-heap on (key, value, run index); the index tiebreak keeps the
    // order total even for fully identical records.
    struct Greater {
        MergeIterator* self;
        bool operator()(std::size_t a, std::size_t b) const {
            const auto& ra = *self->readers_[a];
            const auto& rb = *self->readers_[b];
            if (entry_less(rb.key, rb.value, ra.key, ra.value)) return true;
            if (entry_less(ra.key, ra.value, rb.key, rb.value)) return false;
            return a > b;
        }
    };

    std::vector<std::unique_ptr<RunReader>> readers_;
    std::vector<std::size_t> heap_;
};

constexpr std::size_t kMaxFanIn = 64;
constexpr std::size_t kPerEntryOverhead = 64; // two strings + vector slot

} // namespace

ExternalSorter::ExternalSorter(fs::path dir, std::string name,
                               std::size_t budget_bytes)
    : dir_(std::move(dir)), name_(std::move(name)), budget_bytes_(budget_bytes) {
    if (budget_bytes_ < 1 << 16) budget_bytes_ = 1 << 16;
}

ExternalSorter::~ExternalSorter() {
    std::error_code ec;
    for (const auto& p : runs_) fs::remove(p, ec);
}

void ExternalSorter::add(std::string_view key, std::string_view value) {
    buffered_bytes_ += key.size() + value.size() + kPerEntryOverhead;
    entries_.push_back(Entry{std::string(key), std::string(value)});
    if (buffered_bytes_ >= budget_bytes_) flush_run();
}

void ExternalSorter::flush_run() {
    if (entries_.empty()) return;
    std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
        return entry_less(a.key, a.value, b.key, b.value);
    });
    fs::create_directories(dir_);
    fs::path path = dir_ / (name_ + "-" + std::to_string(runs_total_++) + ".run");
    auto sink = open_file_sink(path.string());
    std::string scratch;
    std::uint64_t written = 0;
    for (const auto& e : entries_) {
        write_framed(*sink, scratch, e.key, e.value);
        written += varint_size(e.key.size()) + varint_size(e.value.size()) +
                   e.key.size() + e.value.size();
    }
    sink->flush();
    spill_bytes_ += written;
    runs_.push_back(std::move(path));
    entries_.clear();
    buffered_bytes_ = 0;
}

fs::path ExternalSorter::merge_runs(std::size_t first, std::size_t count) {
    std::vector<fs::path> batch(runs_.begin() + first,
                                runs_.begin() + first + count);
    fs::path path = dir_ / (name_ + "-" + std::to_string(runs_total_++) + ".run");
    {
        MergeIterator merged(batch);
        auto sink = open_file_sink(path.string());
        std::string scratch;
        std::string key;
        std::string value;
        std::uint64_t written = 0;
        while (merged.next(key, value)) {
            write_framed(*sink, scratch, key, value);
            written += varint_size(key.size()) + varint_size(value.size()) +
                       key.size() + value.size();
        }
        sink->flush();
        spill_bytes_ += written;
    }
    std::error_code ec;
    for (const auto& p : batch) fs::remove(p, ec);
    return path;
}

std::unique_ptr<SortedRunIterator> ExternalSorter::finish() {
    finished_ = true;
    if (runs_.empty()) {
        std::sort(entries_.begin(), entries_.end(),
                  [](const Entry& a, const Entry& b) {
                      return entry_less(a.key, a.value, b.key, b.value);
                  });
        std::vector<std::pair<std::string, std::string>> out;
        out.reserve(entries_.size());
        for (auto& e : entries_)
            out.emplace_back(std::move(e.key), std::move(e.value));
        entries_.clear();
        buffered_bytes_ = 0;
        return std::make_unique<MemoryIterator>(std::move(out));
    }
    flush_run();
    // Keep the merge fan-in bounded: collapse the oldest runs first until
    // one merge pass can cover what is left.
    while (runs_.size() > kMaxFanIn) {
        const std::size_t take = std::min(kMaxFanIn, runs_.size() - kMaxFanIn + 1);
        fs::path merged = merge_runs(0, take);
        runs_.erase(runs_.begin(), runs_.begin() + take);
        runs_.insert(runs_.begin(), std::move(merged));
    }
    return std::make_unique<MergeIterator>(runs_);
}

} // namespace ocel
