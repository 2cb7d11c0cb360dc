#include "ocel/agg.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <queue>
#include <thread>
#include <unordered_map>
#include <utility>

#include "ocel/bytes.hpp"
#include "ocel/errors.hpp"
#include "ocel/record_codec.hpp"

namespace fs = std::filesystem;

namespace ocel {

namespace {

// Spill records use the store's record-frame encoding — varint length,
// payload, payload crc32 — with a lifecycle payload kind:
//
//   lifecycle := 0x03 varint(seq) str(object_id)
//                varint(n) (str(activity) fixed64(ts) str(event_id))*n
//
// seq is the flush sequence number; fragments of one object concatenate in
// seq order to rebuild the full entry.

constexpr std::uint8_t kLifecycleRecordTag = 0x03;
constexpr std::size_t kPartitionFanOut = 64; // 2^6
constexpr int kMaxRepartitionDepth = 8;

std::size_t partition_of(std::string_view object_id, std::uint32_t salt) {
    std::uint64_t h = 0xcbf29ce484222325ull ^
                      (salt * 0x9e3779b97f4a7c15ull);
    for (const char c : object_id) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return static_cast<std::size_t>(h & (kPartitionFanOut - 1));
}

void put_str(std::string& out, std::string_view s) {
    put_varint(out, s.size());
    out.append(s);
}

bool get_str(std::string_view data, std::size_t& pos, std::string& out) {
    std::uint64_t len = 0;
    if (!get_varint(data, pos, len) || data.size() - pos < len) return false;
    out.assign(data.substr(pos, len));
    pos += static_cast<std::size_t>(len);
    return true;
}

void encode_fragment(std::uint64_t seq, std::string_view object_id,
                     const std::vector<LifecycleStep>& steps, std::string& out) {
    out.clear();
    out.push_back(static_cast<char>(kLifecycleRecordTag));
    put_varint(out, seq);
    put_str(out, object_id);
    put_varint(out, steps.size());
    for (const auto& s : steps) {
        put_str(out, s.activity);
        put_fixed64(out, static_cast<std::uint64_t>(s.timestamp.micros));
        put_str(out, s.event_id);
    }
}

struct Fragment {
    std::uint64_t seq = 0;
    std::string object_id;
    std::vector<LifecycleStep> steps;
};

bool decode_fragment(std::string_view payload, Fragment& out) {
    std::size_t pos = 0;
    if (payload.empty() ||
        static_cast<std::uint8_t>(payload[0]) != kLifecycleRecordTag)
        return false;
    ++pos;
    if (!get_varint(payload, pos, out.seq)) return false;
    if (!get_str(payload, pos, out.object_id)) return false;
    std::uint64_t n = 0;
    if (!get_varint(payload, pos, n)) return false;
    out.steps.clear();
    out.steps.reserve(static_cast<std::size_t>(n));
    for (std::uint64_t i = 0; i < n; ++i) {
        LifecycleStep s;
        if (!get_str(payload, pos, s.activity)) return false;
        std::uint64_t ts = 0;
        if (!get_fixed64(payload, pos, ts)) return false;
        s.timestamp = Timestamp{static_cast<std::int64_t>(ts)};
        if (!get_str(payload, pos, s.event_id)) return false;
        out.steps.push_back(std::move(s));
    }
    return pos == payload.size();
}

// Reads just the object id, skipping the rest (routing passes).
bool fragment_object_id(std::string_view payload, std::string& out) {
    std::size_t pos = 0;
    if (payload.empty() ||
        static_cast<std::uint8_t>(payload[0]) != kLifecycleRecordTag)
        return false;
    ++pos;
    std::uint64_t seq = 0;
    return get_varint(payload, pos, seq) && get_str(payload, pos, out);
}

class FrameWriter {
public:
    explicit FrameWriter(const fs::path& path) : path_(path.string()) {
        f_ = std::fopen(path_.c_str(), "wb");
        if (!f_) throw IoError("cannot open spill file " + path_ + " for writing");
    }

    ~FrameWriter() {
        if (f_) std::fclose(f_);
    }

    void add(std::string_view payload) {
        head_.clear();
        put_varint(head_, payload.size());
        const std::uint32_t crc = crc32_of(payload);
        char crcb[4] = {static_cast<char>(crc & 0xff),
                        static_cast<char>((crc >> 8) & 0xff),
                        static_cast<char>((crc >> 16) & 0xff),
                        static_cast<char>((crc >> 24) & 0xff)};
        if (std::fwrite(head_.data(), 1, head_.size(), f_) != head_.size() ||
            std::fwrite(payload.data(), 1, payload.size(), f_) !=
                payload.size() ||
            std::fwrite(crcb, 1, 4, f_) != 4)
            throw IoError("write error on spill file " + path_);
        bytes_ += head_.size() + payload.size() + 4;
    }

    std::uint64_t close() {
        if (f_) {
            if (std::fflush(f_) != 0)
                throw IoError("write error on spill file " + path_);
            std::fclose(f_);
            f_ = nullptr;
        }
        return bytes_;
    }

private:
    std::string path_;
    std::FILE* f_ = nullptr;
    std::string head_;
    std::uint64_t bytes_ = 0;
};

class FrameReader {
public:
    explicit FrameReader(const fs::path& path)
        : path_(path.string()), src_(open_file_source(path_)), reader_(*src_) {}

    bool next(std::string& payload) {
        std::uint64_t len = 0;
        if (reader_.peek() < 0) return false;
        if (!get_varint(reader_, len))
            throw CorruptionError("spill file " + path_ + ": truncated frame");
        payload.resize(static_cast<std::size_t>(len));
        char crcb[4];
        if (!reader_.read_exact(payload.data(), payload.size()) ||
            !reader_.read_exact(crcb, 4))
            throw CorruptionError("spill file " + path_ + ": truncated frame");
        const std::uint32_t want =
            static_cast<std::uint32_t>(static_cast<unsigned char>(crcb[0])) |
            static_cast<std::uint32_t>(static_cast<unsigned char>(crcb[1])) << 8 |
            static_cast<std::uint32_t>(static_cast<unsigned char>(crcb[2])) << 16 |
            static_cast<std::uint32_t>(static_cast<unsigned char>(crcb[3])) << 24;
        if (crc32_of(payload) != want)
            throw CorruptionError("spill file " + path_ + ": checksum mismatch");
        return true;
    }

private:
    std::string path_;
    std::unique_ptr<ByteSource> src_;
    ByteReader reader_;
};

std::size_t step_bytes(const LifecycleStep& s) {
    return encoded_size_str(s.activity) + 8 + encoded_size_str(s.event_id);
}

} // namespace

// --- stream impl ----------------------------------------------------------------

struct LifecycleStream::Impl {
    UnwindMetrics metrics;
    fs::path dir;
    std::vector<fs::path> live_files;
    std::size_t file_counter = 0;
    std::size_t workers = 1;
    bool failed = false;

    // Guards live_files, file_counter, cursors and the metrics fields while
    // partitions are processed in parallel; uncontended otherwise.
    std::mutex mu;
    std::size_t live_bytes = 0; // group-table bytes currently held, all threads

    void note_live(std::ptrdiff_t delta) {
        std::lock_guard<std::mutex> g(mu);
        live_bytes = static_cast<std::size_t>(
            static_cast<std::ptrdiff_t>(live_bytes) + delta);
        if (live_bytes > metrics.high_water_bytes)
            metrics.high_water_bytes = live_bytes;
    }

    void note_spill(std::uint64_t bytes) {
        std::lock_guard<std::mutex> g(mu);
        metrics.spill_bytes += bytes;
    }

    // In-memory path (no spill happened).
    std::vector<LifecycleEntry> memory_entries;
    std::size_t memory_pos = 0;
    bool in_memory = false;

    // Merge path: one cursor per sorted output run; ids are disjoint across
    // runs, so a min-heap on the head id yields global ascending order.
    struct RunCursor {
        std::unique_ptr<FrameReader> reader;
        fs::path path;
        LifecycleEntry head;
        bool advance() {
            std::string payload;
            if (!reader->next(payload)) return false;
            Fragment frag;
            if (!decode_fragment(payload, frag))
                throw CorruptionError("spill file " + path.string() +
                                      ": undecodable lifecycle record");
            head.object_id = std::move(frag.object_id);
            head.lifecycle = std::move(frag.steps);
            return true;
        }
    };
    std::vector<std::unique_ptr<RunCursor>> cursors;
    using HeapItem = std::pair<std::string, std::size_t>; // (head id, cursor)
    std::priority_queue<HeapItem, std::vector<HeapItem>, std::greater<>> heap;

    fs::path new_file(const char* stem) {
        std::lock_guard<std::mutex> g(mu);
        char buf[32];
        std::snprintf(buf, sizeof buf, "%s-%04zu.spill", stem, file_counter++);
        fs::path p = dir / buf;
        live_files.push_back(p);
        return p;
    }

    void drop_file(const fs::path& p) {
        std::error_code ec;
        fs::remove(p, ec);
        std::lock_guard<std::mutex> g(mu);
        live_files.erase(std::find(live_files.begin(), live_files.end(), p));
    }

    void cleanup() {
        cursors.clear();
        std::error_code ec;
        for (const auto& p : live_files) {
            if (failed)
                fs::rename(p, p.string() + ".failed", ec);
            else
                fs::remove(p, ec);
        }
        live_files.clear();
    }

    ~Impl() { cleanup(); }

    bool next(LifecycleEntry& out);
    void build(EventSource& events,
               const std::function<bool(const std::string&)>* keep,
               std::size_t budget);
    void process_partition(const fs::path& file, std::uint32_t salt, int depth,
                           std::size_t budget);
};

void LifecycleStream::Impl::build(
    EventSource& events, const std::function<bool(const std::string&)>* keep,
    std::size_t budget) {
    std::unordered_map<std::string, std::vector<LifecycleStep>> table;
    std::size_t accounting = 0;
    std::uint64_t flush_seq = 0;
    std::vector<std::unique_ptr<FrameWriter>> writers(kPartitionFanOut);
    std::vector<fs::path> part_files(kPartitionFanOut);
    bool spilled = false;

    auto flush = [&] {
        if (table.empty()) return;
        if (!spilled) {
            std::error_code ec;
            fs::create_directories(dir, ec);
            if (ec)
                throw IoError("cannot create spill directory " + dir.string());
            spilled = true;
        }
        std::vector<const std::string*> ids;
        ids.reserve(table.size());
        for (const auto& [id, steps] : table) ids.push_back(&id);
        std::sort(ids.begin(), ids.end(),
                  [](const std::string* a, const std::string* b) { return *a < *b; });
        std::string payload;
        for (const std::string* id : ids) {
            const std::size_t p = partition_of(*id, 0);
            if (!writers[p]) {
                part_files[p] = new_file("part");
                writers[p] = std::make_unique<FrameWriter>(part_files[p]);
            }
            encode_fragment(flush_seq, *id, table[*id], payload);
            writers[p]->add(payload);
            metrics.spill_bytes += varint_size(payload.size()) + payload.size() + 4;
        }
        ++flush_seq;
        table.clear();
        accounting = 0;
    };

    EventRecord ev;
    while (events.next(ev)) {
        for (const auto& oid : ev.omap) {
            if (keep && !(*keep)(oid)) continue;
            auto [it, inserted] = table.try_emplace(oid);
            if (inserted) accounting += encoded_size_str(oid);
            it->second.push_back(LifecycleStep{ev.activity, ev.timestamp, ev.id});
            accounting += step_bytes(it->second.back());
            if (accounting > metrics.high_water_bytes)
                metrics.high_water_bytes = accounting;
            if (accounting > budget) flush();
        }
    }

    if (!spilled) {
        // Everything fit: sort and stream from memory.
        in_memory = true;
        memory_entries.reserve(table.size());
        for (auto& [id, steps] : table)
            memory_entries.push_back(LifecycleEntry{id, std::move(steps)});
        std::sort(memory_entries.begin(), memory_entries.end(),
                  [](const LifecycleEntry& a, const LifecycleEntry& b) {
                      return a.object_id < b.object_id;
                  });
        return;
    }

    flush();
    for (auto& w : writers)
        if (w) w->close();
    writers.clear();

    std::vector<fs::path> tasks;
    for (std::size_t p = 0; p < kPartitionFanOut; ++p)
        if (!part_files[p].empty()) tasks.push_back(part_files[p]);

    const std::size_t pool_size =
        std::min(workers > 0 ? workers : 1, tasks.size());
    if (pool_size <= 1) {
        for (const auto& file : tasks) process_partition(file, 0, 0, budget);
    } else {
        std::atomic<std::size_t> next_task{0};
        std::mutex err_mu;
        std::exception_ptr first_error;
        auto work = [&] {
            for (;;) {
                const std::size_t i = next_task.fetch_add(1);
                if (i >= tasks.size()) return;
                {
                    std::lock_guard<std::mutex> g(err_mu);
                    if (first_error) return;
                }
                try {
                    process_partition(tasks[i], 0, 0, budget);
                } catch (...) {
                    std::lock_guard<std::mutex> g(err_mu);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(pool_size);
        for (std::size_t i = 0; i < pool_size; ++i) pool.emplace_back(work);
        for (auto& t : pool) t.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    std::sort(cursors.begin(), cursors.end(),
              [](const std::unique_ptr<RunCursor>& a,
                 const std::unique_ptr<RunCursor>& b) {
                  return a->head.object_id < b->head.object_id;
              });
    for (std::size_t i = 0; i < cursors.size(); ++i)
        heap.emplace(cursors[i]->head.object_id, i);
}

void LifecycleStream::Impl::process_partition(const fs::path& file,
                                              std::uint32_t salt, int depth,
                                              std::size_t budget) {
    // Rebuild this partition's groups in memory; fragments arrive in flush
    // order, so per-object concatenation preserves event order.
    std::map<std::string, std::vector<LifecycleStep>> groups;
    std::size_t accounting = 0;
    bool overflow = false;
    {
        FrameReader reader(file);
        std::string payload;
        Fragment frag;
        while (reader.next(payload)) {
            if (!decode_fragment(payload, frag))
                throw CorruptionError("spill file " + file.string() +
                                      ": undecodable lifecycle record");
            auto [it, inserted] = groups.try_emplace(std::move(frag.object_id));
            std::size_t delta = inserted ? encoded_size_str(it->first) : 0;
            for (auto& s : frag.steps) {
                delta += step_bytes(s);
                it->second.push_back(std::move(s));
            }
            accounting += delta;
            note_live(static_cast<std::ptrdiff_t>(delta));
            if (accounting > budget) {
                if (groups.size() <= 1)
                    throw ConfigError(
                        "memory budget cannot hold the lifecycle of object '" +
                        it->first + "'");
                overflow = true;
                break;
            }
        }
    }

    if (overflow) {
        // Too much for one pass: split the whole file by a re-salted hash
        // and recurse. Routing preserves per-object fragment order.
        groups.clear();
        note_live(-static_cast<std::ptrdiff_t>(accounting));
        accounting = 0;
        if (depth + 1 > kMaxRepartitionDepth)
            throw ConfigError("aggregation repartition depth exceeded; "
                              "memory budget too small for this input");
        std::vector<std::unique_ptr<FrameWriter>> writers(kPartitionFanOut);
        std::vector<fs::path> sub_files(kPartitionFanOut);
        {
            FrameReader reader(file);
            std::string payload;
            std::string oid;
            while (reader.next(payload)) {
                if (!fragment_object_id(payload, oid))
                    throw CorruptionError("spill file " + file.string() +
                                          ": undecodable lifecycle record");
                const std::size_t p = partition_of(oid, salt + 1);
                if (!writers[p]) {
                    sub_files[p] = new_file("part");
                    writers[p] = std::make_unique<FrameWriter>(sub_files[p]);
                }
                writers[p]->add(payload);
                note_spill(varint_size(payload.size()) + payload.size() + 4);
            }
        }
        for (auto& w : writers)
            if (w) w->close();
        writers.clear();
        drop_file(file);
        for (std::size_t p = 0; p < kPartitionFanOut; ++p)
            if (!sub_files[p].empty())
                process_partition(sub_files[p], salt + 1, depth + 1, budget);
        return;
    }

    // Groups fit; std::map already orders ids. Write the sorted run and
    // open a cursor on it.
    if (!groups.empty()) {
        const fs::path run = new_file("run");
        {
            FrameWriter out(run);
            std::string payload;
            for (const auto& [id, steps] : groups) {
                encode_fragment(0, id, steps, payload);
                out.add(payload);
                note_spill(varint_size(payload.size()) + payload.size() + 4);
            }
            out.close();
        }
        groups.clear();
        note_live(-static_cast<std::ptrdiff_t>(accounting));
        auto cursor = std::make_unique<RunCursor>();
        cursor->reader = std::make_unique<FrameReader>(run);
        cursor->path = run;
        bool has_head = cursor->advance();
        if (has_head) {
            std::lock_guard<std::mutex> g(mu);
            cursors.push_back(std::move(cursor));
        }
    }
    drop_file(file);
}

bool LifecycleStream::Impl::next(LifecycleEntry& out) {
    if (in_memory) {
        if (memory_pos >= memory_entries.size()) return false;
        out = std::move(memory_entries[memory_pos++]);
        return true;
    }
    if (heap.empty()) return false;
    const std::size_t i = heap.top().second;
    heap.pop();
    try {
        out = std::move(cursors[i]->head);
        if (cursors[i]->advance())
            heap.emplace(cursors[i]->head.object_id, i);
    } catch (...) {
        failed = true;
        cleanup();
        throw;
    }
    return true;
}

// --- public surface ---------------------------------------------------------------

LifecycleStream::LifecycleStream(std::unique_ptr<Impl> impl)
    : impl_(std::move(impl)) {}
LifecycleStream::LifecycleStream(LifecycleStream&&) noexcept = default;
LifecycleStream& LifecycleStream::operator=(LifecycleStream&&) noexcept = default;
LifecycleStream::~LifecycleStream() = default;

bool LifecycleStream::next(LifecycleEntry& out) { return impl_->next(out); }
const UnwindMetrics& LifecycleStream::metrics() const { return impl_->metrics; }

namespace {

std::unique_ptr<LifecycleStream::Impl> build_unwind(
    EventSource& events, const std::function<bool(const std::string&)>* keep,
    std::size_t budget_bytes, const fs::path& spill_dir, std::size_t workers) {
    auto impl = std::make_unique<LifecycleStream::Impl>();
    impl->dir = spill_dir;
    impl->workers = workers;
    try {
        impl->build(events, keep, budget_bytes);
    } catch (...) {
        impl->failed = true;
        // impl's destructor renames the spill files to *.failed
        throw;
    }
    return impl;
}

} // namespace

LifecycleStream unwind_group(EventSource& events, std::size_t budget_bytes,
                             const fs::path& spill_dir, std::size_t workers) {
    return LifecycleStream(
        build_unwind(events, nullptr, budget_bytes, spill_dir, workers));
}

LifecycleStream unwind_group_filtered(
    EventSource& events, const std::set<std::string>& object_type_filter,
    const std::function<std::string(const std::string&)>& object_resolver,
    std::size_t budget_bytes, const fs::path& spill_dir, std::size_t workers) {
    std::unordered_map<std::string, bool> cache;
    std::function<bool(const std::string&)> keep =
        [&](const std::string& oid) {
            auto it = cache.find(oid);
            if (it != cache.end()) return it->second;
            const bool ok =
                object_type_filter.count(object_resolver(oid)) != 0;
            cache.emplace(oid, ok);
            return ok;
        };
    return LifecycleStream(
        build_unwind(events, &keep, budget_bytes, spill_dir, workers));
}

} // namespace ocel
