#include "ocel/store.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <map>
#include <unordered_map>
#include <utility>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <json.hpp>

#include "ocel/bytes.hpp"
#include "ocel/errors.hpp"
#include "ocel/external_sort.hpp"
#include "ocel/record_codec.hpp"
#include "ocel/sstable.hpp"
#include "ocel/timeutil.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ocel {

namespace {

// --- segment file format ----------------------------------------------------
//
//   header := "OCSG" version(1) kind(1: event / 2: object)
//   frame  := varint(len >= 1) payload[len] fixed32(crc32 of payload)
//   footer := varint(0) fixed64(records) fixed64(min_ts) fixed64(max_ts)
//             fixed32(crc32 of the 24 stat bytes)

constexpr char kSegMagic[4] = {'O', 'C', 'S', 'G'};
constexpr std::uint8_t kStoreFormatVersion = 1;
constexpr std::size_t kSegHeaderSize = 6;
constexpr std::uint64_t kMaxRecordLen = 1ull << 28;
constexpr std::uint64_t kSegmentRollBytes = 64ull << 20;

struct SegmentInfo {
    std::string file; // relative to <root>/segments
    std::uint64_t bytes = 0;
    std::uint32_t crc = 0; // crc32 of the whole file
    std::uint64_t records = 0;
    std::int64_t min_ts = 0;
    std::int64_t max_ts = 0;
};

struct IndexInfo {
    std::string file; // relative to <root>/index
    std::uint64_t bytes = 0;
    std::uint32_t crc = 0; // body checksum from the index footer
    std::uint64_t entries = 0;
    std::uint64_t postings = 0;
};

struct Manifest {
    bool committed = false;
    bool ingested = false;
    std::uint64_t events = 0;
    std::uint64_t objects = 0;
    std::uint64_t postings = 0;
    std::vector<SegmentInfo> event_segments;
    std::vector<SegmentInfo> object_segments;
    std::map<std::string, IndexInfo> indexes;
    LogMetadata metadata;
    std::vector<std::string> recovery;
};

struct IndexNameKind {
    const char* name;
    IndexKind kind;
};
constexpr IndexNameKind kIndexes[] = {
    {"event_id", IndexKind::EventId},   {"activity", IndexKind::Activity},
    {"omap", IndexKind::Omap},          {"object_id", IndexKind::ObjectId},
    {"object_type", IndexKind::ObjectType},
};

// Record locations sort bytewise the same way they sort numerically.
void put_fixed64_be(std::string& out, std::uint64_t v) {
    for (int i = 7; i >= 0; --i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t read_fixed64_be(std::string_view v) {
    std::uint64_t out = 0;
    for (std::size_t i = 0; i < 8 && i < v.size(); ++i)
        out = (out << 8) | static_cast<unsigned char>(v[i]);
    return out;
}

// --- manifest JSON -----------------------------------------------------------

json value_to_json(const AttributeValue& v) {
    switch (v.tag()) {
    case ValueTag::String: return json{{"t", "string"}, {"v", v.as_string()}};
    case ValueTag::TimestampVal:
        return json{{"t", "date"}, {"v", format_iso8601(v.as_timestamp())}};
    case ValueTag::Integer: return json{{"t", "int"}, {"v", v.as_integer()}};
    case ValueTag::Float: return json{{"t", "float"}, {"v", v.as_float()}};
    case ValueTag::Boolean: return json{{"t", "bool"}, {"v", v.as_boolean()}};
    }
    return json();
}

AttributeValue value_from_json(const json& j) {
    const std::string t = j.at("t").get<std::string>();
    if (t == "string") return AttributeValue(j.at("v").get<std::string>());
    if (t == "date") {
        auto ts = parse_iso8601(j.at("v").get<std::string>());
        if (!ts) throw CorruptionError("manifest: bad date value");
        return AttributeValue(*ts);
    }
    if (t == "int") return AttributeValue(j.at("v").get<std::int64_t>());
    if (t == "float") return AttributeValue(j.at("v").get<double>());
    if (t == "bool") return AttributeValue(j.at("v").get<bool>());
    throw CorruptionError("manifest: unknown value type '" + t + "'");
}

json attrs_to_json(const AttributeMap& m) {
    json out = json::object();
    for (const auto& [k, v] : m) out[k] = value_to_json(v);
    return out;
}

AttributeMap attrs_from_json(const json& j) {
    AttributeMap out;
    for (auto it = j.begin(); it != j.end(); ++it)
        out.insert_or_assign(it.key(), value_from_json(it.value()));
    return out;
}

json segment_to_json(const SegmentInfo& s) {
    return json{{"file", s.file},       {"bytes", s.bytes}, {"crc", s.crc},
                {"records", s.records}, {"min_ts", s.min_ts}, {"max_ts", s.max_ts}};
}

SegmentInfo segment_from_json(const json& j) {
    SegmentInfo s;
    s.file = j.at("file").get<std::string>();
    s.bytes = j.at("bytes").get<std::uint64_t>();
    s.crc = j.at("crc").get<std::uint32_t>();
    s.records = j.at("records").get<std::uint64_t>();
    s.min_ts = j.at("min_ts").get<std::int64_t>();
    s.max_ts = j.at("max_ts").get<std::int64_t>();
    return s;
}

json manifest_to_json(const Manifest& m) {
    json j;
    j["format"] = kStoreFormatVersion;
    j["committed"] = m.committed;
    j["ingested"] = m.ingested;
    j["events"] = m.events;
    j["objects"] = m.objects;
    j["omap_postings"] = m.postings;
    j["event_segments"] = json::array();
    for (const auto& s : m.event_segments)
        j["event_segments"].push_back(segment_to_json(s));
    j["object_segments"] = json::array();
    for (const auto& s : m.object_segments)
        j["object_segments"].push_back(segment_to_json(s));
    j["indexes"] = json::object();
    for (const auto& [name, info] : m.indexes)
        j["indexes"][name] = json{{"file", info.file},
                                  {"bytes", info.bytes},
                                  {"crc", info.crc},
                                  {"entries", info.entries},
                                  {"postings", info.postings}};
    j["metadata"] = json{{"version", m.metadata.version},
                         {"ordering", m.metadata.ordering},
                         {"attribute_names", m.metadata.attribute_names},
                         {"object_types", m.metadata.object_types},
                         {"global_event", attrs_to_json(m.metadata.global_event)},
                         {"global_object", attrs_to_json(m.metadata.global_object)}};
    j["recovery"] = m.recovery;
    return j;
}

Manifest manifest_from_json(const json& j) {
    if (j.at("format").get<int>() != kStoreFormatVersion)
        throw CorruptionError("manifest: unknown store format version");
    Manifest m;
    m.committed = j.at("committed").get<bool>();
    m.ingested = j.at("ingested").get<bool>();
    m.events = j.at("events").get<std::uint64_t>();
    m.objects = j.at("objects").get<std::uint64_t>();
    m.postings = j.at("omap_postings").get<std::uint64_t>();
    for (const auto& s : j.at("event_segments"))
        m.event_segments.push_back(segment_from_json(s));
    for (const auto& s : j.at("object_segments"))
        m.object_segments.push_back(segment_from_json(s));
    const json& ix = j.at("indexes");
    for (auto it = ix.begin(); it != ix.end(); ++it) {
        IndexInfo info;
        info.file = it.value().at("file").get<std::string>();
        info.bytes = it.value().at("bytes").get<std::uint64_t>();
        info.crc = it.value().at("crc").get<std::uint32_t>();
        info.entries = it.value().at("entries").get<std::uint64_t>();
        info.postings = it.value().at("postings").get<std::uint64_t>();
        m.indexes[it.key()] = std::move(info);
    }
    const json& md = j.at("metadata");
    m.metadata.version = md.at("version").get<std::string>();
    m.metadata.ordering = md.at("ordering").get<std::string>();
    for (const auto& s : md.at("attribute_names"))
        m.metadata.attribute_names.insert(s.get<std::string>());
    for (const auto& s : md.at("object_types"))
        m.metadata.object_types.insert(s.get<std::string>());
    m.metadata.global_event = attrs_from_json(md.at("global_event"));
    m.metadata.global_object = attrs_from_json(md.at("global_object"));
    if (j.contains("recovery"))
        for (const auto& s : j.at("recovery")) m.recovery.push_back(s.get<std::string>());
    return m;
}

void fsync_dir(const fs::path& dir) {
    const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
    if (fd < 0) return;
    ::fsync(fd);
    ::close(fd);
}

// Durable file write: tmp + fsync + rename + directory fsync.
void write_file_durably(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    std::FILE* f = std::fopen(tmp.c_str(), "wb");
    if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
    const bool ok = std::fwrite(content.data(), 1, content.size(), f) ==
                        content.size() &&
                    std::fflush(f) == 0 && ::fsync(::fileno(f)) == 0;
    std::fclose(f);
    if (!ok) throw IoError("write error on " + tmp.string());
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string());
    fsync_dir(path.parent_path());
}

void write_manifest(const fs::path& root, const Manifest& m) {
    write_file_durably(root / "MANIFEST", manifest_to_json(m).dump(2) + "\n");
}

std::uint32_t crc_of_file(const fs::path& path) {
    auto src = open_file_source(path.string());
    std::uint32_t crc = 0;
    char buf[1 << 16];
    for (;;) {
        const std::size_t got = src->read(buf, sizeof buf);
        if (got == 0) break;
        crc = crc32_extend(crc, std::string_view(buf, got));
    }
    return crc;
}

// --- segment writing ---------------------------------------------------------

class SegmentWriter {
public:
    SegmentWriter(const fs::path& path, std::uint8_t kind) : path_(path) {
        f_ = std::fopen(path.c_str(), "wb");
        if (!f_) throw IoError("cannot open " + path.string() + " for writing");
        char head[kSegHeaderSize];
        std::memcpy(head, kSegMagic, 4);
        head[4] = static_cast<char>(kStoreFormatVersion);
        head[5] = static_cast<char>(kind);
        emit(std::string_view(head, sizeof head));
    }

    ~SegmentWriter() {
        if (f_) std::fclose(f_);
    }

    // Byte offset the next frame will start at.
    std::uint64_t offset() const { return offset_; }
    std::uint64_t records() const { return records_; }

    void append(std::string_view payload, Timestamp ts) {
        scratch_.clear();
        put_varint(scratch_, payload.size());
        emit(scratch_);
        emit(payload);
        const std::uint32_t crc = crc32_of(payload);
        put_fixed32(crc);
        if (records_ == 0 || ts.micros < min_ts_) min_ts_ = ts.micros;
        if (records_ == 0 || ts.micros > max_ts_) max_ts_ = ts.micros;
        ++records_;
    }

    SegmentInfo finish() {
        scratch_.clear();
        put_varint(scratch_, 0);
        std::string stats;
        put_fixed64(stats, records_);
        put_fixed64(stats, static_cast<std::uint64_t>(min_ts_));
        put_fixed64(stats, static_cast<std::uint64_t>(max_ts_));
        emit(scratch_);
        emit(stats);
        put_fixed32(crc32_of(stats));
        if (std::fflush(f_) != 0 || ::fsync(::fileno(f_)) != 0)
            throw IoError("cannot sync " + path_.string());
        std::fclose(f_);
        f_ = nullptr;
        SegmentInfo info;
        info.file = path_.filename().string();
        info.bytes = offset_;
        info.crc = crc_;
        info.records = records_;
        info.min_ts = min_ts_;
        info.max_ts = max_ts_;
        return info;
    }

private:
    void emit(std::string_view bytes) {
        if (std::fwrite(bytes.data(), 1, bytes.size(), f_) != bytes.size())
            throw IoError("write error on " + path_.string());
        crc_ = crc32_extend(crc_, bytes);
        offset_ += bytes.size();
    }

    void put_fixed32(std::uint32_t v) {
        char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff),
                     static_cast<char>((v >> 24) & 0xff)};
        emit(std::string_view(b, 4));
    }

    fs::path path_;
    std::FILE* f_ = nullptr;
    std::string scratch_;
    std::uint64_t offset_ = 0;
    std::uint64_t records_ = 0;
    std::int64_t min_ts_ = 0;
    std::int64_t max_ts_ = 0;
    std::uint32_t crc_ = 0;
};

std::string segment_name(const char* prefix, std::size_t n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s-%03zu.seg", prefix, n);
    return buf;
}

// --- sequential segment reading ----------------------------------------------

class SegmentCursor {
public:
    SegmentCursor(const fs::path& path, std::uint8_t kind,
                  std::atomic<std::uint64_t>* touched)
        : path_(path.string()), touched_(touched),
          src_(open_file_source(path_)), reader_(*src_) {
        char head[kSegHeaderSize];
        if (!reader_.read_exact(head, sizeof head) ||
            std::memcmp(head, kSegMagic, 4) != 0)
            throw CorruptionError(path_ + ": bad segment header");
        if (static_cast<std::uint8_t>(head[4]) != kStoreFormatVersion)
            throw CorruptionError(path_ + ": unknown segment format version");
        if (static_cast<std::uint8_t>(head[5]) != kind)
            throw CorruptionError(path_ + ": unexpected segment kind");
    }

    // Next frame payload; false when the footer is reached. The footer's
    // record count is validated against the frames walked.
    bool next(std::string& payload, std::uint64_t* frame_offset = nullptr) {
        const std::uint64_t at = reader_.offset();
        std::uint64_t len = 0;
        if (!get_varint(reader_, len))
            throw CorruptionError(frame_msg(at, "truncated frame length"));
        if (len == 0) {
            read_footer(at);
            return false;
        }
        if (len > kMaxRecordLen)
            throw CorruptionError(frame_msg(at, "oversized frame"));
        payload.resize(static_cast<std::size_t>(len));
        char crcb[4];
        if (!reader_.read_exact(payload.data(), payload.size()) ||
            !reader_.read_exact(crcb, 4))
            throw CorruptionError(frame_msg(at, "truncated frame"));
        const std::uint32_t want =
            static_cast<std::uint32_t>(static_cast<unsigned char>(crcb[0])) |
            static_cast<std::uint32_t>(static_cast<unsigned char>(crcb[1])) << 8 |
            static_cast<std::uint32_t>(static_cast<unsigned char>(crcb[2])) << 16 |
            static_cast<std::uint32_t>(static_cast<unsigned char>(crcb[3])) << 24;
        if (crc32_of(payload) != want)
            throw CorruptionError(frame_msg(at, "checksum mismatch"));
        ++records_;
        if (touched_) touched_->fetch_add(1, std::memory_order_relaxed);
        if (frame_offset) *frame_offset = at;
        return true;
    }

    std::uint64_t records() const { return records_; }
    std::int64_t footer_min_ts() const { return min_ts_; }
    std::int64_t footer_max_ts() const { return max_ts_; }

private:
    std::string frame_msg(std::uint64_t at, const char* what) const {
        return path_ + " offset " + std::to_string(at) + ": " + what;
    }

    void read_footer(std::uint64_t at) {
        char stats[24];
        char crcb[4];
        if (!reader_.read_exact(stats, sizeof stats) || !reader_.read_exact(crcb, 4))
            throw CorruptionError(frame_msg(at, "truncated footer"));
        const std::uint32_t want =
            static_cast<std::uint32_t>(static_cast<unsigned char>(crcb[0])) |
            static_cast<std::uint32_t>(static_cast<unsigned char>(crcb[1])) << 8 |
            static_cast<std::uint32_t>(static_cast<unsigned char>(crcb[2])) << 16 |
            static_cast<std::uint32_t>(static_cast<unsigned char>(crcb[3])) << 24;
        if (crc32_of(std::string_view(stats, sizeof stats)) != want)
            throw CorruptionError(frame_msg(at, "footer checksum mismatch"));
        std::size_t pos = 0;
        std::uint64_t v = 0;
        get_fixed64(std::string_view(stats, sizeof stats), pos, v);
        if (v != records_)
            throw CorruptionError(frame_msg(at, "footer record count mismatch"));
        get_fixed64(std::string_view(stats, sizeof stats), pos, v);
        min_ts_ = static_cast<std::int64_t>(v);
        get_fixed64(std::string_view(stats, sizeof stats), pos, v);
        max_ts_ = static_cast<std::int64_t>(v);
        if (reader_.get() >= 0)
            throw CorruptionError(path_ + ": data after footer");
    }

    std::string path_;
    std::atomic<std::uint64_t>* touched_;
    std::unique_ptr<ByteSource> src_;
    ByteReader reader_;
    std::uint64_t records_ = 0;
    std::int64_t min_ts_ = 0;
    std::int64_t max_ts_ = 0;
};

} // namespace

// --- store impl ---------------------------------------------------------------

struct Store::Impl {
    fs::path root;
    std::string root_str;
    StoreOptions opts;
    bool read_only = false;
    int lock_fd = -1;
    Manifest man;
    std::vector<std::unique_ptr<RandomAccessFile>> ev_files;
    std::vector<std::unique_ptr<RandomAccessFile>> ob_files;
    std::unordered_map<std::string, std::unique_ptr<SstReader>> ix;
    std::atomic<std::uint64_t> touched{0};
    std::vector<std::string> open_notes;

    ~Impl() {
        if (lock_fd >= 0) ::close(lock_fd);
    }

    fs::path segments_dir() const { return root / "segments"; }
    fs::path index_dir() const { return root / "index"; }

    void acquire_lock() {
        const fs::path lock = root / "LOCK";
        lock_fd = ::open(lock.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
        if (lock_fd < 0) throw IoError("cannot open " + lock.string());
        if (::flock(lock_fd, LOCK_EX | LOCK_NB) != 0) {
            ::close(lock_fd);
            lock_fd = -1;
            throw IoError("store " + root.string() +
                          " is locked by another writer");
        }
    }

    SstReader* index(const char* name) {
        auto it = ix.find(name);
        return it == ix.end() ? nullptr : it->second.get();
    }

    // Opens segment files and index readers per the manifest. Throws if
    // anything is missing or structurally off (callers decide whether that
    // means recovery).
    void load_committed() {
        ev_files.clear();
        ob_files.clear();
        ix.clear();
        for (const auto& s : man.event_segments) {
            auto f = std::make_unique<RandomAccessFile>(
                (segments_dir() / s.file).string());
            if (f->size() != s.bytes)
                throw CorruptionError(s.file + ": size differs from manifest");
            ev_files.push_back(std::move(f));
        }
        for (const auto& s : man.object_segments) {
            auto f = std::make_unique<RandomAccessFile>(
                (segments_dir() / s.file).string());
            if (f->size() != s.bytes)
                throw CorruptionError(s.file + ": size differs from manifest");
            ob_files.push_back(std::move(f));
        }
        for (const auto& [name, kind] : kIndexes) {
            auto it = man.indexes.find(name);
            if (it == man.indexes.end()) continue;
            auto reader = std::make_unique<SstReader>(
                (index_dir() / it->second.file).string(), kind);
            if (reader->file_bytes() != it->second.bytes ||
                reader->crc() != it->second.crc)
                throw CorruptionError(it->second.file +
                                      ": differs from manifest");
            ix.emplace(name, std::move(reader));
        }
    }

    // Reads the frame payload at a record location, CRC-checked.
    std::string read_frame_at(bool event_collection, std::uint64_t loc) {
        const auto& files = event_collection ? ev_files : ob_files;
        const auto& infos = event_collection ? man.event_segments
                                             : man.object_segments;
        const std::uint32_t seg = location_segment(loc);
        const std::uint64_t off = location_offset(loc);
        if (seg >= files.size())
            throw CorruptionError("record location names missing segment " +
                                  std::to_string(seg));
        const std::string name = "segments/" + infos[seg].file;
        RandomAccessFile& f = *files[seg];
        if (off < kSegHeaderSize || off >= f.size())
            throw CorruptionError(name + " offset " + std::to_string(off) +
                                  ": location out of range");
        char head[10];
        const std::size_t got =
            f.read(off, head, std::min<std::uint64_t>(sizeof head, f.size() - off));
        std::size_t pos = 0;
        std::uint64_t len = 0;
        if (!get_varint(std::string_view(head, got), pos, len) || len == 0 ||
            len > kMaxRecordLen)
            throw CorruptionError(name + " offset " + std::to_string(off) +
                                  ": bad frame length");
        std::string buf;
        buf.resize(static_cast<std::size_t>(len) + 4);
        if (f.read(off + pos, buf.data(), buf.size()) != buf.size())
            throw CorruptionError(name + " offset " + std::to_string(off) +
                                  ": truncated frame");
        const std::uint32_t want =
            static_cast<std::uint32_t>(static_cast<unsigned char>(buf[len])) |
            static_cast<std::uint32_t>(static_cast<unsigned char>(buf[len + 1])) << 8 |
            static_cast<std::uint32_t>(static_cast<unsigned char>(buf[len + 2])) << 16 |
            static_cast<std::uint32_t>(static_cast<unsigned char>(buf[len + 3])) << 24;
        buf.resize(static_cast<std::size_t>(len));
        if (crc32_of(buf) != want)
            throw CorruptionError(name + " offset " + std::to_string(off) +
                                  ": checksum mismatch");
        touched.fetch_add(1, std::memory_order_relaxed);
        return buf;
    }

    EventRecord read_event_at(std::uint64_t loc) {
        const std::string payload = read_frame_at(true, loc);
        EventRecord ev;
        if (!decode_event(payload, ev)) {
            const std::uint32_t seg = location_segment(loc);
            throw CorruptionError("segments/" + man.event_segments[seg].file +
                                  " offset " + std::to_string(location_offset(loc)) +
                                  ": undecodable event record");
        }
        return ev;
    }

    ObjectRecord read_object_at(std::uint64_t loc) {
        const std::string payload = read_frame_at(false, loc);
        ObjectRecord ob;
        if (!decode_object(payload, ob)) {
            const std::uint32_t seg = location_segment(loc);
            throw CorruptionError("segments/" + man.object_segments[seg].file +
                                  " offset " + std::to_string(location_offset(loc)) +
                                  ": undecodable object record");
        }
        return ob;
    }

    IngestStats ingest(RecordStream& stream);
    void recover();
    AuditReport audit();
    void remove_store_files();
};

// --- open/create ---------------------------------------------------------------

namespace {

bool manifest_loadable(const fs::path& root, Manifest& out) {
    const fs::path mf = root / "MANIFEST";
    if (!fs::exists(mf)) return false;
    try {
        auto src = open_file_source(mf.string());
        std::string content;
        char buf[1 << 16];
        for (;;) {
            const std::size_t got = src->read(buf, sizeof buf);
            if (got == 0) break;
            content.append(buf, got);
        }
        out = manifest_from_json(json::parse(content));
        return true;
    } catch (const CorruptionError&) {
        throw; // unknown format version is a hard error, not recovery fodder
    } catch (const std::exception&) {
        return false;
    }
}

} // namespace

Store::Store(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
Store::~Store() = default;

std::unique_ptr<Store> Store::create(const std::string& root, StoreOptions options) {
    const fs::path r(root);
    if (fs::exists(r)) {
        if (!fs::is_directory(r) || !fs::is_empty(r))
            throw ConfigError(root + " already exists and is not an empty directory");
    }
    fs::create_directories(r / "segments");
    fs::create_directories(r / "index");
    auto impl = std::make_unique<Impl>();
    impl->root = r;
    impl->root_str = r.string();
    impl->opts = options;
    impl->acquire_lock();
    impl->man.committed = true;
    write_manifest(r, impl->man);
    return std::unique_ptr<Store>(new Store(std::move(impl)));
}

std::unique_ptr<Store> Store::open(const std::string& root, StoreOptions options) {
    const fs::path r(root);
    if (!fs::is_directory(r) || !fs::is_directory(r / "segments"))
        throw IoError(root + " is not a store directory");
    auto impl = std::make_unique<Impl>();
    impl->root = r;
    impl->root_str = r.string();
    impl->opts = options;
    impl->acquire_lock();
    bool healthy = manifest_loadable(r, impl->man) && impl->man.committed;
    if (healthy) {
        try {
            impl->load_committed();
        } catch (const std::exception&) {
            healthy = false;
        }
    }
    if (!healthy) impl->recover();
    return std::unique_ptr<Store>(new Store(std::move(impl)));
}

std::unique_ptr<Store> Store::open_read_only(const std::string& root,
                                             StoreOptions options) {
    const fs::path r(root);
    if (!fs::is_directory(r) || !fs::is_directory(r / "segments"))
        throw IoError(root + " is not a store directory");
    auto impl = std::make_unique<Impl>();
    impl->root = r;
    impl->root_str = r.string();
    impl->opts = options;
    impl->read_only = true;
    if (!manifest_loadable(r, impl->man) || !impl->man.committed)
        throw CorruptionError(root + " needs recovery; open it writable first");
    impl->load_committed(); // throws CorruptionError if state disagrees
    return std::unique_ptr<Store>(new Store(std::move(impl)));
}

// --- ingest ---------------------------------------------------------------------

void Store::Impl::remove_store_files() {
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(segments_dir(), ec))
        if (entry.path().extension() == ".seg") fs::remove(entry.path(), ec);
    for (const auto& entry : fs::directory_iterator(index_dir(), ec))
        if (entry.path().extension() == ".idx") fs::remove(entry.path(), ec);
}

IngestStats Store::Impl::ingest(RecordStream& stream) {
    if (read_only) throw ConfigError("store is read-only");
    if (man.ingested)
        throw ConfigError("store already holds a log (one store, one log)");
    const auto t0 = std::chrono::steady_clock::now();

    LogMetadata meta = stream.metadata();
    std::set<std::string> seen_attrs;
    std::set<std::string> seen_types;

    const fs::path tmp = root / "tmp";
    fs::create_directories(tmp);
    // Leftovers from an interrupted earlier ingest are garbage by
    // construction (the manifest never referenced them).
    remove_store_files();

    IngestStats stats;
    try {
        const std::size_t budget = opts.memory_budget;
        ExternalSorter ev_sort(tmp, "events", budget * 3 / 8);
        ExternalSorter ob_sort(tmp, "objects", budget / 4);
        ExternalSorter ev_ids(tmp, "event-ids", budget / 16);
        ExternalSorter ob_ids(tmp, "object-ids", budget / 16);

        // Pass 1: drain the stream into sorted runs.
        LogRecord rec;
        std::string key;
        std::string payload;
        while (stream.next(rec)) {
            if (std::holds_alternative<EventRecord>(rec)) {
                auto& ev = std::get<EventRecord>(rec);
                if (ev.id.empty()) throw DataError("event with empty id");
                dedup_omap(ev);
                key.clear();
                append_sortable_int64(key, ev.timestamp.micros);
                key.append(ev.id);
                payload.clear();
                encode_event(ev, payload);
                ev_sort.add(key, payload);
                ev_ids.add(ev.id, {});
                for (const auto& [k, v] : ev.vmap) seen_attrs.insert(k);
                ++stats.events;
                stats.postings += ev.omap.size();
            } else {
                auto& ob = std::get<ObjectRecord>(rec);
                if (ob.id.empty()) throw DataError("object with empty id");
                payload.clear();
                encode_object(ob, payload);
                ob_sort.add(ob.id, payload);
                ob_ids.add(ob.id, {});
                seen_types.insert(ob.otype);
                for (const auto& [k, v] : ob.ovmap) seen_attrs.insert(k);
                ++stats.objects;
            }
        }

        // Duplicate-id checks before anything durable is written.
        {
            auto it = ev_ids.finish();
            std::string id;
            std::string unused;
            std::string prev;
            bool first = true;
            while (it->next(id, unused)) {
                if (!first && id == prev)
                    throw DataError("duplicate event id '" + id + "'");
                prev = id;
                first = false;
            }
            it = ob_ids.finish();
            first = true;
            while (it->next(id, unused)) {
                if (!first && id == prev)
                    throw DataError("duplicate object id '" + id + "'");
                prev = id;
                first = false;
            }
        }

        ExternalSorter six_eid(tmp, "ix-event-id", budget / 16);
        ExternalSorter six_act(tmp, "ix-activity", budget / 16);
        ExternalSorter six_omap(tmp, "ix-omap", budget / 8);
        ExternalSorter six_oid(tmp, "ix-object-id", budget / 16);
        ExternalSorter six_otype(tmp, "ix-object-type", budget / 16);

        Manifest next_man;

        // Pass 2: events in (timestamp, id) order into rolling segments,
        // feeding the index sorters with (key -> location).
        {
            std::unique_ptr<SegmentWriter> w;
            auto it = ev_sort.finish();
            std::string loc_key;
            while (it->next(key, payload)) {
                if (w && w->offset() >= kSegmentRollBytes) {
                    next_man.event_segments.push_back(w->finish());
                    w.reset();
                }
                if (!w)
                    w = std::make_unique<SegmentWriter>(
                        segments_dir() /
                            segment_name("events", next_man.event_segments.size()),
                        kEventRecordTag);
                EventRecord ev;
                if (!decode_event(payload, ev))
                    throw CorruptionError("ingest: undecodable staged event");
                const std::uint64_t loc = make_location(
                    static_cast<std::uint32_t>(next_man.event_segments.size()),
                    w->offset());
                w->append(payload, ev.timestamp);
                loc_key.clear();
                put_fixed64_be(loc_key, loc);
                six_eid.add(ev.id, loc_key);
                six_act.add(ev.activity, loc_key);
                for (const auto& oid : ev.omap) six_omap.add(oid, loc_key);
            }
            if (w) next_man.event_segments.push_back(w->finish());
        }

        // Pass 3: objects in id order.
        {
            std::unique_ptr<SegmentWriter> w;
            auto it = ob_sort.finish();
            std::string loc_key;
            while (it->next(key, payload)) {
                if (w && w->offset() >= kSegmentRollBytes) {
                    next_man.object_segments.push_back(w->finish());
                    w.reset();
                }
                if (!w)
                    w = std::make_unique<SegmentWriter>(
                        segments_dir() /
                            segment_name("objects", next_man.object_segments.size()),
                        kObjectRecordTag);
                ObjectRecord ob;
                if (!decode_object(payload, ob))
                    throw CorruptionError("ingest: undecodable staged object");
                const std::uint64_t loc = make_location(
                    static_cast<std::uint32_t>(next_man.object_segments.size()),
                    w->offset());
                w->append(payload, Timestamp{0});
                loc_key.clear();
                put_fixed64_be(loc_key, loc);
                six_oid.add(ob.id, loc_key);
                six_otype.add(ob.otype, loc_key);
            }
            if (w) next_man.object_segments.push_back(w->finish());
        }

        // Pass 4: build the five indexes from the sorted (key, location)
        // streams. Segments are already durable (fsynced on finish).
        ExternalSorter* sorters[] = {&six_eid, &six_act, &six_omap, &six_oid,
                                     &six_otype};
        const bool unique[] = {true, false, false, true, false};
        for (std::size_t i = 0; i < 5; ++i) {
            const std::string file = std::string(kIndexes[i].name) + ".idx";
            SstWriter w((index_dir() / file).string(), kIndexes[i].kind);
            auto it = sorters[i]->finish();
            std::string cur_key;
            std::vector<std::uint64_t> postings;
            std::string k;
            std::string v;
            bool have = false;
            auto flush_key = [&] {
                if (have) w.add(cur_key, postings);
                postings.clear();
            };
            while (it->next(k, v)) {
                if (!have || k != cur_key) {
                    flush_key();
                    cur_key = k;
                    have = true;
                } else if (unique[i]) {
                    throw CorruptionError("duplicate key in unique index " + file);
                }
                postings.push_back(read_fixed64_be(v));
            }
            flush_key();
            const auto totals = w.finish();
            // Index files need no fsync-before-manifest ordering beyond
            // what write_manifest provides, but sync them for good measure.
            IndexInfo info;
            info.file = file;
            info.bytes = totals.file_bytes;
            info.crc = totals.crc;
            info.entries = totals.entry_count;
            info.postings = totals.postings_total;
            next_man.indexes[kIndexes[i].name] = info;
        }

        // Commit.
        meta.attribute_names.insert(seen_attrs.begin(), seen_attrs.end());
        meta.object_types.insert(seen_types.begin(), seen_types.end());
        next_man.committed = true;
        next_man.ingested = true;
        next_man.events = stats.events;
        next_man.objects = stats.objects;
        next_man.postings = stats.postings;
        next_man.metadata = std::move(meta);
        write_manifest(root, next_man);
        man = std::move(next_man);
        load_committed();
    } catch (...) {
        // Nothing was committed; drop partial files so the store stays at
        // its last consistent (empty) state.
        remove_store_files();
        std::error_code ec;
        fs::remove_all(tmp, ec);
        throw;
    }
    std::error_code ec;
    fs::remove_all(tmp, ec);

    for (const auto& s : man.event_segments) stats.segment_bytes += s.bytes;
    for (const auto& s : man.object_segments) stats.segment_bytes += s.bytes;
    for (const auto& [n, info] : man.indexes) stats.index_bytes += info.bytes;
    stats.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    return stats;
}

// --- recovery --------------------------------------------------------------------

namespace {

struct RepairResult {
    bool keep = false;        // file survived with >= 1 record
    SegmentInfo info;         // recomputed stats
    std::uint64_t discarded = 0;
};

// Walks one segment file leniently, truncating any invalid tail and
// rewriting the footer. Returns the surviving shape.
RepairResult repair_segment(const fs::path& path, std::uint8_t kind,
                            std::vector<std::string>& notes) {
    const std::string rel = "segments/" + path.filename().string();
    const std::uint64_t file_size = fs::file_size(path);
    RepairResult r;
    std::uint64_t valid_end = 0;
    std::uint64_t records = 0;
    std::int64_t min_ts = 0;
    std::int64_t max_ts = 0;
    bool clean_footer = false;
    try {
        auto src = open_file_source(path.string());
        ByteReader reader(*src);
        char head[kSegHeaderSize];
        if (!reader.read_exact(head, sizeof head) ||
            std::memcmp(head, kSegMagic, 4) != 0 ||
            static_cast<std::uint8_t>(head[4]) != kStoreFormatVersion ||
            static_cast<std::uint8_t>(head[5]) != kind) {
            notes.push_back(rel + ": invalid header, file dropped");
            fs::remove(path);
            return r;
        }
        valid_end = kSegHeaderSize;
        std::string payload;
        for (;;) {
            const std::uint64_t at = reader.offset();
            std::uint64_t len = 0;
            if (!get_varint(reader, len)) break; // truncated tail
            if (len == 0) {
                char stats[24];
                char crcb[4];
                if (!reader.read_exact(stats, sizeof stats) ||
                    !reader.read_exact(crcb, 4))
                    break;
                const std::uint32_t want =
                    static_cast<std::uint32_t>(static_cast<unsigned char>(crcb[0])) |
                    static_cast<std::uint32_t>(static_cast<unsigned char>(crcb[1])) << 8 |
                    static_cast<std::uint32_t>(static_cast<unsigned char>(crcb[2])) << 16 |
                    static_cast<std::uint32_t>(static_cast<unsigned char>(crcb[3])) << 24;
                std::size_t pos = 0;
                std::uint64_t cnt = 0;
                get_fixed64(std::string_view(stats, sizeof stats), pos, cnt);
                if (crc32_of(std::string_view(stats, sizeof stats)) == want &&
                    cnt == records && reader.offset() == file_size) {
                    clean_footer = true;
                }
                break; // with or without a clean footer, frames end here
            }
            if (len > kMaxRecordLen) break;
            payload.resize(static_cast<std::size_t>(len));
            char crcb[4];
            if (!reader.read_exact(payload.data(), payload.size()) ||
                !reader.read_exact(crcb, 4))
                break;
            const std::uint32_t want =
                static_cast<std::uint32_t>(static_cast<unsigned char>(crcb[0])) |
                static_cast<std::uint32_t>(static_cast<unsigned char>(crcb[1])) << 8 |
                static_cast<std::uint32_t>(static_cast<unsigned char>(crcb[2])) << 16 |
                static_cast<std::uint32_t>(static_cast<unsigned char>(crcb[3])) << 24;
            if (crc32_of(payload) != want) break;
            // Frames must decode as the right record kind to count.
            Timestamp ts{0};
            if (kind == kEventRecordTag) {
                EventRecord ev;
                if (!decode_event(payload, ev)) break;
                ts = ev.timestamp;
            } else {
                ObjectRecord ob;
                if (!decode_object(payload, ob)) break;
            }
            if (records == 0 || ts.micros < min_ts) min_ts = ts.micros;
            if (records == 0 || ts.micros > max_ts) max_ts = ts.micros;
            ++records;
            valid_end = at + varint_size(len) + len + 4;
        }
    } catch (const IoError&) {
        // Fall through with whatever prefix validated.
    }
    if (records == 0) {
        notes.push_back(rel + ": no valid records, file dropped");
        fs::remove(path);
        return r;
    }
    if (!clean_footer) {
        const std::uint64_t discarded = file_size - valid_end;
        if (::truncate(path.c_str(), static_cast<off_t>(valid_end)) != 0)
            throw IoError("cannot truncate " + path.string());
        std::FILE* f = std::fopen(path.c_str(), "ab");
        if (!f) throw IoError("cannot reopen " + path.string());
        std::string tail;
        put_varint(tail, 0);
        std::string stats;
        put_fixed64(stats, records);
        put_fixed64(stats, static_cast<std::uint64_t>(min_ts));
        put_fixed64(stats, static_cast<std::uint64_t>(max_ts));
        tail.append(stats);
        const std::uint32_t crc = crc32_of(stats);
        tail.push_back(static_cast<char>(crc & 0xff));
        tail.push_back(static_cast<char>((crc >> 8) & 0xff));
        tail.push_back(static_cast<char>((crc >> 16) & 0xff));
        tail.push_back(static_cast<char>((crc >> 24) & 0xff));
        const bool ok = std::fwrite(tail.data(), 1, tail.size(), f) == tail.size() &&
                        std::fflush(f) == 0 && ::fsync(::fileno(f)) == 0;
        std::fclose(f);
        if (!ok) throw IoError("cannot rewrite footer of " + path.string());
        notes.push_back(rel + ": discarded " + std::to_string(discarded) +
                        " trailing bytes during recovery");
    }
    r.keep = true;
    r.info.file = path.filename().string();
    r.info.bytes = fs::file_size(path);
    r.info.crc = crc_of_file(path);
    r.info.records = records;
    r.info.min_ts = min_ts;
    r.info.max_ts = max_ts;
    return r;
}

std::vector<fs::path> list_segments(const fs::path& dir, const char* prefix) {
    std::vector<std::pair<unsigned long, fs::path>> found;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        const std::string name = entry.path().filename().string();
        if (entry.path().extension() != ".seg") continue;
        const std::string want = std::string(prefix) + "-";
        if (name.rfind(want, 0) != 0) continue;
        found.emplace_back(std::strtoul(name.c_str() + want.size(), nullptr, 10),
                           entry.path());
    }
    std::sort(found.begin(), found.end());
    std::vector<fs::path> out;
    out.reserve(found.size());
    for (auto& [n, p] : found) out.push_back(std::move(p));
    return out;
}

} // namespace

void Store::Impl::recover() {
    std::vector<std::string> notes;
    // Salvage what the old manifest can still tell us.
    Manifest salvaged;
    const bool had_manifest = manifest_loadable(root, salvaged);
    LogMetadata meta = had_manifest ? salvaged.metadata : LogMetadata{};

    fs::create_directories(index_dir());
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(index_dir(), ec))
        if (entry.path().extension() == ".idx") fs::remove(entry.path(), ec);

    // Repair segments file by file.
    std::vector<SegmentInfo> ev_segs;
    std::vector<SegmentInfo> ob_segs;
    for (const auto& p : list_segments(segments_dir(), "events")) {
        auto r = repair_segment(p, kEventRecordTag, notes);
        if (r.keep) ev_segs.push_back(std::move(r.info));
    }
    for (const auto& p : list_segments(segments_dir(), "objects")) {
        auto r = repair_segment(p, kObjectRecordTag, notes);
        if (r.keep) ob_segs.push_back(std::move(r.info));
    }

    // Events must read back in global (timestamp, id) order; a violation
    // means independent tail damage. Everything from the first out-of-order
    // record on is dropped — the verified prefix is ordered by construction,
    // so one pass settles it.
    {
        bool order_broken = false;
        Timestamp prev_ts{0};
        std::string prev_id;
        bool have_prev = false;
        std::string payload;
        for (std::size_t s = 0; s < ev_segs.size() && !order_broken; ++s) {
            SegmentCursor cur(segments_dir() / ev_segs[s].file, kEventRecordTag,
                              nullptr);
            std::uint64_t at = 0;
            while (cur.next(payload, &at)) {
                EventRecord ev;
                decode_event(payload, ev); // validated during repair
                if (have_prev && (ev.timestamp < prev_ts ||
                                  (ev.timestamp == prev_ts && ev.id <= prev_id))) {
                    notes.push_back("segments/" + ev_segs[s].file +
                                    ": out-of-order record at offset " +
                                    std::to_string(at) +
                                    "; it and all later event records dropped");
                    order_broken = true;
                    const fs::path p = segments_dir() / ev_segs[s].file;
                    if (::truncate(p.c_str(), static_cast<off_t>(at)) != 0)
                        throw IoError("cannot truncate " + p.string());
                    auto rr = repair_segment(p, kEventRecordTag, notes);
                    for (std::size_t d = s + 1; d < ev_segs.size(); ++d)
                        fs::remove(segments_dir() / ev_segs[d].file, ec);
                    ev_segs.resize(s);
                    if (rr.keep) ev_segs.push_back(std::move(rr.info));
                    break;
                }
                prev_ts = ev.timestamp;
                prev_id = ev.id;
                have_prev = true;
            }
        }
    }

    const fs::path tmp = root / "tmp";
    fs::remove_all(tmp, ec);
    fs::create_directories(tmp);

    // Rebuild all five indexes by walking the surviving records.
    Manifest next;

    const std::size_t budget = opts.memory_budget;
    ExternalSorter six_eid(tmp, "ix-event-id", budget / 8);
    ExternalSorter six_act(tmp, "ix-activity", budget / 8);
    ExternalSorter six_omap(tmp, "ix-omap", budget / 4);
    ExternalSorter six_oid(tmp, "ix-object-id", budget / 8);
    ExternalSorter six_otype(tmp, "ix-object-type", budget / 8);
    std::set<std::string> seen_attrs;
    std::set<std::string> seen_types;

    std::string loc_key;
    std::string payload;
    std::uint64_t n_events = 0;
    std::uint64_t n_postings = 0;
    for (std::size_t s = 0; s < ev_segs.size(); ++s) {
        SegmentCursor cur(segments_dir() / ev_segs[s].file, kEventRecordTag,
                          nullptr);
        std::uint64_t at = 0;
        while (cur.next(payload, &at)) {
            EventRecord ev;
            decode_event(payload, ev);
            const std::uint64_t loc =
                make_location(static_cast<std::uint32_t>(s), at);
            loc_key.clear();
            put_fixed64_be(loc_key, loc);
            six_eid.add(ev.id, loc_key);
            six_act.add(ev.activity, loc_key);
            for (const auto& oid : ev.omap) six_omap.add(oid, loc_key);
            for (const auto& [k, v] : ev.vmap) seen_attrs.insert(k);
            ++n_events;
            n_postings += ev.omap.size();
        }
    }
    std::uint64_t n_objects = 0;
    for (std::size_t s = 0; s < ob_segs.size(); ++s) {
        SegmentCursor cur(segments_dir() / ob_segs[s].file, kObjectRecordTag,
                          nullptr);
        std::uint64_t at = 0;
        while (cur.next(payload, &at)) {
            ObjectRecord ob;
            decode_object(payload, ob);
            const std::uint64_t loc =
                make_location(static_cast<std::uint32_t>(s), at);
            loc_key.clear();
            put_fixed64_be(loc_key, loc);
            six_oid.add(ob.id, loc_key);
            six_otype.add(ob.otype, loc_key);
            seen_types.insert(ob.otype);
            for (const auto& [k, v] : ob.ovmap) seen_attrs.insert(k);
            ++n_objects;
        }
    }

    ExternalSorter* sorters[] = {&six_eid, &six_act, &six_omap, &six_oid,
                                 &six_otype};
    const bool unique[] = {true, false, false, true, false};
    for (std::size_t i = 0; i < 5; ++i) {
        const std::string file = std::string(kIndexes[i].name) + ".idx";
        SstWriter w((index_dir() / file).string(), kIndexes[i].kind);
        auto it = sorters[i]->finish();
        std::string cur_key;
        std::vector<std::uint64_t> postings;
        std::string k;
        std::string v;
        bool have = false;
        auto flush_key = [&] {
            if (have) w.add(cur_key, postings);
            postings.clear();
        };
        while (it->next(k, v)) {
            if (!have || k != cur_key) {
                flush_key();
                cur_key = k;
                have = true;
            } else if (unique[i]) {
                throw CorruptionError("duplicate key '" + k +
                                      "' found while rebuilding " + file);
            }
            postings.push_back(read_fixed64_be(v));
        }
        flush_key();
        const auto totals = w.finish();
        IndexInfo info;
        info.file = file;
        info.bytes = totals.file_bytes;
        info.crc = totals.crc;
        info.entries = totals.entry_count;
        info.postings = totals.postings_total;
        next.indexes[kIndexes[i].name] = info;
    }
    fs::remove_all(tmp, ec);

    meta.attribute_names.insert(seen_attrs.begin(), seen_attrs.end());
    meta.object_types.insert(seen_types.begin(), seen_types.end());
    next.committed = true;
    next.ingested = (had_manifest && salvaged.ingested) || n_events > 0 ||
                    n_objects > 0;
    next.events = n_events;
    next.objects = n_objects;
    next.postings = n_postings;
    next.event_segments = std::move(ev_segs);
    next.object_segments = std::move(ob_segs);
    next.metadata = std::move(meta);
    next.recovery = notes;
    write_manifest(root, next);
    man = std::move(next);
    open_notes = notes;
    load_committed();
}

// --- queries -------------------------------------------------------------------

std::optional<EventRecord> Store::get_event(const std::string& id) {
    SstReader* ix = impl_->index("event_id");
    if (!ix) return std::nullopt;
    const auto postings = ix->lookup(id);
    if (postings.empty()) return std::nullopt;
    return impl_->read_event_at(postings.front());
}

std::optional<ObjectRecord> Store::get_object(const std::string& id) {
    SstReader* ix = impl_->index("object_id");
    if (!ix) return std::nullopt;
    const auto postings = ix->lookup(id);
    if (postings.empty()) return std::nullopt;
    return impl_->read_object_at(postings.front());
}

std::optional<std::string> Store::object_type_of(const std::string& id) {
    auto ob = get_object(id);
    if (!ob) return std::nullopt;
    return std::move(ob->otype);
}

// --- scans --------------------------------------------------------------------

struct EventScan::Impl {
    Store::Impl* store = nullptr;
    std::vector<std::uint64_t> locations;
    std::size_t pos = 0;
    bool walk_all = false;
    std::size_t seg = 0;
    std::unique_ptr<SegmentCursor> cursor;
    std::uint64_t total = 0;
};

EventScan::EventScan(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
EventScan::EventScan(EventScan&&) noexcept = default;
EventScan& EventScan::operator=(EventScan&&) noexcept = default;
EventScan::~EventScan() = default;

std::uint64_t EventScan::matches() const { return impl_->total; }

bool EventScan::next(EventRecord& out) {
    Store::Impl* st = impl_->store;
    if (!impl_->walk_all) {
        if (impl_->pos >= impl_->locations.size()) return false;
        out = st->read_event_at(impl_->locations[impl_->pos++]);
        return true;
    }
    std::string payload;
    for (;;) {
        if (!impl_->cursor) {
            if (impl_->seg >= st->man.event_segments.size()) return false;
            impl_->cursor = std::make_unique<SegmentCursor>(
                st->segments_dir() / st->man.event_segments[impl_->seg].file,
                kEventRecordTag, &st->touched);
        }
        if (impl_->cursor->next(payload)) {
            if (!decode_event(payload, out))
                throw CorruptionError("segments/" +
                                      st->man.event_segments[impl_->seg].file +
                                      ": undecodable event record");
            return true;
        }
        impl_->cursor.reset();
        ++impl_->seg;
    }
}

struct ObjectScan::Impl {
    Store::Impl* store = nullptr;
    std::vector<std::uint64_t> locations;
    std::size_t pos = 0;
    bool walk_all = false;
    std::size_t seg = 0;
    std::unique_ptr<SegmentCursor> cursor;
    std::uint64_t total = 0;
};

ObjectScan::ObjectScan(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
ObjectScan::ObjectScan(ObjectScan&&) noexcept = default;
ObjectScan& ObjectScan::operator=(ObjectScan&&) noexcept = default;
ObjectScan::~ObjectScan() = default;

std::uint64_t ObjectScan::matches() const { return impl_->total; }

bool ObjectScan::next(ObjectRecord& out) {
    Store::Impl* st = impl_->store;
    if (!impl_->walk_all) {
        if (impl_->pos >= impl_->locations.size()) return false;
        out = st->read_object_at(impl_->locations[impl_->pos++]);
        return true;
    }
    std::string payload;
    for (;;) {
        if (!impl_->cursor) {
            if (impl_->seg >= st->man.object_segments.size()) return false;
            impl_->cursor = std::make_unique<SegmentCursor>(
                st->segments_dir() / st->man.object_segments[impl_->seg].file,
                kObjectRecordTag, &st->touched);
        }
        if (impl_->cursor->next(payload)) {
            if (!decode_object(payload, out))
                throw CorruptionError("segments/" +
                                      st->man.object_segments[impl_->seg].file +
                                      ": undecodable object record");
            return true;
        }
        impl_->cursor.reset();
        ++impl_->seg;
    }
}

EventScan Store::scan_events_by_activity(const std::string& activity) {
    auto impl = std::make_unique<EventScan::Impl>();
    impl->store = impl_.get();
    if (SstReader* ix = impl_->index("activity"))
        impl->locations = ix->lookup(activity);
    impl->total = impl->locations.size();
    return EventScan(std::move(impl));
}

EventScan Store::scan_events_by_object(const std::string& object_id) {
    auto impl = std::make_unique<EventScan::Impl>();
    impl->store = impl_.get();
    if (SstReader* ix = impl_->index("omap"))
        impl->locations = ix->lookup(object_id);
    impl->total = impl->locations.size();
    return EventScan(std::move(impl));
}

ObjectScan Store::scan_objects_by_type(const std::string& otype) {
    auto impl = std::make_unique<ObjectScan::Impl>();
    impl->store = impl_.get();
    if (SstReader* ix = impl_->index("object_type"))
        impl->locations = ix->lookup(otype);
    impl->total = impl->locations.size();
    return ObjectScan(std::move(impl));
}

void Store::for_each_referenced_object_id(
    const std::function<void(std::string_view id, std::uint64_t refs)>& fn) {
    if (SstReader* ix = impl_->index("omap"))
        ix->scan([&](std::string_view key,
                     const std::vector<std::uint64_t>& postings) {
            fn(key, postings.size());
        });
}

EventScan Store::scan_all_events() {
    auto impl = std::make_unique<EventScan::Impl>();
    impl->store = impl_.get();
    impl->walk_all = true;
    impl->total = impl_->man.events;
    return EventScan(std::move(impl));
}

ObjectScan Store::scan_all_objects() {
    auto impl = std::make_unique<ObjectScan::Impl>();
    impl->store = impl_.get();
    impl->walk_all = true;
    impl->total = impl_->man.objects;
    return ObjectScan(std::move(impl));
}

// --- export --------------------------------------------------------------------

namespace {

class ExportStream final : public RecordStream {
public:
    ExportStream(ObjectScan objects, EventScan events, const LogMetadata& meta)
        : meta_(meta), objects_(std::move(objects)), events_(std::move(events)) {}

    const LogMetadata& metadata() override { return meta_; }

    bool next(LogRecord& out) override {
        if (!objects_done_) {
            ObjectRecord ob;
            if (objects_.next(ob)) {
                out = std::move(ob);
                return true;
            }
            objects_done_ = true;
        }
        EventRecord ev;
        if (events_.next(ev)) {
            out = std::move(ev);
            return true;
        }
        return false;
    }

private:
    LogMetadata meta_;
    ObjectScan objects_;
    EventScan events_;
    bool objects_done_ = false;
};

} // namespace

std::unique_ptr<RecordStream> Store::export_stream() {
    return std::make_unique<ExportStream>(scan_all_objects(), scan_all_events(),
                                          impl_->man.metadata);
}

// --- audit ---------------------------------------------------------------------

AuditReport Store::Impl::audit() {
    AuditReport report;
    report.notes = man.recovery;
    auto violation = [&](std::string msg) {
        report.violations.push_back(std::move(msg));
    };

    // Expected shapes, from walking every segment.
    std::uint64_t n_events = 0;
    std::uint64_t n_objects = 0;
    std::uint64_t n_postings = 0;
    std::unordered_map<std::string, std::uint64_t> per_activity;
    std::unordered_map<std::string, std::uint64_t> per_omap_id;
    std::unordered_map<std::string, std::uint64_t> per_otype;

    {
        Timestamp prev_ts{0};
        std::string prev_id;
        bool have_prev = false;
        for (const auto& seg : man.event_segments) {
            try {
                SegmentCursor cur(segments_dir() / seg.file, kEventRecordTag,
                                  &touched);
                std::string payload;
                while (cur.next(payload)) {
                    EventRecord ev;
                    if (!decode_event(payload, ev)) {
                        violation("segments/" + seg.file +
                                  ": undecodable event record");
                        continue;
                    }
                    if (have_prev &&
                        (ev.timestamp < prev_ts ||
                         (ev.timestamp == prev_ts && ev.id <= prev_id)))
                        violation("segments/" + seg.file + ": event " + ev.id +
                                  " out of (timestamp, id) order");
                    prev_ts = ev.timestamp;
                    prev_id = ev.id;
                    have_prev = true;
                    ++n_events;
                    ++per_activity[ev.activity];
                    for (const auto& oid : ev.omap) {
                        ++per_omap_id[oid];
                        ++n_postings;
                    }
                }
                if (cur.records() != seg.records)
                    violation("segments/" + seg.file +
                              ": record count differs from manifest");
            } catch (const std::exception& e) {
                violation(e.what());
            }
        }
        for (const auto& seg : man.object_segments) {
            try {
                SegmentCursor cur(segments_dir() / seg.file, kObjectRecordTag,
                                  &touched);
                std::string payload;
                std::string prev;
                bool first = true;
                while (cur.next(payload)) {
                    ObjectRecord ob;
                    if (!decode_object(payload, ob)) {
                        violation("segments/" + seg.file +
                                  ": undecodable object record");
                        continue;
                    }
                    if (!first && ob.id <= prev)
                        violation("segments/" + seg.file + ": object " + ob.id +
                                  " out of id order");
                    prev = ob.id;
                    first = false;
                    ++n_objects;
                    ++per_otype[ob.otype];
                }
                if (cur.records() != seg.records)
                    violation("segments/" + seg.file +
                              ": record count differs from manifest");
            } catch (const std::exception& e) {
                violation(e.what());
            }
        }
    }

    if (n_events != man.events)
        violation("manifest: event count " + std::to_string(man.events) +
                  " but segments hold " + std::to_string(n_events));
    if (n_objects != man.objects)
        violation("manifest: object count " + std::to_string(man.objects) +
                  " but segments hold " + std::to_string(n_objects));
    if (n_postings != man.postings)
        violation("manifest: omap posting count " + std::to_string(man.postings) +
                  " but segments hold " + std::to_string(n_postings));

    if (!man.ingested && man.indexes.empty()) return report;

    // Per-index checks: key/posting counts against the walked shapes, every
    // posting resolving to a record carrying that key, unique indexes with
    // exactly one posting per key.
    struct Check {
        const char* name;
        IndexKind kind;
        bool unique;
        bool on_events;
    };
    const Check checks[] = {
        {"event_id", IndexKind::EventId, true, true},
        {"activity", IndexKind::Activity, false, true},
        {"omap", IndexKind::Omap, false, true},
        {"object_id", IndexKind::ObjectId, true, false},
        {"object_type", IndexKind::ObjectType, false, false},
    };
    for (const auto& check : checks) {
        const auto it = man.indexes.find(check.name);
        if (it == man.indexes.end()) {
            violation(std::string("index ") + check.name + ".idx missing");
            continue;
        }
        const std::string rel = "index/" + it->second.file;
        try {
            SstReader reader((index_dir() / it->second.file).string(), check.kind);
            if (!reader.verify_checksum())
                violation(rel + ": checksum mismatch");
            std::uint64_t keys = 0;
            std::uint64_t postings_seen = 0;
            // Copy of the expected per-key counts; entries are erased as
            // they are matched so leftovers are "missing from index".
            const std::string_view name(check.name);
            std::unordered_map<std::string, std::uint64_t> expected;
            const bool per_key_counts =
                name == "activity" || name == "omap" || name == "object_type";
            if (name == "activity") expected = per_activity;
            if (name == "omap") expected = per_omap_id;
            if (name == "object_type") expected = per_otype;
            reader.scan([&](std::string_view key,
                            const std::vector<std::uint64_t>& postings) {
                ++keys;
                postings_seen += postings.size();
                if (check.unique && postings.size() != 1)
                    violation(rel + ": key \"" + std::string(key) + "\" has " +
                              std::to_string(postings.size()) +
                              " postings in a unique index");
                std::uint64_t prev = 0;
                bool first = true;
                for (const std::uint64_t loc : postings) {
                    if (!first && loc <= prev)
                        violation(rel + ": postings for key \"" + std::string(key) +
                                  "\" not ascending");
                    prev = loc;
                    first = false;
                    try {
                        if (check.on_events) {
                            const EventRecord ev = read_event_at(loc);
                            const bool match =
                                (std::string_view(check.name) == "event_id" &&
                                 ev.id == key) ||
                                (std::string_view(check.name) == "activity" &&
                                 ev.activity == key) ||
                                (std::string_view(check.name) == "omap" &&
                                 std::find(ev.omap.begin(), ev.omap.end(), key) !=
                                     ev.omap.end());
                            if (!match)
                                violation(rel + ": posting for key \"" +
                                          std::string(key) +
                                          "\" points at event " + ev.id +
                                          " which does not carry it");
                        } else {
                            const ObjectRecord ob = read_object_at(loc);
                            const bool match =
                                (std::string_view(check.name) == "object_id" &&
                                 ob.id == key) ||
                                (std::string_view(check.name) == "object_type" &&
                                 ob.otype == key);
                            if (!match)
                                violation(rel + ": posting for key \"" +
                                          std::string(key) +
                                          "\" points at object " + ob.id +
                                          " which does not carry it");
                        }
                    } catch (const std::exception& e) {
                        violation(std::string(e.what()));
                    }
                }
                if (per_key_counts) {
                    auto eit = expected.find(std::string(key));
                    if (eit == expected.end()) {
                        violation(rel + ": key \"" + std::string(key) +
                                  "\" not present in segments");
                    } else {
                        if (postings.size() < eit->second)
                            violation(rel + ": key \"" + std::string(key) +
                                      "\" missing " +
                                      std::to_string(eit->second - postings.size()) +
                                      " posting(s): index has " +
                                      std::to_string(postings.size()) +
                                      ", segments contain " +
                                      std::to_string(eit->second));
                        else if (postings.size() > eit->second)
                            violation(rel + ": key \"" + std::string(key) +
                                      "\" has " +
                                      std::to_string(postings.size() - eit->second) +
                                      " extra posting(s)");
                        expected.erase(eit);
                    }
                }
            });
            for (const auto& [key, count] : expected)
                violation(rel + ": key \"" + key + "\" missing from index (" +
                          std::to_string(count) + " postings expected)");
            if (check.unique) {
                const std::uint64_t want = check.on_events ? n_events : n_objects;
                if (keys != want)
                    violation(rel + ": " + std::to_string(keys) + " keys for " +
                              std::to_string(want) + " records");
            }
            if (std::string_view(check.name) == "omap" &&
                postings_seen != n_postings)
                violation(rel + ": " + std::to_string(postings_seen) +
                          " postings, segments contain " +
                          std::to_string(n_postings) + " omap memberships");
        } catch (const std::exception& e) {
            violation(e.what());
        }
    }
    return report;
}

// --- forwarding ------------------------------------------------------------------

IngestStats Store::ingest(RecordStream& stream) { return impl_->ingest(stream); }
AuditReport Store::audit() { return impl_->audit(); }
const LogMetadata& Store::metadata() const { return impl_->man.metadata; }
std::uint64_t Store::event_count() const { return impl_->man.events; }
std::uint64_t Store::object_count() const { return impl_->man.objects; }
std::uint64_t Store::posting_count() const { return impl_->man.postings; }

std::uint64_t Store::segment_bytes() const {
    std::uint64_t total = 0;
    for (const auto& s : impl_->man.event_segments) total += s.bytes;
    for (const auto& s : impl_->man.object_segments) total += s.bytes;
    return total;
}

std::uint64_t Store::index_bytes() const {
    std::uint64_t total = 0;
    for (const auto& [n, info] : impl_->man.indexes) total += info.bytes;
    return total;
}

std::uint64_t Store::records_touched() const {
    return impl_->touched.load(std::memory_order_relaxed);
}
void Store::reset_records_touched() {
    impl_->touched.store(0, std::memory_order_relaxed);
}

std::size_t Store::memory_budget() const { return impl_->opts.memory_budget; }

const std::string& Store::root() const { return impl_->root_str; }

bool Store::read_only() const { return impl_->read_only; }

const std::vector<std::string>& Store::recovery_notes() const {
    return impl_->open_notes;
}

} // namespace ocel
