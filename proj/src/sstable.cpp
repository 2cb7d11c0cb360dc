#include "ocel/sstable.hpp"

#include <algorithm>
#include <utility>

#include "ocel/errors.hpp"

namespace ocel {

namespace {

constexpr char kMagic[4] = {'O', 'C', 'I', 'X'};
constexpr std::size_t kHeaderSize = 6;  // magic + version + kind
constexpr std::size_t kFooterSize = 32; // 3x fixed64 + crc + end magic
constexpr std::size_t kDirectoryStride = 64;

[[noreturn]] void corrupt(const std::string& path, const std::string& what) {
    throw CorruptionError("index " + path + ": " + what);
}

} // namespace

SstWriter::SstWriter(const std::string& path, IndexKind kind)
    : path_(path), kind_(kind), sink_(open_file_sink(path)) {
    std::string head(kMagic, sizeof kMagic);
    head.push_back(static_cast<char>(kIndexFormatVersion));
    head.push_back(static_cast<char>(kind_));
    emit(head);
}

SstWriter::~SstWriter() = default;

void SstWriter::emit(std::string_view bytes) {
    crc_ = crc32_extend(crc_, bytes);
    sink_->write(bytes.data(), bytes.size());
    offset_ += bytes.size();
}

void SstWriter::add(std::string_view key,
                    const std::vector<std::uint64_t>& postings) {
    if (finished_) throw IoError("index " + path_ + ": add after finish");
    if (entry_count_ > 0 && key <= last_key_)
        throw IoError("index " + path_ + ": keys not strictly ascending");
    if (postings.empty())
        throw IoError("index " + path_ + ": empty postings for key");
    if (entry_count_ % kDirectoryStride == 0)
        directory_.emplace_back(std::string(key), offset_);
    buf_.clear();
    put_varint(buf_, key.size());
    buf_.append(key);
    put_varint(buf_, postings.size());
    std::uint64_t prev = 0;
    for (std::size_t i = 0; i < postings.size(); ++i) {
        if (i > 0 && postings[i] <= prev)
            throw IoError("index " + path_ + ": postings not strictly ascending");
        put_varint(buf_, i == 0 ? postings[0] : postings[i] - prev);
        prev = postings[i];
    }
    emit(buf_);
    last_key_.assign(key);
    ++entry_count_;
    postings_total_ += postings.size();
}

SstWriter::Totals SstWriter::finish() {
    if (finished_) throw IoError("index " + path_ + ": finish called twice");
    finished_ = true;
    const std::uint64_t dir_offset = offset_;
    buf_.clear();
    for (const auto& [key, entry_offset] : directory_) {
        put_varint(buf_, key.size());
        buf_.append(key);
        put_varint(buf_, entry_offset);
    }
    put_fixed64(buf_, dir_offset);
    put_fixed64(buf_, entry_count_);
    put_fixed64(buf_, postings_total_);
    emit(buf_);
    // The CRC covers everything before itself.
    const std::uint32_t body_crc = crc_;
    std::string tail;
    tail.push_back(static_cast<char>(body_crc & 0xff));
    tail.push_back(static_cast<char>((body_crc >> 8) & 0xff));
    tail.push_back(static_cast<char>((body_crc >> 16) & 0xff));
    tail.push_back(static_cast<char>((body_crc >> 24) & 0xff));
    tail.append(kMagic, sizeof kMagic);
    emit(tail);
    sink_->flush();
    return Totals{offset_, entry_count_, postings_total_, body_crc};
}

SstReader::SstReader(const std::string& path, IndexKind kind)
    : file_(path), kind_(kind) {
    if (file_.size() < kHeaderSize + kFooterSize)
        corrupt(path, "file too small");
    const std::string head = file_.read_exactly(0, kHeaderSize);
    if (head.compare(0, 4, kMagic, 4) != 0) corrupt(path, "bad magic");
    if (static_cast<std::uint8_t>(head[4]) != kIndexFormatVersion)
        corrupt(path, "unknown format version");
    if (static_cast<std::uint8_t>(head[5]) != static_cast<std::uint8_t>(kind))
        corrupt(path, "unexpected index kind");
    const std::string foot =
        file_.read_exactly(file_.size() - kFooterSize, kFooterSize);
    if (foot.compare(kFooterSize - 4, 4, kMagic, 4) != 0)
        corrupt(path, "bad end magic");
    std::size_t pos = 0;
    std::uint64_t tmp = 0;
    get_fixed64(foot, pos, tmp);
    dir_offset_ = tmp;
    get_fixed64(foot, pos, tmp);
    entry_count_ = tmp;
    get_fixed64(foot, pos, tmp);
    postings_total_ = tmp;
    crc_ = static_cast<std::uint32_t>(static_cast<unsigned char>(foot[pos])) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(foot[pos + 1])) << 8 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(foot[pos + 2])) << 16 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(foot[pos + 3])) << 24;
    const std::uint64_t dir_end = file_.size() - kFooterSize + 24;
    if (dir_offset_ < kHeaderSize || dir_offset_ > dir_end)
        corrupt(path, "directory offset out of range");
    // Load the sparse directory.
    const std::string dir = file_.read_exactly(
        dir_offset_, static_cast<std::size_t>(file_.size() - kFooterSize -
                                              dir_offset_));
    pos = 0;
    while (pos < dir.size()) {
        std::uint64_t klen = 0;
        if (!get_varint(dir, pos, klen) || pos + klen > dir.size())
            corrupt(path, "malformed directory");
        std::string key = dir.substr(pos, klen);
        pos += klen;
        std::uint64_t entry_offset = 0;
        if (!get_varint(dir, pos, entry_offset)) corrupt(path, "malformed directory");
        if (!directory_.empty() && key <= directory_.back().first)
            corrupt(path, "directory keys not ascending");
        if (entry_offset < kHeaderSize || entry_offset >= dir_offset_)
            corrupt(path, "directory entry offset out of range");
        directory_.emplace_back(std::move(key), entry_offset);
    }
    const std::uint64_t expected_dirents =
        (entry_count_ + kDirectoryStride - 1) / kDirectoryStride;
    if (directory_.size() != expected_dirents)
        corrupt(path, "directory entry count mismatch");
}

std::vector<std::uint64_t> SstReader::lookup(std::string_view key) const {
    if (directory_.empty()) return {};
    // Last directory key <= key marks the block that could hold it.
    auto it = std::upper_bound(
        directory_.begin(), directory_.end(), key,
        [](std::string_view k, const auto& d) { return k < d.first; });
    if (it == directory_.begin()) return {};
    --it;
    const std::uint64_t block_start = it->second;
    const std::uint64_t block_end =
        (it + 1 == directory_.end()) ? dir_offset_ : (it + 1)->second;
    const std::string block = file_.read_exactly(
        block_start, static_cast<std::size_t>(block_end - block_start));
    std::size_t pos = 0;
    while (pos < block.size()) {
        std::uint64_t klen = 0;
        if (!get_varint(block, pos, klen) || pos + klen > block.size())
            corrupt(file_.path(), "malformed entry");
        const std::string_view entry_key(block.data() + pos,
                                         static_cast<std::size_t>(klen));
        pos += klen;
        std::uint64_t count = 0;
        if (!get_varint(block, pos, count))
            corrupt(file_.path(), "malformed entry");
        if (entry_key == key) {
            std::vector<std::uint64_t> postings;
            postings.reserve(static_cast<std::size_t>(count));
            std::uint64_t loc = 0;
            for (std::uint64_t i = 0; i < count; ++i) {
                std::uint64_t delta = 0;
                if (!get_varint(block, pos, delta))
                    corrupt(file_.path(), "malformed postings");
                loc = (i == 0) ? delta : loc + delta;
                postings.push_back(loc);
            }
            return postings;
        }
        if (entry_key > key) return {};
        // Skip this entry's postings.
        for (std::uint64_t i = 0; i < count; ++i) {
            std::uint64_t delta = 0;
            if (!get_varint(block, pos, delta))
                corrupt(file_.path(), "malformed postings");
        }
    }
    return {};
}

void SstReader::scan(
    const std::function<void(std::string_view,
                             const std::vector<std::uint64_t>&)>& fn) const {
    if (entry_count_ == 0) return;
    const std::string body = file_.read_exactly(
        kHeaderSize, static_cast<std::size_t>(dir_offset_ - kHeaderSize));
    std::size_t pos = 0;
    std::vector<std::uint64_t> postings;
    std::uint64_t seen = 0;
    while (pos < body.size()) {
        std::uint64_t klen = 0;
        if (!get_varint(body, pos, klen) || pos + klen > body.size())
            corrupt(file_.path(), "malformed entry");
        const std::string_view key(body.data() + pos,
                                   static_cast<std::size_t>(klen));
        pos += klen;
        std::uint64_t count = 0;
        if (!get_varint(body, pos, count)) corrupt(file_.path(), "malformed entry");
        postings.clear();
        postings.reserve(static_cast<std::size_t>(count));
        std::uint64_t loc = 0;
        for (std::uint64_t i = 0; i < count; ++i) {
            std::uint64_t delta = 0;
            if (!get_varint(body, pos, delta))
                corrupt(file_.path(), "malformed postings");
            loc = (i == 0) ? delta : loc + delta;
            postings.push_back(loc);
        }
        fn(key, postings);
        ++seen;
    }
    if (seen != entry_count_) corrupt(file_.path(), "entry count mismatch");
}

bool SstReader::verify_checksum() const {
    const std::uint64_t body_len = file_.size() - 8; // minus crc + end magic
    std::uint32_t crc = 0;
    std::string buf;
    buf.resize(1 << 16);
    std::uint64_t off = 0;
    while (off < body_len) {
        const std::size_t want = static_cast<std::size_t>(
            std::min<std::uint64_t>(buf.size(), body_len - off));
        if (file_.read(off, buf.data(), want) != want) return false;
        crc = crc32_extend(crc, std::string_view(buf.data(), want));
        off += want;
    }
    return crc == crc_;
}

} // namespace ocel
