#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <memory>
#include <string>
#include <string_view>

namespace ocel {

// Pull-based byte stream. Implementations: plain files, memory buffers,
// gzip inflation (gzipio.hpp).
class ByteSource {
public:
    virtual ~ByteSource() = default;
    // Reads up to `n` bytes into `buf`; returns the count read, 0 at end.
    virtual std::size_t read(char* buf, std::size_t n) = 0;
};

class ByteSink {
public:
    virtual ~ByteSink() = default;
    virtual void write(const char* data, std::size_t n) = 0;
    void write(std::string_view s) { write(s.data(), s.size()); }
    virtual void flush() {}
};

std::unique_ptr<ByteSource> open_file_source(const std::string& path);
std::unique_ptr<ByteSource> make_memory_source(std::string data);
std::unique_ptr<ByteSink> open_file_sink(const std::string& path);

// Positioned reads over an immutable file (pread). Safe to share across
// threads: read() keeps no cursor state.
class RandomAccessFile {
public:
    explicit RandomAccessFile(const std::string& path);
    ~RandomAccessFile();
    RandomAccessFile(const RandomAccessFile&) = delete;
    RandomAccessFile& operator=(const RandomAccessFile&) = delete;

    // Reads up to n bytes at `offset`; short counts only at end of file.
    std::size_t read(std::uint64_t offset, char* buf, std::size_t n) const;
    // Convenience: exactly n bytes into a string, or IoError.
    std::string read_exactly(std::uint64_t offset, std::size_t n) const;

    std::uint64_t size() const { return size_; }
    const std::string& path() const { return path_; }

private:
    std::string path_;
    int fd_ = -1;
    std::uint64_t size_ = 0;
};

class StringSink : public ByteSink {
public:
    void write(const char* data, std::size_t n) override { out_.append(data, n); }
    const std::string& str() const { return out_; }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

// Buffered single-byte reader with an absolute offset counter, shared by
// the JSON and XML tokenizers.
class ByteReader {
public:
    explicit ByteReader(ByteSource& src) : src_(src) {}

    // Next byte as unsigned char, or -1 at end of input.
    int get() {
        if (pos_ >= len_ && !fill()) return -1;
        ++offset_;
        return static_cast<unsigned char>(buf_[pos_++]);
    }

    int peek() {
        if (pos_ >= len_ && !fill()) return -1;
        return static_cast<unsigned char>(buf_[pos_]);
    }

    // Reads exactly n bytes into dst; false if the source ends first.
    bool read_exact(char* dst, std::size_t n) {
        while (n > 0) {
            if (pos_ >= len_ && !fill()) return false;
            const std::size_t take = std::min(n, len_ - pos_);
            std::memcpy(dst, buf_ + pos_, take);
            pos_ += take;
            offset_ += take;
            dst += take;
            n -= take;
        }
        return true;
    }

    // Bytes consumed so far.
    std::uint64_t offset() const { return offset_; }

private:
    bool fill() {
        len_ = src_.read(buf_, sizeof buf_);
        pos_ = 0;
        return len_ > 0;
    }

    ByteSource& src_;
    char buf_[1 << 16];
    std::size_t pos_ = 0;
    std::size_t len_ = 0;
    std::uint64_t offset_ = 0;
};

// --- varints -------------------------------------------------------------

inline void put_varint(std::string& out, std::uint64_t v) {
    while (v >= 0x80) {
        out.push_back(static_cast<char>((v & 0x7f) | 0x80));
        v >>= 7;
    }
    out.push_back(static_cast<char>(v));
}

inline std::size_t varint_size(std::uint64_t v) {
    std::size_t n = 1;
    while (v >= 0x80) {
        v >>= 7;
        ++n;
    }
    return n;
}

// Decodes a varint from data[pos...]; advances pos. Returns false on
// truncation or overlong input.
inline bool get_varint(std::string_view data, std::size_t& pos, std::uint64_t& out) {
    std::uint64_t v = 0;
    int shift = 0;
    while (pos < data.size()) {
        const auto byte = static_cast<unsigned char>(data[pos++]);
        if (shift == 63 && byte > 1) return false;
        v |= static_cast<std::uint64_t>(byte & 0x7f) << shift;
        if ((byte & 0x80) == 0) {
            out = v;
            return true;
        }
        shift += 7;
        if (shift > 63) return false;
    }
    return false;
}

// Streaming varint decode; false on end of input or overlong encoding.
inline bool get_varint(ByteReader& r, std::uint64_t& out) {
    std::uint64_t v = 0;
    int shift = 0;
    for (;;) {
        const int c = r.get();
        if (c < 0) return false;
        if (shift == 63 && c > 1) return false;
        v |= static_cast<std::uint64_t>(c & 0x7f) << shift;
        if ((c & 0x80) == 0) {
            out = v;
            return true;
        }
        shift += 7;
        if (shift > 63) return false;
    }
}

inline std::uint64_t zigzag_encode(std::int64_t v) {
    return (static_cast<std::uint64_t>(v) << 1) ^ static_cast<std::uint64_t>(v >> 63);
}

inline std::int64_t zigzag_decode(std::uint64_t v) {
    return static_cast<std::int64_t>(v >> 1) ^ -static_cast<std::int64_t>(v & 1);
}

inline void put_fixed64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline bool get_fixed64(std::string_view data, std::size_t& pos, std::uint64_t& out) {
    if (pos + 8 > data.size()) return false;
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
    pos += 8;
    out = v;
    return true;
}

// zlib-backed CRC-32 of a byte range.
std::uint32_t crc32_of(std::string_view data);
std::uint32_t crc32_extend(std::uint32_t crc, std::string_view data);

} // namespace ocel
