#include "ocel/bytes.hpp"

#include <cstdio>
#include <cstring>
#include <utility>

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>
#include <zlib.h>

#include "ocel/errors.hpp"

namespace ocel {
namespace {

class FileSource : public ByteSource {
public:
    explicit FileSource(const std::string& path) : path_(path), f_(std::fopen(path.c_str(), "rb")) {
        if (!f_) throw IoError("cannot open " + path + " for reading");
    }
    ~FileSource() override {
        if (f_) std::fclose(f_);
    }
    std::size_t read(char* buf, std::size_t n) override {
        const std::size_t got = std::fread(buf, 1, n, f_);
        if (got < n && std::ferror(f_)) throw IoError("read error on " + path_);
        return got;
    }

private:
    std::string path_;
    std::FILE* f_;
};

class MemorySource : public ByteSource {
public:
    explicit MemorySource(std::string data) : data_(std::move(data)) {}
    std::size_t read(char* buf, std::size_t n) override {
        const std::size_t avail = data_.size() - pos_;
        const std::size_t take = n < avail ? n : avail;
        std::memcpy(buf, data_.data() + pos_, take);
        pos_ += take;
        return take;
    }

private:
    std::string data_;
    std::size_t pos_ = 0;
};

class FileSink : public ByteSink {
public:
    explicit FileSink(const std::string& path) : path_(path), f_(std::fopen(path.c_str(), "wb")) {
        if (!f_) throw IoError("cannot open " + path + " for writing");
    }
    ~FileSink() override {
        if (f_) std::fclose(f_);
    }
    void write(const char* data, std::size_t n) override {
        if (std::fwrite(data, 1, n, f_) != n) throw IoError("write error on " + path_);
    }
    void flush() override {
        if (std::fflush(f_) != 0) throw IoError("flush error on " + path_);
    }

private:
    std::string path_;
    std::FILE* f_;
};

} // namespace

std::unique_ptr<ByteSource> open_file_source(const std::string& path) {
    return std::make_unique<FileSource>(path);
}

std::unique_ptr<ByteSource> make_memory_source(std::string data) {
    return std::make_unique<MemorySource>(std::move(data));
}

std::unique_ptr<ByteSink> open_file_sink(const std::string& path) {
    return std::make_unique<FileSink>(path);
}

RandomAccessFile::RandomAccessFile(const std::string& path) : path_(path) {
    fd_ = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
    if (fd_ < 0) throw IoError("cannot open " + path + " for reading");
    struct stat st{};
    if (::fstat(fd_, &st) != 0) {
        ::close(fd_);
        throw IoError("cannot stat " + path);
    }
    size_ = static_cast<std::uint64_t>(st.st_size);
}

RandomAccessFile::~RandomAccessFile() {
    if (fd_ >= 0) ::close(fd_);
}

std::size_t RandomAccessFile::read(std::uint64_t offset, char* buf,
                                   std::size_t n) const {
    std::size_t got = 0;
    while (got < n) {
        const ssize_t r = ::pread(fd_, buf + got, n - got,
                                  static_cast<off_t>(offset + got));
        if (r < 0) throw IoError("read error on " + path_);
        if (r == 0) break;
        got += static_cast<std::size_t>(r);
    }
    return got;
}

std::string RandomAccessFile::read_exactly(std::uint64_t offset,
                                           std::size_t n) const {
    std::string out;
    out.resize(n);
    if (read(offset, out.data(), n) != n)
        throw IoError("short read on " + path_);
    return out;
}

std::uint32_t crc32_of(std::string_view data) {
    return crc32_extend(0, data);
}

std::uint32_t crc32_extend(std::uint32_t crc, std::string_view data) {
    return static_cast<std::uint32_t>(
        crc32(crc, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size())));
}

} // namespace ocel
