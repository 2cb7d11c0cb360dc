#include "ocel/gzipio.hpp"

#include <cstring>

#include <zlib.h>

#include "ocel/errors.hpp"

namespace ocel {
namespace {

class GunzipSource : public ByteSource {
public:
    GunzipSource(std::unique_ptr<ByteSource> inner, std::string head)
        : inner_(std::move(inner)), pending_(std::move(head)) {
        std::memset(&strm_, 0, sizeof strm_);
        // 15 window bits + 16 selects gzip container decoding.
        if (inflateInit2(&strm_, 15 + 16) != Z_OK)
            throw IoError("zlib inflateInit failed");
    }

    ~GunzipSource() override { inflateEnd(&strm_); }

    std::size_t read(char* buf, std::size_t n) override {
        if (finished_) return 0;
        strm_.next_out = reinterpret_cast<Bytef*>(buf);
        strm_.avail_out = static_cast<uInt>(n);
        while (strm_.avail_out > 0) {
            if (strm_.avail_in == 0) {
                if (!pending_.empty()) {
                    in_.assign(pending_);
                    pending_.clear();
                } else {
                    in_.resize(1 << 16);
                    in_.resize(inner_->read(in_.data(), in_.size()));
                }
                if (in_.empty()) {
                    if (strm_.avail_out == n) throw IoError("truncated gzip stream");
                    break;
                }
                strm_.next_in = reinterpret_cast<Bytef*>(in_.data());
                strm_.avail_in = static_cast<uInt>(in_.size());
            }
            const int rc = inflate(&strm_, Z_NO_FLUSH);
            if (rc == Z_STREAM_END) {
                finished_ = true;
                break;
            }
            if (rc != Z_OK && rc != Z_BUF_ERROR)
                throw IoError(std::string("gzip decompression failed: ") +
                              (strm_.msg ? strm_.msg : "corrupt stream"));
        }
        return n - strm_.avail_out;
    }

private:
    std::unique_ptr<ByteSource> inner_;
    std::string pending_; // sniffed bytes, replayed before the real source
    std::string in_;
    z_stream strm_;
    bool finished_ = false;
};

class GzipSink : public ByteSink {
public:
    explicit GzipSink(std::unique_ptr<ByteSink> inner) : inner_(std::move(inner)) {
        std::memset(&strm_, 0, sizeof strm_);
        if (deflateInit2(&strm_, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8,
                         Z_DEFAULT_STRATEGY) != Z_OK)
            throw IoError("zlib deflateInit failed");
    }

    ~GzipSink() override {
        if (!finished_) {
            try {
                finish();
            } catch (...) {
            }
        }
        deflateEnd(&strm_);
    }

    void write(const char* data, std::size_t n) override {
        strm_.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data));
        strm_.avail_in = static_cast<uInt>(n);
        pump(Z_NO_FLUSH);
    }

    void flush() override {
        finish();
        inner_->flush();
    }

private:
    void finish() {
        if (finished_) return;
        strm_.next_in = nullptr;
        strm_.avail_in = 0;
        pump(Z_FINISH);
        finished_ = true;
    }

    void pump(int mode) {
        char out[1 << 16];
        int rc = Z_OK;
        do {
            strm_.next_out = reinterpret_cast<Bytef*>(out);
            strm_.avail_out = sizeof out;
            rc = deflate(&strm_, mode);
            if (rc == Z_STREAM_ERROR) throw IoError("gzip compression failed");
            const std::size_t produced = sizeof out - strm_.avail_out;
            if (produced > 0) inner_->write(out, produced);
        } while (strm_.avail_out == 0 || (mode == Z_FINISH && rc != Z_STREAM_END));
    }

    std::unique_ptr<ByteSink> inner_;
    z_stream strm_;
    bool finished_ = false;
};

} // namespace

bool looks_like_gzip(const unsigned char* head, std::size_t n) {
    return n >= 2 && head[0] == 0x1f && head[1] == 0x8b;
}

std::unique_ptr<ByteSource> wrap_gunzip(std::unique_ptr<ByteSource> inner, std::string head) {
    return std::make_unique<GunzipSource>(std::move(inner), std::move(head));
}

std::unique_ptr<ByteSink> wrap_gzip(std::unique_ptr<ByteSink> inner) {
    return std::make_unique<GzipSink>(std::move(inner));
}

} // namespace ocel
