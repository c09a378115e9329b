#pragma once

// Little-endian binary packing and whole-file IO helpers shared by the
// SALF-F1 / SALF-C1 readers and writers.

#include "error.h"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

namespace salf {

inline void put_u8(std::vector<uint8_t> & out, uint8_t v) {
    out.push_back(v);
}

inline void put_u16(std::vector<uint8_t> & out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>(v >> 8));
}

inline void put_u32(std::vector<uint8_t> & out, uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
    }
}

inline void put_f32(std::vector<uint8_t> & out, float v) {
    put_u32(out, std::bit_cast<uint32_t>(v));
}

// Sequential reader over a byte span; out-of-range reads raise `code`.
class byte_reader {
  public:
    byte_reader(std::span<const uint8_t> bytes, errc code, std::string what)
        : bytes_(bytes), code_(code), what_(std::move(what)) {}

    size_t pos() const { return pos_; }
    size_t remaining() const { return bytes_.size() - pos_; }

    void require(size_t n) const {
        if (remaining() < n) {
            fail(code_, what_ + ": truncated (need " + std::to_string(n) + " bytes at offset " +
                            std::to_string(pos_) + ")");
        }
    }

    uint8_t u8() {
        require(1);
        return bytes_[pos_++];
    }

    uint16_t u16() {
        require(2);
        uint16_t v = static_cast<uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }

    uint32_t u32() {
        require(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<uint32_t>(bytes_[pos_ + i]) << (8 * i);
        }
        pos_ += 4;
        return v;
    }

    float f32() {
        return std::bit_cast<float>(u32());
    }

    int16_t i16() {
        return static_cast<int16_t>(u16());
    }

    void skip(size_t n) {
        require(n);
        pos_ += n;
    }

    std::span<const uint8_t> take(size_t n) {
        require(n);
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

  private:
    std::span<const uint8_t> bytes_;
    size_t pos_ = 0;
    errc code_;
    std::string what_;
};

inline std::vector<uint8_t> read_file_bytes(const std::string & path) {
    std::FILE * f = std::fopen(path.c_str(), "rb");
    if (f == nullptr) {
        fail(errc::io_failure, "cannot open '" + path + "' for reading");
    }
    std::vector<uint8_t> bytes;
    uint8_t buf[1 << 16];
    size_t n;
    while ((n = std::fread(buf, 1, sizeof(buf), f)) > 0) {
        bytes.insert(bytes.end(), buf, buf + n);
    }
    bool bad = std::ferror(f) != 0;
    std::fclose(f);
    if (bad) {
        fail(errc::io_failure, "read error on '" + path + "'");
    }
    return bytes;
}

inline void write_file_bytes(const std::string & path, std::span<const uint8_t> bytes) {
    std::FILE * f = std::fopen(path.c_str(), "wb");
    if (f == nullptr) {
        fail(errc::io_failure, "cannot open '" + path + "' for writing");
    }
    size_t written = std::fwrite(bytes.data(), 1, bytes.size(), f);
    bool bad = written != bytes.size() || std::fclose(f) != 0;
    if (bad) {
        fail(errc::io_failure, "write error on '" + path + "'");
    }
}

} // namespace salf
