#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rtwin/error.hpp"

namespace rtwin::detail {

// Little-endian byte encoding independent of host order.

class ByteWriter {
public:
    void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }

    template <typename U>
    void uint(U v) {
        for (std::size_t i = 0; i < sizeof(U); ++i)
            buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
    }

    void u16(std::uint16_t v) { uint(v); }
    void u32(std::uint32_t v) { uint(v); }
    void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }

    const std::vector<char>& data() const { return buf_; }

private:
    std::vector<char> buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const char> data) : data_(data) {}

    std::size_t remaining() const { return data_.size() - pos_; }
    std::size_t position() const { return pos_; }

    void need(std::size_t n, std::string_view what) const {
        if (remaining() < n)
            fail(ErrorCode::TruncatedPayload,
                 "file ends inside " + std::string(what) + " (need " + std::to_string(n) +
                     " bytes, have " + std::to_string(remaining()) + ")");
    }

    std::string_view bytes(std::size_t n, std::string_view what) {
        need(n, what);
        std::string_view out(data_.data() + pos_, n);
        pos_ += n;
        return out;
    }

    template <typename U>
    U uint(std::string_view what) {
        need(sizeof(U), what);
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i)
            v |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i));
        pos_ += sizeof(U);
        return v;
    }

    std::uint8_t u8(std::string_view what) { return uint<std::uint8_t>(what); }
    std::uint16_t u16(std::string_view what) { return uint<std::uint16_t>(what); }
    std::uint32_t u32(std::string_view what) { return uint<std::uint32_t>(what); }
    float f32(std::string_view what) { return std::bit_cast<float>(uint<std::uint32_t>(what)); }
    double f64(std::string_view what) { return std::bit_cast<double>(uint<std::uint64_t>(what)); }

private:
    std::span<const char> data_;
    std::size_t pos_ = 0;
};

inline std::vector<char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoFailure, "cannot open " + path.string());
    std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) fail(ErrorCode::IoFailure, "read error on " + path.string());
    return data;
}

inline void write_file(const std::filesystem::path& path, std::span<const char> data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) fail(ErrorCode::IoFailure, "write error on " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
    auto bytes = read_file(path);
    return std::string(bytes.begin(), bytes.end());
}

inline void write_text(const std::filesystem::path& path, std::string_view text) {
    write_file(path, std::span<const char>(text.data(), text.size()));
}

} // namespace rtwin::detail
