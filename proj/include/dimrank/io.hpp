#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "dimrank/errors.hpp"

namespace dimrank {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

/// Writes via a temporary file and rename so readers never observe a
/// partially written file.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::byte> bytes,
                       bool sync = true);
void write_file_atomic(const std::filesystem::path& path, std::string_view text,
                       bool sync = true);

std::vector<std::byte> read_file(const std::filesystem::path& path);

/// Appends one line and optionally fsyncs.
void append_line(const std::filesystem::path& path, std::string_view line, bool sync);

std::uint32_t crc32_of(std::span<const std::byte> bytes);

class ByteWriter {
public:
    template <class T>
        requires std::is_arithmetic_v<T>
    void put(T v) {
        const auto* p = reinterpret_cast<const std::byte*>(&v);
        buf_.insert(buf_.end(), p, p + sizeof(T));
    }

    template <class T>
    void put_array(std::span<const T> values) {
        const auto* p = reinterpret_cast<const std::byte*>(values.data());
        buf_.insert(buf_.end(), p, p + values.size_bytes());
    }

    void put_bytes(std::span<const std::byte> bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }

    std::vector<std::byte>& bytes() { return buf_; }
    std::vector<std::byte> take() { return std::move(buf_); }

private:
    std::vector<std::byte> buf_;
};

/// Bounds-checked reader; throws the error type E on overrun.
template <class E = IoError>
class ByteReader {
public:
    explicit ByteReader(std::span<const std::byte> bytes) : bytes_(bytes) {}

    template <class T>
        requires std::is_arithmetic_v<T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    template <class T>
    void get_array(std::span<T> out) {
        need(out.size_bytes());
        std::memcpy(out.data(), bytes_.data() + pos_, out.size_bytes());
        pos_ += out.size_bytes();
    }

    std::span<const std::byte> get_bytes(std::size_t n) {
        need(n);
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw E("unexpected end of data");
    }

    std::span<const std::byte> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace dimrank
