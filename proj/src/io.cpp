#include "dimrank/io.hpp"

#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

#include <cerrno>
#include <fstream>

namespace dimrank {

namespace {

void write_all(int fd, const std::byte* data, std::size_t n, const std::filesystem::path& path) {
    while (n > 0) {
        const ssize_t w = ::write(fd, data, n);
        if (w < 0) {
            if (errno == EINTR) continue;
            throw IoError("write failed for " + path.string() + ": " + std::strerror(errno));
        }
        data += w;
        n -= static_cast<std::size_t>(w);
    }
}

void fsync_dir(const std::filesystem::path& dir) {
    const int dfd = ::open(dir.empty() ? "." : dir.c_str(), O_RDONLY | O_DIRECTORY);
    if (dfd >= 0) {
        ::fsync(dfd);
        ::close(dfd);
    }
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, std::span<const std::byte> bytes,
                       bool sync) {
    auto tmp = path;
    tmp += ".tmp";
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) throw IoError("cannot open " + tmp.string() + ": " + std::strerror(errno));
    try {
        write_all(fd, bytes.data(), bytes.size(), tmp);
        if (sync && ::fsync(fd) != 0) throw IoError("fsync failed for " + tmp.string());
    } catch (...) {
        ::close(fd);
        throw;
    }
    ::close(fd);
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("rename to " + path.string() + " failed: " + ec.message());
    if (sync) fsync_dir(path.parent_path());
}

void write_file_atomic(const std::filesystem::path& path, std::string_view text, bool sync) {
    write_file_atomic(path, std::as_bytes(std::span(text.data(), text.size())), sync);
}

std::vector<std::byte> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    std::vector<std::byte> out(size);
    in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(size));
    if (!in) throw IoError("short read on " + path.string());
    return out;
}

void append_line(const std::filesystem::path& path, std::string_view line, bool sync) {
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) throw IoError("cannot open " + path.string() + ": " + std::strerror(errno));
    std::string buf(line);
    buf.push_back('\n');
    try {
        write_all(fd, reinterpret_cast<const std::byte*>(buf.data()), buf.size(), path);
        if (sync && ::fsync(fd) != 0) throw IoError("fsync failed for " + path.string());
    } catch (...) {
        ::close(fd);
        throw;
    }
    ::close(fd);
}

std::uint32_t crc32_of(std::span<const std::byte> bytes) {
    return static_cast<std::uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

}  // namespace dimrank
