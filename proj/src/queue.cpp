#include "dimrank/queue.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>

#include "json.hpp"

#include "dimrank/errors.hpp"
#include "dimrank/io.hpp"

namespace dimrank {

namespace {

constexpr std::size_t kHeaderBytes = 8;
constexpr std::uint32_t kMaxRecordBytes = 64u << 20;
constexpr auto kPollInterval = std::chrono::milliseconds(20);

bool pread_exact(int fd, std::byte* out, std::size_t n, std::uint64_t offset) {
    while (n > 0) {
        const ssize_t r = ::pread(fd, out, n, static_cast<off_t>(offset));
        if (r < 0) {
            if (errno == EINTR) continue;
            throw IoError(std::string("pread failed: ") + std::strerror(errno));
        }
        if (r == 0) return false;
        out += r;
        n -= static_cast<std::size_t>(r);
        offset += static_cast<std::uint64_t>(r);
    }
    return true;
}

}  // namespace

DurableQueue::DurableQueue(std::filesystem::path log_path, std::filesystem::path cursor_path,
                           QueueOptions options)
    : log_path_(std::move(log_path)), cursor_path_(std::move(cursor_path)), options_(options) {
    std::filesystem::create_directories(log_path_.parent_path());
    std::filesystem::create_directories(cursor_path_.parent_path());
    fd_ = ::open(log_path_.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) {
        throw IoError("cannot open queue log " + log_path_.string() + ": " + std::strerror(errno));
    }
    if (std::filesystem::exists(cursor_path_)) {
        const auto bytes = read_file(cursor_path_);
        try {
            const auto j = nlohmann::json::parse(reinterpret_cast<const char*>(bytes.data()),
                                                 reinterpret_cast<const char*>(bytes.data()) + bytes.size());
            for (const auto& [name, pos] : j.items()) cursors_[name] = pos.get<std::uint64_t>();
        } catch (const nlohmann::json::exception& e) {
            throw IoError("corrupt cursor file " + cursor_path_.string() + ": " + e.what());
        }
    }
    std::lock_guard lock(mu_);
    refresh_locked();
    for (auto& [name, pos] : cursors_) {
        if (pos > offsets_.size()) {
            throw IoError("cursor '" + name + "' is past the end of " + log_path_.string());
        }
    }
}

DurableQueue::~DurableQueue() {
    if (fd_ >= 0) ::close(fd_);
}

void DurableQueue::refresh_locked() {
    struct stat st {};
    if (::fstat(fd_, &st) != 0) throw IoError("fstat failed on " + log_path_.string());
    const auto file_size = static_cast<std::uint64_t>(st.st_size);
    std::byte header[kHeaderBytes];
    while (valid_end_ + kHeaderBytes <= file_size) {
        if (!pread_exact(fd_, header, kHeaderBytes, valid_end_)) break;
        std::uint32_t len, crc;
        std::memcpy(&len, header, 4);
        std::memcpy(&crc, header + 4, 4);
        if (len > kMaxRecordBytes || valid_end_ + kHeaderBytes + len > file_size) break;
        std::vector<std::byte> payload(len);
        if (!pread_exact(fd_, payload.data(), len, valid_end_ + kHeaderBytes)) break;
        // A bad checksum can only be a torn tail: earlier records were synced.
        if (crc32_of(payload) != crc) break;
        offsets_.push_back(valid_end_);
        valid_end_ += kHeaderBytes + len;
    }
}

std::uint64_t DurableQueue::append(std::span<const std::byte> payload) {
    if (payload.size() > kMaxRecordBytes) throw InvalidArgument("queue record too large");
    std::lock_guard lock(mu_);
    refresh_locked();
    struct stat st {};
    if (::fstat(fd_, &st) != 0) throw IoError("fstat failed on " + log_path_.string());
    if (static_cast<std::uint64_t>(st.st_size) > valid_end_) {
        if (::ftruncate(fd_, static_cast<off_t>(valid_end_)) != 0) {
            throw IoError("cannot truncate torn tail of " + log_path_.string());
        }
    }
    ByteWriter w;
    w.put(static_cast<std::uint32_t>(payload.size()));
    w.put(crc32_of(payload));
    w.put_bytes(payload);
    const auto& buf = w.bytes();
    std::size_t done = 0;
    while (done < buf.size()) {
        const ssize_t n = ::pwrite(fd_, buf.data() + done, buf.size() - done,
                                   static_cast<off_t>(valid_end_ + done));
        if (n < 0) {
            if (errno == EINTR) continue;
            throw IoError("append to " + log_path_.string() + " failed: " + std::strerror(errno));
        }
        done += static_cast<std::size_t>(n);
    }
    if (options_.sync && ::fdatasync(fd_) != 0) {
        throw IoError("fsync failed on " + log_path_.string());
    }
    const std::uint64_t id = offsets_.size();
    offsets_.push_back(valid_end_);
    valid_end_ += buf.size();
    cv_.notify_all();
    return id;
}

std::uint64_t DurableQueue::size() {
    std::lock_guard lock(mu_);
    refresh_locked();
    return offsets_.size();
}

std::vector<std::byte> DurableQueue::read_locked(std::uint64_t id) {
    if (id >= offsets_.size()) refresh_locked();
    if (id >= offsets_.size()) {
        throw InvalidArgument("record " + std::to_string(id) + " does not exist in " +
                              log_path_.string());
    }
    std::byte header[kHeaderBytes];
    pread_exact(fd_, header, kHeaderBytes, offsets_[id]);
    std::uint32_t len;
    std::memcpy(&len, header, 4);
    std::vector<std::byte> payload(len);
    pread_exact(fd_, payload.data(), len, offsets_[id] + kHeaderBytes);
    return payload;
}

std::vector<std::byte> DurableQueue::read(std::uint64_t id) {
    std::lock_guard lock(mu_);
    return read_locked(id);
}

void DurableQueue::register_cursor(const std::string& cursor) {
    std::lock_guard lock(mu_);
    if (cursors_.emplace(cursor, 0).second) persist_cursors_locked();
}

bool DurableQueue::has_cursor(const std::string& cursor) const {
    std::lock_guard lock(mu_);
    return cursors_.contains(cursor);
}

std::optional<QueueRecord> DurableQueue::poll(const std::string& cursor, bool block,
                                              std::stop_token stop) {
    std::unique_lock lock(mu_);
    auto it = cursors_.find(cursor);
    if (it == cursors_.end()) throw UnknownCursor("unknown cursor '" + cursor + "'");
    for (;;) {
        const std::uint64_t pos = it->second;
        if (pos < offsets_.size()) return QueueRecord{pos, read_locked(pos)};
        refresh_locked();
        if (pos < offsets_.size()) return QueueRecord{pos, read_locked(pos)};
        if (!block || stop.stop_requested()) return std::nullopt;
        // Appends from other processes are only visible by re-reading the
        // file, so wake up periodically even without a local notify.
        cv_.wait_for(lock, kPollInterval);
    }
}

void DurableQueue::ack(const std::string& cursor) {
    std::lock_guard lock(mu_);
    auto it = cursors_.find(cursor);
    if (it == cursors_.end()) throw UnknownCursor("unknown cursor '" + cursor + "'");
    if (it->second >= offsets_.size()) {
        throw InvalidArgument("ack past the end of " + log_path_.string());
    }
    ++it->second;
    persist_cursors_locked();
}

std::uint64_t DurableQueue::cursor_position(const std::string& cursor) const {
    std::lock_guard lock(mu_);
    auto it = cursors_.find(cursor);
    if (it == cursors_.end()) throw UnknownCursor("unknown cursor '" + cursor + "'");
    return it->second;
}

void DurableQueue::persist_cursors_locked() {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [name, pos] : cursors_) j[name] = pos;
    write_file_atomic(cursor_path_, j.dump(), options_.sync);
}

}  // namespace dimrank
