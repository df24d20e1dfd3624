#pragma once

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <stop_token>
#include <string>
#include <vector>

namespace dimrank {

struct QueueOptions {
    // fsync the log on every append and the cursor file on every ack.
    bool sync = true;
};

struct QueueRecord {
    std::uint64_t id = 0;
    std::vector<std::byte> payload;
};

/// Append-only record log with named reader cursors.
///
/// Log layout: repeated [u32 length][u32 crc32(payload)][payload], all
/// little-endian. A torn record at the tail (crash during write) is ignored
/// by readers and truncated before the next append. Cursors live in a JSON
/// sidecar, rewritten atomically on every ack.
///
/// One writer per queue; any number of readers, each with its own cursor.
/// Delivery is at-least-once: poll() keeps returning the record at the
/// cursor until ack() moves past it.
class DurableQueue {
public:
    DurableQueue(std::filesystem::path log_path, std::filesystem::path cursor_path,
                 QueueOptions options = {});
    ~DurableQueue();

    DurableQueue(const DurableQueue&) = delete;
    DurableQueue& operator=(const DurableQueue&) = delete;

    /// Persists the record (flushed before return) and returns its position.
    std::uint64_t append(std::span<const std::byte> payload);

    /// Number of complete records, including ones appended by other processes.
    std::uint64_t size();

    /// Reads a record by position. Throws InvalidArgument when out of range.
    std::vector<std::byte> read(std::uint64_t id);

    /// Creates the cursor at position 0 if it does not exist yet.
    void register_cursor(const std::string& cursor);
    bool has_cursor(const std::string& cursor) const;

    /// Next unacknowledged record for the cursor, or nullopt when none is
    /// available (non-blocking) or when the stop token fires (blocking).
    std::optional<QueueRecord> poll(const std::string& cursor, bool block,
                                    std::stop_token stop = {});

    /// Marks the record at the cursor as processed.
    void ack(const std::string& cursor);

    std::uint64_t cursor_position(const std::string& cursor) const;

    const std::filesystem::path& log_path() const { return log_path_; }

private:
    void refresh_locked();
    void persist_cursors_locked();
    std::vector<std::byte> read_locked(std::uint64_t id);

    std::filesystem::path log_path_;
    std::filesystem::path cursor_path_;
    QueueOptions options_;
    int fd_ = -1;

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::vector<std::uint64_t> offsets_;  // byte offset of each record header
    std::uint64_t valid_end_ = 0;         // end of the last complete record
    std::map<std::string, std::uint64_t> cursors_;
};

}  // namespace dimrank
