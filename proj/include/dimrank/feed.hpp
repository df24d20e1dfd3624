#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "dimrank/ids.hpp"

namespace dimrank {

inline constexpr std::size_t kDefaultFeedCapacity = 1000;

/// One user's bounded recommendation queue. Oldest entries are evicted
/// when full; an unread post is never queued twice.
class UserFeedQueue {
public:
    struct Entry {
        PostId post;
        bool read = false;
        bool operator==(const Entry&) const = default;
    };

    explicit UserFeedQueue(std::size_t capacity = kDefaultFeedCapacity) : capacity_(capacity) {}

    /// Returns false when the post is already queued and unread.
    bool push(PostId post);
    bool mark_read(PostId post);
    std::vector<PostId> unread() const;
    std::size_t size() const { return entries_.size(); }
    std::size_t capacity() const { return capacity_; }
    const std::deque<Entry>& entries() const { return entries_; }
    void restore(std::deque<Entry> entries) { entries_ = std::move(entries); }

private:
    std::size_t capacity_;
    std::deque<Entry> entries_;
};

/// All users' feed queues. With a directory, each user's queue is mirrored
/// to <dir>/<user>.json after every change so other processes can read it.
class FeedStore {
public:
    explicit FeedStore(std::filesystem::path dir = {}, std::size_t capacity = kDefaultFeedCapacity,
                       bool sync = false);

    bool push(UserId user, PostId post);
    bool mark_read(UserId user, PostId post);
    std::vector<PostId> unread(UserId user);
    /// Marks the given posts read in one persisted update.
    void mark_read(UserId user, const std::vector<PostId>& posts);
    std::size_t size(UserId user);

private:
    UserFeedQueue& queue_locked(UserId user);
    void persist_locked(UserId user, const UserFeedQueue& q);

    std::filesystem::path dir_;
    std::size_t capacity_;
    bool sync_;
    std::mutex mu_;
    std::map<UserId, UserFeedQueue> queues_;
};

}  // namespace dimrank
