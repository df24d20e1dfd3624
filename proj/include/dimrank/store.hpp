#pragma once

#include <filesystem>
#include <memory>
#include <optional>

#include "dimrank/feed.hpp"
#include "dimrank/queue.hpp"
#include "dimrank/registry.hpp"
#include "dimrank/state.hpp"

namespace dimrank {

struct StoreOptions {
    bool sync = true;
    std::size_t feed_capacity = kDefaultFeedCapacity;
};

/// Data directory layout:
///   queues/<name>.log, cursors/<name>.json, checkpoints/<step>.ckpt,
///   feeds/<user>.json, posts.jsonl, users.jsonl
class Store {
public:
    static constexpr const char* kTrainQueue = "train";
    static constexpr const char* kNewQueue = "new";

    explicit Store(std::filesystem::path data_dir, StoreOptions options = {});

    const std::filesystem::path& data_dir() const { return dir_; }
    const StoreOptions& options() const { return options_; }

    DurableQueue& train_queue() { return *train_; }
    DurableQueue& new_queue() { return *new_; }
    UserRegistry& users() { return *users_; }
    PostStore& posts() { return *posts_; }
    FeedStore& feeds() { return *feeds_; }
    SnapshotPublisher& snapshots() { return snapshots_; }

    std::filesystem::path checkpoint_dir() const { return dir_ / "checkpoints"; }
    std::filesystem::path checkpoint_path(std::uint64_t step) const;
    std::optional<std::filesystem::path> latest_checkpoint() const;

private:
    std::filesystem::path dir_;
    StoreOptions options_;
    std::unique_ptr<DurableQueue> train_;
    std::unique_ptr<DurableQueue> new_;
    std::unique_ptr<UserRegistry> users_;
    std::unique_ptr<PostStore> posts_;
    std::unique_ptr<FeedStore> feeds_;
    SnapshotPublisher snapshots_;
};

/// Exclusive advisory lock on a file, released on destruction.
class FileLock {
public:
    explicit FileLock(const std::filesystem::path& path);
    ~FileLock();
    FileLock(const FileLock&) = delete;
    FileLock& operator=(const FileLock&) = delete;

private:
    int fd_ = -1;
};

}  // namespace dimrank
