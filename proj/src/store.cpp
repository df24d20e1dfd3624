#include "dimrank/store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cstdio>

#include "dimrank/errors.hpp"

namespace dimrank {

Store::Store(std::filesystem::path data_dir, StoreOptions options)
    : dir_(std::move(data_dir)), options_(options) {
    for (const char* sub : {"queues", "cursors", "checkpoints", "feeds"}) {
        std::filesystem::create_directories(dir_ / sub);
    }
    const QueueOptions qopts{options_.sync};
    train_ = std::make_unique<DurableQueue>(dir_ / "queues" / "train.log",
                                            dir_ / "cursors" / "train.json", qopts);
    new_ = std::make_unique<DurableQueue>(dir_ / "queues" / "new.log",
                                          dir_ / "cursors" / "new.json", qopts);
    users_ = std::make_unique<UserRegistry>(dir_ / "users.jsonl", options_.sync);
    posts_ = std::make_unique<PostStore>(dir_ / "posts.jsonl", options_.sync);
    feeds_ = std::make_unique<FeedStore>(dir_ / "feeds", options_.feed_capacity, options_.sync);
}

std::filesystem::path Store::checkpoint_path(std::uint64_t step) const {
    char name[32];
    std::snprintf(name, sizeof name, "%012llu.ckpt", static_cast<unsigned long long>(step));
    return checkpoint_dir() / name;
}

std::optional<std::filesystem::path> Store::latest_checkpoint() const {
    std::optional<std::filesystem::path> best;
    if (!std::filesystem::exists(checkpoint_dir())) return best;
    for (const auto& entry : std::filesystem::directory_iterator(checkpoint_dir())) {
        if (entry.path().extension() != ".ckpt") continue;
        // Zero-padded names sort in step order.
        if (!best || entry.path().filename() > best->filename()) best = entry.path();
    }
    return best;
}

FileLock::FileLock(const std::filesystem::path& path) {
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError("cannot open lock file " + path.string());
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
        ::close(fd_);
        fd_ = -1;
        throw IoError("another process holds " + path.string());
    }
}

FileLock::~FileLock() {
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

}  // namespace dimrank
