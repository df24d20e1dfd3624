#include "dimrank/feed.hpp"

#include <algorithm>

#include "json.hpp"

#include "dimrank/io.hpp"

namespace dimrank {

bool UserFeedQueue::push(PostId post) {
    const bool queued_unread = std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) {
        return e.post == post && !e.read;
    });
    if (queued_unread) return false;
    if (entries_.size() >= capacity_) entries_.pop_front();
    entries_.push_back({post, false});
    return true;
}

bool UserFeedQueue::mark_read(PostId post) {
    for (auto& e : entries_) {
        if (e.post == post && !e.read) {
            e.read = true;
            return true;
        }
    }
    return false;
}

std::vector<PostId> UserFeedQueue::unread() const {
    std::vector<PostId> out;
    for (const auto& e : entries_) {
        if (!e.read) out.push_back(e.post);
    }
    return out;
}

FeedStore::FeedStore(std::filesystem::path dir, std::size_t capacity, bool sync)
    : dir_(std::move(dir)), capacity_(capacity), sync_(sync) {
    if (!dir_.empty()) std::filesystem::create_directories(dir_);
}

UserFeedQueue& FeedStore::queue_locked(UserId user) {
    auto it = queues_.find(user);
    if (it != queues_.end()) return it->second;
    UserFeedQueue q(capacity_);
    const auto path = dir_.empty() ? std::filesystem::path{}
                                   : dir_ / (std::to_string(user.value) + ".json");
    if (!path.empty() && std::filesystem::exists(path)) {
        const auto bytes = read_file(path);
        const auto j = nlohmann::json::parse(reinterpret_cast<const char*>(bytes.data()),
                                             reinterpret_cast<const char*>(bytes.data()) + bytes.size());
        std::deque<UserFeedQueue::Entry> entries;
        for (const auto& e : j.at("entries")) {
            entries.push_back({PostId{e.at("post").get<std::uint64_t>()}, e.at("read").get<bool>()});
        }
        q.restore(std::move(entries));
    }
    return queues_.emplace(user, std::move(q)).first->second;
}

void FeedStore::persist_locked(UserId user, const UserFeedQueue& q) {
    if (dir_.empty()) return;
    nlohmann::json j;
    j["user"] = user.value;
    j["entries"] = nlohmann::json::array();
    for (const auto& e : q.entries()) j["entries"].push_back({{"post", e.post.value}, {"read", e.read}});
    write_file_atomic(dir_ / (std::to_string(user.value) + ".json"), j.dump(), sync_);
}

bool FeedStore::push(UserId user, PostId post) {
    std::lock_guard lock(mu_);
    auto& q = queue_locked(user);
    const bool added = q.push(post);
    if (added) persist_locked(user, q);
    return added;
}

bool FeedStore::mark_read(UserId user, PostId post) {
    std::lock_guard lock(mu_);
    auto& q = queue_locked(user);
    const bool changed = q.mark_read(post);
    if (changed) persist_locked(user, q);
    return changed;
}

void FeedStore::mark_read(UserId user, const std::vector<PostId>& posts) {
    std::lock_guard lock(mu_);
    auto& q = queue_locked(user);
    bool changed = false;
    for (PostId p : posts) changed = q.mark_read(p) || changed;
    if (changed) persist_locked(user, q);
}

std::vector<PostId> FeedStore::unread(UserId user) {
    std::lock_guard lock(mu_);
    return queue_locked(user).unread();
}

std::size_t FeedStore::size(UserId user) {
    std::lock_guard lock(mu_);
    return queue_locked(user).size();
}

}  // namespace dimrank
