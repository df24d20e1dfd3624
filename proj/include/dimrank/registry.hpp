#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "dimrank/ids.hpp"
#include "dimrank/records.hpp"

namespace dimrank {

/// Registered users, persisted one JSON object per line. An empty path keeps
/// everything in memory.
class UserRegistry {
public:
    explicit UserRegistry(std::filesystem::path path = {}, bool sync = true);

    UserId add();
    bool contains(UserId id);
    std::vector<UserId> all();
    std::size_t size();

private:
    void refresh_locked();

    std::filesystem::path path_;
    bool sync_;
    std::mutex mu_;
    std::vector<UserId> users_;
    std::uintmax_t loaded_bytes_ = 0;
};

/// Posts, persisted as posts.jsonl. Lookups that miss re-read the file so a
/// process sees posts created by another process.
class PostStore {
public:
    explicit PostStore(std::filesystem::path path = {}, bool sync = true);

    /// Assigns the next post id. Throws InvalidArgument on empty text.
    Post add(UserId author, std::string text, std::optional<std::string> url,
             std::int64_t created_at);

    std::optional<Post> find(PostId id);
    bool contains(PostId id) { return find(id).has_value(); }
    std::size_t size();
    std::vector<Post> all();

private:
    void refresh_locked();

    std::filesystem::path path_;
    bool sync_;
    std::mutex mu_;
    std::map<PostId, Post> posts_;
    std::uintmax_t loaded_bytes_ = 0;
};

}  // namespace dimrank
