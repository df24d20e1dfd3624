#include "dimrank/registry.hpp"

#include <fstream>

#include "dimrank/errors.hpp"
#include "dimrank/io.hpp"

namespace dimrank {

namespace {

// Calls fn for every complete line after byte offset `from`; returns the new
// offset. A trailing line without '\n' is a torn write and is left for later.
template <class Fn>
std::uintmax_t read_new_lines(const std::filesystem::path& path, std::uintmax_t from, Fn fn) {
    if (path.empty() || !std::filesystem::exists(path)) return from;
    std::ifstream in(path, std::ios::binary);
    in.seekg(static_cast<std::streamoff>(from));
    std::string line;
    std::uintmax_t offset = from;
    while (std::getline(in, line)) {
        if (in.eof()) break;
        offset += line.size() + 1;
        if (!line.empty()) fn(nlohmann::json::parse(line));
    }
    return offset;
}

}  // namespace

UserRegistry::UserRegistry(std::filesystem::path path, bool sync)
    : path_(std::move(path)), sync_(sync) {
    std::lock_guard lock(mu_);
    refresh_locked();
}

void UserRegistry::refresh_locked() {
    loaded_bytes_ = read_new_lines(path_, loaded_bytes_, [&](const nlohmann::json& j) {
        users_.push_back(UserId{j.at("user_id").get<std::uint64_t>()});
    });
}

UserId UserRegistry::add() {
    std::lock_guard lock(mu_);
    refresh_locked();
    const UserId id{users_.size()};
    if (!path_.empty()) {
        nlohmann::json j;
        j["user_id"] = id.value;
        const auto line = j.dump();
        append_line(path_, line, sync_);
        loaded_bytes_ += line.size() + 1;
    }
    users_.push_back(id);
    return id;
}

bool UserRegistry::contains(UserId id) {
    std::lock_guard lock(mu_);
    if (id.value < users_.size()) return true;
    refresh_locked();
    return id.value < users_.size();
}

std::vector<UserId> UserRegistry::all() {
    std::lock_guard lock(mu_);
    refresh_locked();
    return users_;
}

std::size_t UserRegistry::size() {
    std::lock_guard lock(mu_);
    refresh_locked();
    return users_.size();
}

PostStore::PostStore(std::filesystem::path path, bool sync) : path_(std::move(path)), sync_(sync) {
    std::lock_guard lock(mu_);
    refresh_locked();
}

void PostStore::refresh_locked() {
    loaded_bytes_ = read_new_lines(path_, loaded_bytes_, [&](const nlohmann::json& j) {
        Post p = post_from_json(j);
        posts_.emplace(p.post_id, std::move(p));
    });
}

Post PostStore::add(UserId author, std::string text, std::optional<std::string> url,
                    std::int64_t created_at) {
    if (text.empty()) throw InvalidArgument("post text must be non-empty");
    std::lock_guard lock(mu_);
    refresh_locked();
    Post p;
    p.post_id = PostId{posts_.empty() ? 0 : posts_.rbegin()->first.value + 1};
    p.author_user_id = author;
    p.text = std::move(text);
    p.url = std::move(url);
    p.created_at = created_at;
    if (!path_.empty()) {
        const auto line = to_json(p).dump();
        append_line(path_, line, sync_);
        loaded_bytes_ += line.size() + 1;
    }
    posts_.emplace(p.post_id, p);
    return p;
}

std::optional<Post> PostStore::find(PostId id) {
    std::lock_guard lock(mu_);
    auto it = posts_.find(id);
    if (it == posts_.end()) {
        refresh_locked();
        it = posts_.find(id);
        if (it == posts_.end()) return std::nullopt;
    }
    return it->second;
}

std::size_t PostStore::size() {
    std::lock_guard lock(mu_);
    refresh_locked();
    return posts_.size();
}

std::vector<Post> PostStore::all() {
    std::lock_guard lock(mu_);
    refresh_locked();
    std::vector<Post> out;
    out.reserve(posts_.size());
    for (const auto& [id, p] : posts_) out.push_back(p);
    return out;
}

}  // namespace dimrank
