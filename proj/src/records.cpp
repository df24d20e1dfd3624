#include "dimrank/records.hpp"

#include "dimrank/io.hpp"

namespace dimrank {

nlohmann::json to_json(const Post& post) {
    nlohmann::json j;
    j["post_id"] = post.post_id.value;
    j["author_user_id"] = post.author_user_id.value;
    j["text"] = post.text;
    j["url"] = post.url ? nlohmann::json(*post.url) : nlohmann::json(nullptr);
    j["created_at"] = post.created_at;
    return j;
}

Post post_from_json(const nlohmann::json& j) {
    Post p;
    p.post_id = PostId{j.at("post_id").get<std::uint64_t>()};
    p.author_user_id = UserId{j.at("author_user_id").get<std::uint64_t>()};
    p.text = j.at("text").get<std::string>();
    if (j.contains("url") && !j["url"].is_null()) p.url = j["url"].get<std::string>();
    p.created_at = j.at("created_at").get<std::int64_t>();
    return p;
}

namespace {
constexpr std::uint8_t kExampleFormat = 1;
}

std::vector<std::byte> encode_example(const Example& e) {
    ByteWriter w;
    w.put(kExampleFormat);
    w.put(e.user.value);
    w.put(e.post.value);
    w.put(e.timestamp);
    w.put(static_cast<std::uint8_t>(e.session));
    w.put(e.label.target);
    w.put(e.label.magnitude);
    w.put(static_cast<std::uint8_t>(e.label.source));
    return w.take();
}

Example decode_example(std::span<const std::byte> bytes, std::uint64_t example_id) {
    ByteReader<IoError> r(bytes);
    if (r.get<std::uint8_t>() != kExampleFormat) throw IoError("unknown example record format");
    Example e;
    e.example_id = example_id;
    e.user = UserId{r.get<std::uint64_t>()};
    e.post = PostId{r.get<std::uint64_t>()};
    e.timestamp = r.get<std::int64_t>();
    const auto session = r.get<std::uint8_t>();
    if (session > 1) throw IoError("bad session kind in example record");
    e.session = static_cast<SessionKind>(session);
    e.label.target = r.get<std::uint8_t>();
    e.label.magnitude = r.get<float>();
    const auto source = r.get<std::uint8_t>();
    if (source > 1) throw IoError("bad label source in example record");
    e.label.source = static_cast<LabelSource>(source);
    return e;
}

std::vector<std::byte> encode_post_id(PostId id) {
    ByteWriter w;
    w.put(id.value);
    return w.take();
}

PostId decode_post_id(std::span<const std::byte> bytes) {
    ByteReader<IoError> r(bytes);
    return PostId{r.get<std::uint64_t>()};
}

}  // namespace dimrank
