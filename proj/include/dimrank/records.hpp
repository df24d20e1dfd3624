#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "dimrank/ids.hpp"
#include "dimrank/model.hpp"

namespace dimrank {

struct Post {
    PostId post_id;
    UserId author_user_id;
    std::string text;
    std::optional<std::string> url;
    std::int64_t created_at = 0;

    bool operator==(const Post&) const = default;
};

nlohmann::json to_json(const Post& post);
Post post_from_json(const nlohmann::json& j);

/// One labeled training record. example_id is its position in Q_train and
/// is not part of the encoded payload.
struct Example {
    std::uint64_t example_id = 0;
    UserId user;
    PostId post;
    std::int64_t timestamp = 0;
    SessionKind session = SessionKind::browse;
    Label label;

    ContextFeatures context() const { return featurize_context(timestamp, session); }
    bool operator==(const Example&) const = default;
};

std::vector<std::byte> encode_example(const Example& e);
Example decode_example(std::span<const std::byte> bytes, std::uint64_t example_id);

std::vector<std::byte> encode_post_id(PostId id);
PostId decode_post_id(std::span<const std::byte> bytes);

}  // namespace dimrank
