#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <ostream>

namespace dimrank {

/// Opaque numeric identifier, tagged so user and post ids do not mix.
template <class Tag>
struct Id {
    std::uint64_t value = 0;

    constexpr auto operator<=>(const Id&) const = default;
};

template <class Tag>
std::ostream& operator<<(std::ostream& os, Id<Tag> id) {
    return os << id.value;
}

using UserId = Id<struct UserTag>;
using PostId = Id<struct PostTag>;

enum class EntityKind : std::uint8_t { user = 0, document = 1 };

}  // namespace dimrank

template <class Tag>
struct std::hash<dimrank::Id<Tag>> {
    std::size_t operator()(dimrank::Id<Tag> id) const noexcept {
        return std::hash<std::uint64_t>{}(id.value);
    }
};
