#include "dimrank/model.hpp"

namespace dimrank {

ContextFeatures featurize_context(std::int64_t timestamp, SessionKind kind) {
    ContextFeatures c;
    const std::int64_t seconds_of_day = ((timestamp % 86400) + 86400) % 86400;
    const auto bucket = static_cast<std::size_t>(seconds_of_day / 3600 / 6);
    c.values[bucket] = 1.0f;
    c.values[kTimeBuckets + static_cast<std::size_t>(kind)] = 1.0f;
    return c;
}

const char* to_string(SessionKind kind) {
    return kind == SessionKind::search ? "search" : "browse";
}

SessionKind parse_session_kind(const std::string& s) {
    if (s == "browse") return SessionKind::browse;
    if (s == "search") return SessionKind::search;
    throw InvalidArgument("unknown session kind '" + s + "'");
}

Label Label::make(bool like, double magnitude, LabelSource source) {
    Label l;
    l.target = like ? 1 : 0;
    l.magnitude = static_cast<float>(magnitude);
    l.source = source;
    if (!(magnitude > 0.0 && magnitude <= 1.0)) {
        throw InvalidLabel("label magnitude must be in (0, 1], got " + std::to_string(magnitude));
    }
    return l;
}

void Label::validate() const {
    if (target > 1) throw InvalidLabel("label target must be 0 or 1");
    if (!(magnitude > 0.0f && magnitude <= 1.0f)) {
        throw InvalidLabel("label magnitude must be in (0, 1], got " + std::to_string(magnitude));
    }
}

}  // namespace dimrank
