#include "dimrank/state.hpp"

#include <algorithm>
#include <cmath>

namespace dimrank {

std::optional<std::span<const float>> EmbeddingTable::find(std::uint64_t id) const {
    auto it = rows_.find(id);
    if (it == rows_.end()) return std::nullopt;
    return row_at(it->second);
}

std::span<float> EmbeddingTable::mutable_row(std::uint64_t id) {
    auto it = rows_.find(id);
    if (it == rows_.end()) throw InvalidArgument("no embedding row for id " + std::to_string(id));
    return {data_.data() + it->second * dim_, dim_};
}

std::span<float> EmbeddingTable::insert(std::uint64_t id, std::span<const float> values) {
    if (values.size() != dim_) {
        throw DimensionMismatch("embedding length " + std::to_string(values.size()) +
                                " != table dimension " + std::to_string(dim_));
    }
    if (!rows_.emplace(id, ids_.size()).second) {
        throw InvalidArgument("embedding row " + std::to_string(id) + " already exists");
    }
    ids_.push_back(id);
    data_.insert(data_.end(), values.begin(), values.end());
    return {data_.data() + (ids_.size() - 1) * dim_, dim_};
}

bool EmbeddingTable::operator==(const EmbeddingTable& other) const {
    if (dim_ != other.dim_ || ids_.size() != other.ids_.size()) return false;
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        const auto theirs = other.find(ids_[i]);
        if (!theirs) return false;
        const auto mine = row_at(i);
        if (!std::equal(mine.begin(), mine.end(), theirs->begin())) return false;
    }
    return true;
}

ModelState ModelState::fresh(const ModelDims& dims, std::uint64_t seed) {
    ModelState s;
    Rng rng(splitmix64(seed));
    s.weights = ModelWeights::random(dims, rng);
    s.users = EmbeddingTable(dims.user_dim);
    s.docs = EmbeddingTable(dims.doc_dim);
    s.seed = seed;
    return s;
}

void ModelState::record_like(UserId user, PostId post) {
    auto& h = liked_history[user];
    h.push_back(post);
    if (h.size() > kLikedHistory) h.erase(h.begin());
}

std::vector<float> cold_start_user(const ModelState& state, UserId user) {
    const std::size_t n = state.dims().user_dim;
    Rng rng = entity_rng(state.seed, EntityKind::user, user.value);
    const double a = 1.0 / std::sqrt(static_cast<double>(n));
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.uniform(-a, a));
    return v;
}

std::vector<float> cold_start_document(const ModelState& state, PostId post, UserId author) {
    const std::size_t m = state.dims().doc_dim;
    Rng rng = entity_rng(state.seed, EntityKind::document, post.value);
    std::vector<double> mean(m, 0.0);
    std::size_t count = 0;
    if (auto it = state.liked_history.find(author); it != state.liked_history.end()) {
        for (PostId liked : it->second) {
            if (auto row = state.docs.find(liked.value)) {
                for (std::size_t i = 0; i < m; ++i) mean[i] += (*row)[i];
                ++count;
            }
        }
    }
    std::vector<float> v(m);
    if (count == 0) {
        const double a = 1.0 / std::sqrt(static_cast<double>(m));
        for (auto& x : v) x = static_cast<float>(rng.uniform(-a, a));
        return v;
    }
    for (std::size_t i = 0; i < m; ++i) {
        v[i] = static_cast<float>(mean[i] / static_cast<double>(count) +
                                  rng.uniform(-kDocumentNoise, kDocumentNoise));
    }
    return v;
}

std::span<float> get_or_init_user(ModelState& state, UserId user) {
    if (state.users.contains(user.value)) return state.users.mutable_row(user.value);
    const auto v = cold_start_user(state, user);
    return state.users.insert(user.value, v);
}

std::span<float> get_or_init_document(ModelState& state, PostId post, UserId author) {
    if (state.docs.contains(post.value)) return state.docs.mutable_row(post.value);
    const auto v = cold_start_document(state, post, author);
    return state.docs.insert(post.value, v);
}

Embedding get_or_init_embedding(ModelState& state, UserId user) {
    auto row = get_or_init_user(state, user);
    return {EntityKind::user, user.value, {row.begin(), row.end()}};
}

Embedding get_or_init_embedding(ModelState& state, PostId post, UserId author) {
    auto row = get_or_init_document(state, post, author);
    return {EntityKind::document, post.value, {row.begin(), row.end()}};
}

std::vector<float> user_vector(const ModelState& state, UserId user) {
    if (auto row = state.users.find(user.value)) return {row->begin(), row->end()};
    return cold_start_user(state, user);
}

std::vector<float> document_vector(const ModelState& state, PostId post, UserId author) {
    if (auto row = state.docs.find(post.value)) return {row->begin(), row->end()};
    return cold_start_document(state, post, author);
}

SnapshotHandle SnapshotPublisher::publish(const ModelState& state) {
    auto snap = std::make_shared<Snapshot>();
    snap->state = state;
    std::lock_guard lock(mu_);
    snap->version = next_version_++;
    current_ = std::move(snap);
    return current_;
}

SnapshotHandle SnapshotPublisher::latest() const {
    std::lock_guard lock(mu_);
    return current_;
}

std::uint64_t SnapshotPublisher::version() const {
    std::lock_guard lock(mu_);
    return current_ ? current_->version : 0;
}

}  // namespace dimrank
