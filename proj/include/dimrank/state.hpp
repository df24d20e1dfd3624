#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "dimrank/ids.hpp"
#include "dimrank/model.hpp"
#include "dimrank/rng.hpp"

namespace dimrank {

inline constexpr std::size_t kLikedHistory = 10;
inline constexpr double kDocumentNoise = 0.01;

/// Owned copy of one entity's vector.
struct Embedding {
    EntityKind entity_kind = EntityKind::user;
    std::uint64_t entity_id = 0;
    std::vector<float> values;
};

/// Dense rows keyed by entity id. Rows are never removed and never change
/// length.
class EmbeddingTable {
public:
    explicit EmbeddingTable(std::size_t dim = 0) : dim_(dim) {}

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return ids_.size(); }
    bool contains(std::uint64_t id) const { return rows_.contains(id); }

    std::optional<std::span<const float>> find(std::uint64_t id) const;
    std::span<float> mutable_row(std::uint64_t id);

    /// Inserts a new row; throws InvalidArgument if the id exists and
    /// DimensionMismatch if the length is wrong.
    std::span<float> insert(std::uint64_t id, std::span<const float> values);

    /// Ids in insertion order.
    const std::vector<std::uint64_t>& ids() const { return ids_; }
    std::span<const float> row_at(std::size_t index) const {
        return {data_.data() + index * dim_, dim_};
    }

    /// Same ids with the same values, regardless of insertion order.
    bool operator==(const EmbeddingTable& other) const;

private:
    std::size_t dim_;
    std::vector<std::uint64_t> ids_;
    std::unordered_map<std::uint64_t, std::size_t> rows_;
    std::vector<float> data_;
};

/// Everything the trainer mutates: shared weights, both embedding tables,
/// the per-user liked history used for document cold start, and counters.
struct ModelState {
    ModelWeights weights;
    EmbeddingTable users;
    EmbeddingTable docs;
    std::map<UserId, std::vector<PostId>> liked_history;  // most recent last
    std::uint64_t seed = 0;
    std::uint64_t step = 0;             // SGD steps applied
    std::uint64_t training_cursor = 0;  // Q_train records consumed
    std::uint64_t quarantined = 0;      // examples skipped as non-finite

    /// Fresh state: random weights from the seed, empty tables.
    static ModelState fresh(const ModelDims& dims, std::uint64_t seed);

    const ModelDims& dims() const { return weights.dims; }
    void record_like(UserId user, PostId post);

    bool operator==(const ModelState&) const = default;
};

/// Uniform(-1/sqrt(n), 1/sqrt(n)) per element from the entity's own stream.
std::vector<float> cold_start_user(const ModelState& state, UserId user);

/// Mean of the author's last liked-document vectors plus Uniform(-0.01, 0.01)
/// noise; Uniform(-1/sqrt(m), 1/sqrt(m)) when the author has no history.
std::vector<float> cold_start_document(const ModelState& state, PostId post, UserId author);

/// Returns the stored row, creating it via the cold-start rule on first use.
std::span<float> get_or_init_user(ModelState& state, UserId user);
std::span<float> get_or_init_document(ModelState& state, PostId post, UserId author);

Embedding get_or_init_embedding(ModelState& state, UserId user);
Embedding get_or_init_embedding(ModelState& state, PostId post, UserId author);

/// Stored row or the cold-start vector, without mutating anything.
std::vector<float> user_vector(const ModelState& state, UserId user);
std::vector<float> document_vector(const ModelState& state, PostId post, UserId author);

/// Immutable published view of the model.
struct Snapshot {
    std::uint64_t version = 0;
    ModelState state;
};

using SnapshotHandle = std::shared_ptr<const Snapshot>;

/// Single publisher, many readers. Readers keep whatever handle they took;
/// later publishes never touch it.
class SnapshotPublisher {
public:
    SnapshotHandle publish(const ModelState& state);
    SnapshotHandle latest() const;
    std::uint64_t version() const;

private:
    mutable std::mutex mu_;
    SnapshotHandle current_;
    std::uint64_t next_version_ = 1;
};

}  // namespace dimrank
