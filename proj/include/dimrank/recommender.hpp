#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stop_token>
#include <string>
#include <vector>

#include "dimrank/records.hpp"
#include "dimrank/store.hpp"

namespace dimrank {

enum class Pruning { exhaustive, embedding_knn };

Pruning parse_pruning(const std::string& s);
const char* to_string(Pruning p);

struct RecommenderConfig {
    double tau_rec = 0.5;
    Pruning pruning = Pruning::exhaustive;
    std::size_t knn_k = 200;
    // Above this many users, exhaustive mode falls back to knn pruning.
    std::size_t exhaustive_max_users = 10000;

    void validate() const;
};

/// The document projected into user space: the gradient of the logit with
/// respect to the user vector, taken at the zero user.
std::vector<float> knn_query(const ModelWeights& weights, std::span<const float> doc,
                             const ContextFeatures& context);

/// Users worth scoring for a post. Exhaustive: every user. Knn: the knn_k
/// users whose vectors are most cosine-similar to knn_query, plus the
/// author. Returned sorted by id.
std::vector<UserId> candidate_users(const Post& post, const ModelState& model,
                                    const std::vector<UserId>& users,
                                    const RecommenderConfig& config, std::int64_t now = 0);

struct RoutingDecision {
    PostId post;
    std::vector<UserId> candidates;
    std::vector<float> scores;        // parallel to candidates; author scored as NaN
    std::vector<UserId> delivered;    // score >= tau_rec, author excluded
};

/// Scores a post for its candidate users under one snapshot; pure.
RoutingDecision route_post(const Post& post, const ModelState& model,
                           const std::vector<UserId>& users, std::int64_t now,
                           const RecommenderConfig& config);

struct FeedItem {
    Post post;
    float score = 0.0f;
};

struct RecommenderStats {
    std::uint64_t posts = 0;
    std::uint64_t deliveries = 0;
};

/// The recommendation server: for each post in Q_new, pushes it into the
/// feed of every candidate user the model predicts will like it. Reads the
/// model only through published snapshots.
class Recommender {
public:
    static constexpr const char* kCursor = "recommender";
    using Clock = std::function<std::int64_t()>;

    Recommender(Store& store, RecommenderConfig config, Clock clock = {});

    /// Handles one post from Q_new; nullopt when none is available.
    std::optional<RoutingDecision> process_next(bool block, std::stop_token stop = {});
    RecommenderStats run(std::stop_token stop, bool follow);
    std::uint64_t run_until_idle();

    /// Up to `limit` unread posts ranked by score under the latest snapshot,
    /// ties by ascending post id. Marks them read.
    std::vector<FeedItem> fetch_feed(UserId user, std::size_t limit);

    const RecommenderConfig& config() const { return config_; }

private:
    SnapshotHandle snapshot() const;

    Store& store_;
    RecommenderConfig config_;
    Clock clock_;
};

}  // namespace dimrank
