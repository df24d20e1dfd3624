#pragma once

// Seeded synthetic worlds with a known ground truth.

#include <cstdint>
#include <vector>

#include "dimrank/records.hpp"
#include "dimrank/state.hpp"
#include "dimrank/trainer.hpp"

namespace dimrank::testing {

/// Users and documents split into two clusters; a user likes a document
/// exactly when they share a cluster. Each document is authored by a member
/// of its own cluster.
struct ClusterWorld {
    struct Pair {
        UserId user;
        PostId doc;
        bool like = false;
        std::int64_t timestamp = 0;
    };

    std::vector<int> user_cluster;
    std::vector<int> doc_cluster;
    std::vector<UserId> doc_author;
    std::vector<Pair> train;     // shuffled
    std::vector<Pair> held_out;  // pairs absent from train

    std::size_t users() const { return user_cluster.size(); }
    std::size_t docs() const { return doc_cluster.size(); }
    Example example(const Pair& p, std::uint64_t id) const;
};

ClusterWorld make_cluster_world(std::size_t users, std::size_t docs, std::size_t labels_per_user,
                                std::size_t held_out_per_user, std::uint64_t seed);

/// One SGD pass over world.train in order, straight through sgd_step.
ModelState train_one_pass(const ClusterWorld& world, const ModelDims& dims,
                          const TrainerConfig& config);

/// Held-out AUC of the model's like-probability.
double held_out_auc(const ClusterWorld& world, const ModelState& model);

/// Two-topic search world: a ClusterWorld whose documents read
/// "news <topic word> item<id>", so the query "news" scores every document
/// the same under BM25.
struct TopicTrial {
    UserId user;
    int preferred_topic = 0;
    int top_topic = 0;         // topic of the rank-1 result
    double top_bm25 = 0.0;
    double bm25_spread = 0.0;  // max - min BM25 over the returned results
};

TopicTrial run_topic_trial(std::uint64_t seed, const TrainerConfig& config, std::size_t passes);

}  // namespace dimrank::testing
