#pragma once

// Agent-based brigading experiment. A community C authors posts and votes
// by its members' tastes; an attacker group A down-votes every C post it
// sees. The same population runs against a global vote-aggregation feed and
// against the personalized pipeline (real trainer and recommender).

#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "dimrank/ids.hpp"
#include "dimrank/model.hpp"

namespace dimrank {

inline constexpr double kHotFreshnessSeconds = 45000.0;

/// sign(s) * log10(max(|s|, 1)) + (created_at - epoch0) / 45000, s = ups - downs.
double reddit_hot(std::uint64_t ups, std::uint64_t downs, std::int64_t created_at,
                  std::int64_t epoch0 = 0);

struct RedditParams {
    std::int64_t kill_threshold = -5;  // killed when ups - downs <= this ...
    std::int64_t kill_window = 7200;   // ... within this many seconds of creation
    std::size_t hot_list_size = 10;
    std::int64_t epoch0 = 0;
};

struct RedditPost {
    PostId post;
    std::int64_t created_at = 0;
    std::uint64_t ups = 0;
    std::uint64_t downs = 0;
    bool killed = false;

    std::int64_t net() const {
        return static_cast<std::int64_t>(ups) - static_cast<std::int64_t>(downs);
    }
};

struct Vote {
    std::uint64_t voter = 0;  // carried but never consulted by the feed
    PostId post;
    int direction = +1;       // +1 up, -1 down
    std::int64_t time = 0;
};

struct RedditFeedState {
    RedditParams params;
    std::map<PostId, RedditPost> posts;
    std::vector<PostId> visible;  // same list for every user

    void add_post(PostId post, std::int64_t created_at);
    double hot(PostId post) const;
};

/// Applies votes in order, kills posts that cross the threshold inside the
/// window, and recomputes the top-H visible list of live posts. Throws
/// InvalidArgument for votes on unknown or already-killed posts.
void reddit_feed_step(RedditFeedState& state, std::span<const Vote> votes);

enum class Algorithm { reddit, dimensionrank };

Algorithm parse_algorithm(const std::string& s);
const char* to_string(Algorithm a);

struct SimConfig {
    Algorithm algorithm = Algorithm::reddit;
    std::size_t community = 50;
    std::size_t attackers = 50;
    std::size_t rounds = 200;
    std::uint64_t seed = 7;

    double p_like = 0.9;           // on-topic post, community member
    double p_like_off_topic = 0.05;
    double on_topic_fraction = 0.7;
    std::size_t latent_dim = 8;
    double latent_noise = 0.15;

    std::size_t posts_per_round = 1;
    std::int64_t round_seconds = 10800;
    double community_activity = 0.25;  // chance a member is active in a round
    double attacker_activity = 1.0;
    std::size_t feed_limit = 10;

    RedditParams reddit;

    // Personalized arm.
    double eta_w = 0.01;
    double eta_emb = 5.0;
    double tau_rec = 0.5;

    // Posts created before warmup_rounds or in the final eval_tail rounds
    // are excluded from the metrics.
    std::size_t warmup_rounds = 20;
    std::size_t eval_tail = 10;

    double good_post_threshold = 0.8;  // share of C that would like it
    double seen_threshold = 0.5;       // share of C that must see it

    void validate() const;
};

struct RoundMetrics {
    std::size_t round = 0;
    std::size_t posts_created = 0;
    std::size_t labels = 0;  // votes (reddit) or labels (dimensionrank)
    std::size_t killed = 0;
    std::size_t deliveries = 0;
    double mean_seen_fraction = 0.0;  // over good posts created so far
};

struct SimMetrics {
    Algorithm algorithm = Algorithm::reddit;
    std::size_t good_posts = 0;        // evaluated good posts
    std::size_t suppressed_posts = 0;
    double suppression_rate = 0.0;
    double visibility_rate = 1.0;
    std::size_t killed_posts = 0;
    // Mean predicted like-probability of attackers (and of the community) on
    // the evaluated good posts, under the untrained and the final model.
    // Only filled for the dimensionrank arm.
    double attacker_like_prob_initial = 0.0;
    double attacker_like_prob_final = 0.0;
    double community_like_prob_initial = 0.0;
    double community_like_prob_final = 0.0;
    std::vector<RoundMetrics> rounds;

    bool operator==(const SimMetrics&) const;
};

SimMetrics run_simulation(const SimConfig& config);

nlohmann::json to_json(const SimMetrics& m);
void write_rounds_csv(std::ostream& out, const SimMetrics& m);

}  // namespace dimrank
