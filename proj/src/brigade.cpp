#include "dimrank/brigade.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "dimrank/recommender.hpp"
#include "dimrank/rng.hpp"
#include "dimrank/store.hpp"
#include "dimrank/trainer.hpp"

namespace dimrank {

double reddit_hot(std::uint64_t ups, std::uint64_t downs, std::int64_t created_at,
                  std::int64_t epoch0) {
    const double s = static_cast<double>(ups) - static_cast<double>(downs);
    const double sign = s > 0 ? 1.0 : (s < 0 ? -1.0 : 0.0);
    return sign * std::log10(std::max(std::abs(s), 1.0)) +
           static_cast<double>(created_at - epoch0) / kHotFreshnessSeconds;
}

void RedditFeedState::add_post(PostId post, std::int64_t created_at) {
    if (!posts.emplace(post, RedditPost{post, created_at}).second) {
        throw InvalidArgument("post " + std::to_string(post.value) + " already in the feed");
    }
}

double RedditFeedState::hot(PostId post) const {
    const auto& p = posts.at(post);
    return reddit_hot(p.ups, p.downs, p.created_at, params.epoch0);
}

void reddit_feed_step(RedditFeedState& state, std::span<const Vote> votes) {
    for (const Vote& v : votes) {
        auto it = state.posts.find(v.post);
        if (it == state.posts.end()) {
            throw InvalidArgument("vote on unknown post " + std::to_string(v.post.value));
        }
        if (it->second.killed) {
            throw InvalidArgument("vote on killed post " + std::to_string(v.post.value));
        }
    }
    for (const Vote& v : votes) {
        RedditPost& p = state.posts.at(v.post);
        // Votes cast in the same batch after the kill no longer count.
        if (p.killed) continue;
        if (v.direction > 0) {
            ++p.ups;
        } else {
            ++p.downs;
        }
        if (p.net() <= state.params.kill_threshold &&
            v.time - p.created_at <= state.params.kill_window) {
            p.killed = true;
        }
    }
    std::vector<std::pair<double, PostId>> live;
    for (const auto& [id, p] : state.posts) {
        if (!p.killed) live.emplace_back(state.hot(id), id);
    }
    std::sort(live.begin(), live.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    state.visible.clear();
    for (std::size_t i = 0; i < live.size() && i < state.params.hot_list_size; ++i) {
        state.visible.push_back(live[i].second);
    }
}

Algorithm parse_algorithm(const std::string& s) {
    if (s == "reddit") return Algorithm::reddit;
    if (s == "dimensionrank") return Algorithm::dimensionrank;
    throw InvalidConfig("unknown algorithm '" + s + "' (expected reddit or dimensionrank)");
}

const char* to_string(Algorithm a) { return a == Algorithm::reddit ? "reddit" : "dimensionrank"; }

void SimConfig::validate() const {
    if (community < 1) throw InvalidConfig("community must have at least one member");
    if (!(p_like > 0.0 && p_like <= 1.0)) throw InvalidConfig("p_like must be in (0, 1]");
    if (!(p_like_off_topic >= 0.0 && p_like_off_topic <= 1.0)) {
        throw InvalidConfig("p_like_off_topic must be in [0, 1]");
    }
    if (!(on_topic_fraction >= 0.0 && on_topic_fraction <= 1.0)) {
        throw InvalidConfig("on_topic_fraction must be in [0, 1]");
    }
    if (rounds < 1) throw InvalidConfig("rounds must be >= 1");
    if (latent_dim < 1) throw InvalidConfig("latent_dim must be >= 1");
    if (round_seconds < 1) throw InvalidConfig("round_seconds must be >= 1");
    for (double a : {community_activity, attacker_activity}) {
        if (!(a >= 0.0 && a <= 1.0)) throw InvalidConfig("activity probabilities must be in [0, 1]");
    }
    if (feed_limit < 1) throw InvalidConfig("feed_limit must be >= 1");
    if (reddit.hot_list_size < 1) throw InvalidConfig("hot_list_size must be >= 1");
    if (reddit.kill_window < 0) throw InvalidConfig("kill_window must be >= 0");
    if (!(eta_w > 0.0) || !(eta_emb > 0.0)) throw InvalidConfig("learning rates must be > 0");
    if (!(tau_rec > 0.0 && tau_rec < 1.0)) throw InvalidConfig("tau_rec must be in (0, 1)");
}

namespace {

struct SimPost {
    PostId id;
    std::size_t round = 0;
    std::size_t author = 0;  // community member index
    bool on_topic = false;
    std::vector<bool> would_like;  // per community member
    bool good = false;
    bool evaluated = false;
    std::vector<bool> seen;  // per community member
    std::size_t seen_count = 0;

    void mark_seen(std::size_t member) {
        if (!seen[member]) {
            seen[member] = true;
            ++seen_count;
        }
    }
};

/// Everything random about the population, drawn once so both arms face
/// the same posts and the same activity schedule.
struct World {
    std::vector<std::vector<double>> latent;              // community tastes
    std::vector<SimPost> posts;                           // in creation order
    std::vector<std::vector<std::size_t>> active_order;  // per round, agent indices

    std::size_t agents = 0;
};

std::vector<double> unit(std::vector<double> v) {
    double n = 0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n > 0) {
        for (double& x : v) x /= n;
    }
    return v;
}

std::vector<double> gaussian(Rng& rng, std::size_t dim, double scale) {
    std::vector<double> v(dim);
    for (double& x : v) x = rng.normal() * scale;
    return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

World build_world(const SimConfig& cfg) {
    World w;
    w.agents = cfg.community + cfg.attackers;
    Rng pop(splitmix64(cfg.seed ^ 0x706f70ULL));
    const auto centroid = unit(gaussian(pop, cfg.latent_dim, 1.0));
    const double per_dim = cfg.latent_noise / std::sqrt(static_cast<double>(cfg.latent_dim));
    for (std::size_t c = 0; c < cfg.community; ++c) {
        auto z = centroid;
        const auto noise = gaussian(pop, cfg.latent_dim, per_dim);
        for (std::size_t i = 0; i < z.size(); ++i) z[i] += noise[i];
        w.latent.push_back(unit(std::move(z)));
    }

    const std::size_t eval_begin = cfg.warmup_rounds;
    const std::size_t eval_end = cfg.rounds > cfg.eval_tail ? cfg.rounds - cfg.eval_tail : 0;
    for (std::size_t r = 0; r < cfg.rounds; ++r) {
        for (std::size_t k = 0; k < cfg.posts_per_round; ++k) {
            SimPost p;
            p.id = PostId{w.posts.size()};
            p.round = r;
            p.author = static_cast<std::size_t>(pop.below(cfg.community));
            p.on_topic = pop.bernoulli(cfg.on_topic_fraction);
            std::vector<double> topic;
            if (p.on_topic) {
                topic = centroid;
                const auto noise = gaussian(pop, cfg.latent_dim, per_dim);
                for (std::size_t i = 0; i < topic.size(); ++i) topic[i] += noise[i];
            } else {
                topic = gaussian(pop, cfg.latent_dim, 1.0);
            }
            topic = unit(std::move(topic));
            std::size_t likers = 0;
            for (std::size_t c = 0; c < cfg.community; ++c) {
                const double prob = dot(w.latent[c], topic) >= 0.5 ? cfg.p_like : cfg.p_like_off_topic;
                const bool like = pop.bernoulli(prob);
                p.would_like.push_back(like);
                likers += like ? 1 : 0;
            }
            p.good = static_cast<double>(likers) >=
                     cfg.good_post_threshold * static_cast<double>(cfg.community);
            p.evaluated = p.good && r >= eval_begin && r < eval_end;
            p.seen.assign(cfg.community, false);
            p.mark_seen(p.author);
            w.posts.push_back(std::move(p));
        }
    }

    Rng act(splitmix64(cfg.seed ^ 0x616374ULL));
    for (std::size_t r = 0; r < cfg.rounds; ++r) {
        std::vector<std::size_t> order;
        for (std::size_t a = 0; a < w.agents; ++a) {
            const double p = a < cfg.community ? cfg.community_activity : cfg.attacker_activity;
            if (act.bernoulli(p)) order.push_back(a);
        }
        act.shuffle(order);
        w.active_order.push_back(std::move(order));
    }
    return w;
}

std::int64_t round_time(const SimConfig& cfg, std::size_t r) {
    return cfg.reddit.epoch0 + static_cast<std::int64_t>(r) * cfg.round_seconds;
}

double mean_seen_fraction(const World& w, const SimConfig& cfg, std::size_t upto_round) {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& p : w.posts) {
        if (p.round > upto_round) break;
        if (!p.good) continue;
        sum += static_cast<double>(p.seen_count) / static_cast<double>(cfg.community);
        ++n;
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

void finish_metrics(const World& w, const SimConfig& cfg, SimMetrics& m) {
    for (const auto& p : w.posts) {
        if (!p.evaluated) continue;
        ++m.good_posts;
        const double frac = static_cast<double>(p.seen_count) / static_cast<double>(cfg.community);
        if (frac < cfg.seen_threshold) ++m.suppressed_posts;
    }
    m.suppression_rate =
        m.good_posts ? static_cast<double>(m.suppressed_posts) / static_cast<double>(m.good_posts) : 0.0;
    m.visibility_rate = 1.0 - m.suppression_rate;
}

SimMetrics run_reddit(const SimConfig& cfg, World& w) {
    SimMetrics m;
    m.algorithm = Algorithm::reddit;
    RedditFeedState feed;
    feed.params = cfg.reddit;
    std::vector<std::vector<bool>> voted(w.posts.size(), std::vector<bool>(w.agents, false));
    std::size_t next_post = 0;

    for (std::size_t r = 0; r < cfg.rounds; ++r) {
        RoundMetrics rm;
        rm.round = r;
        const auto now = round_time(cfg, r);
        while (next_post < w.posts.size() && w.posts[next_post].round == r) {
            feed.add_post(w.posts[next_post].id, now);
            ++next_post;
            ++rm.posts_created;
        }
        reddit_feed_step(feed, {});
        const auto visible = feed.visible;

        std::vector<Vote> votes;
        for (std::size_t agent : w.active_order[r]) {
            for (PostId pid : visible) {
                auto& post = w.posts[pid.value];
                if (voted[pid.value][agent]) continue;
                voted[pid.value][agent] = true;
                if (agent < cfg.community) {
                    post.mark_seen(agent);
                    // Members up-vote what they like and pass over the rest.
                    if (post.would_like[agent]) votes.push_back({agent, pid, +1, now});
                } else {
                    votes.push_back({agent, pid, -1, now});
                }
            }
        }
        std::size_t killed_before = 0;
        for (const auto& [id, p] : feed.posts) killed_before += p.killed ? 1 : 0;
        reddit_feed_step(feed, votes);
        std::size_t killed_after = 0;
        for (const auto& [id, p] : feed.posts) killed_after += p.killed ? 1 : 0;

        rm.labels = votes.size();
        rm.killed = killed_after - killed_before;
        rm.mean_seen_fraction = mean_seen_fraction(w, cfg, r);
        m.rounds.push_back(rm);
    }
    for (const auto& [id, p] : feed.posts) m.killed_posts += p.killed ? 1 : 0;
    finish_metrics(w, cfg, m);
    return m;
}

class TempDir {
public:
    explicit TempDir(std::uint64_t seed) {
        static std::atomic<std::uint64_t> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("dimrank-sim-" + std::to_string(::getpid()) + "-" + std::to_string(seed) + "-" +
                 std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

double mean_like_prob(const ModelState& model, const World& w, std::size_t first_agent,
                      std::size_t last_agent, const SimConfig& cfg) {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& p : w.posts) {
        if (!p.evaluated) continue;
        const auto doc = document_vector(model, p.id, UserId{p.author});
        const auto ctx = featurize_context(round_time(cfg, p.round), SessionKind::browse);
        for (std::size_t a = first_agent; a < last_agent; ++a) {
            const auto u = user_vector(model, UserId{a});
            sum += score<float>(u, doc, context_span(ctx), model.weights);
            ++n;
        }
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

SimMetrics run_dimensionrank(const SimConfig& cfg, World& w) {
    SimMetrics m;
    m.algorithm = Algorithm::dimensionrank;
    TempDir dir(cfg.seed);
    StoreOptions sopts;
    sopts.sync = false;
    Store store(dir.path(), sopts);
    for (std::size_t a = 0; a < w.agents; ++a) {
        if (store.users().add().value != a) throw Error("user ids must match agent indices");
    }

    const ModelDims dims;
    TrainerConfig tcfg;
    tcfg.seed = cfg.seed;
    tcfg.eta_w = cfg.eta_w;
    tcfg.eta_emb = cfg.eta_emb;
    tcfg.checkpoint_every = UINT64_MAX;
    Trainer trainer(store, dims, tcfg);
    const ModelState initial = trainer.state();

    std::int64_t now = 0;
    RecommenderConfig rcfg;
    rcfg.tau_rec = cfg.tau_rec;
    Recommender rec(store, rcfg, [&now] { return now; });

    std::size_t next_post = 0;
    for (std::size_t r = 0; r < cfg.rounds; ++r) {
        RoundMetrics rm;
        rm.round = r;
        now = round_time(cfg, r);
        while (next_post < w.posts.size() && w.posts[next_post].round == r) {
            const auto& sp = w.posts[next_post];
            const Post post = store.posts().add(
                UserId{sp.author}, "post " + std::to_string(sp.id.value), std::nullopt, now);
            if (post.post_id != sp.id) throw Error("post ids must match creation order");
            store.new_queue().append(encode_post_id(post.post_id));
            ++next_post;
            ++rm.posts_created;
        }
        while (auto decision = rec.process_next(false)) rm.deliveries += decision->delivered.size();

        for (std::size_t agent : w.active_order[r]) {
            const UserId user{agent};
            for (const FeedItem& item : rec.fetch_feed(user, cfg.feed_limit)) {
                auto& post = w.posts[item.post.post_id.value];
                bool like = false;
                if (agent < cfg.community) {
                    post.mark_seen(agent);
                    like = post.would_like[agent];
                }
                receive_label(store, user, post.id, now, SessionKind::browse, Label::make(like, 1.0));
                ++rm.labels;
            }
        }
        trainer.run_until_idle();
        rm.mean_seen_fraction = mean_seen_fraction(w, cfg, r);
        m.rounds.push_back(rm);
    }

    finish_metrics(w, cfg, m);
    const ModelState& final_state = trainer.state();
    const std::size_t c = cfg.community, all = w.agents;
    m.attacker_like_prob_initial = mean_like_prob(initial, w, c, all, cfg);
    m.attacker_like_prob_final = mean_like_prob(final_state, w, c, all, cfg);
    m.community_like_prob_initial = mean_like_prob(initial, w, 0, c, cfg);
    m.community_like_prob_final = mean_like_prob(final_state, w, 0, c, cfg);
    return m;
}

}  // namespace

bool SimMetrics::operator==(const SimMetrics& o) const {
    auto same_round = [](const RoundMetrics& a, const RoundMetrics& b) {
        return a.round == b.round && a.posts_created == b.posts_created && a.labels == b.labels &&
               a.killed == b.killed && a.deliveries == b.deliveries &&
               a.mean_seen_fraction == b.mean_seen_fraction;
    };
    return algorithm == o.algorithm && good_posts == o.good_posts &&
           suppressed_posts == o.suppressed_posts && suppression_rate == o.suppression_rate &&
           visibility_rate == o.visibility_rate && killed_posts == o.killed_posts &&
           attacker_like_prob_initial == o.attacker_like_prob_initial &&
           attacker_like_prob_final == o.attacker_like_prob_final &&
           community_like_prob_initial == o.community_like_prob_initial &&
           community_like_prob_final == o.community_like_prob_final &&
           std::equal(rounds.begin(), rounds.end(), o.rounds.begin(), o.rounds.end(), same_round);
}

SimMetrics run_simulation(const SimConfig& config) {
    config.validate();
    World world = build_world(config);
    return config.algorithm == Algorithm::reddit ? run_reddit(config, world)
                                                 : run_dimensionrank(config, world);
}

nlohmann::json to_json(const SimMetrics& m) {
    nlohmann::json j;
    j["algorithm"] = to_string(m.algorithm);
    j["good_posts"] = m.good_posts;
    j["suppressed_posts"] = m.suppressed_posts;
    j["suppression_rate"] = m.suppression_rate;
    j["visibility_rate"] = m.visibility_rate;
    j["killed_posts"] = m.killed_posts;
    if (m.algorithm == Algorithm::dimensionrank) {
        j["attacker_like_prob_initial"] = m.attacker_like_prob_initial;
        j["attacker_like_prob_final"] = m.attacker_like_prob_final;
        j["community_like_prob_initial"] = m.community_like_prob_initial;
        j["community_like_prob_final"] = m.community_like_prob_final;
    }
    auto& series = j["rounds"] = nlohmann::json::array();
    for (const auto& r : m.rounds) {
        series.push_back({{"round", r.round},
                          {"posts_created", r.posts_created},
                          {"labels", r.labels},
                          {"killed", r.killed},
                          {"deliveries", r.deliveries},
                          {"mean_seen_fraction", r.mean_seen_fraction}});
    }
    return j;
}

void write_rounds_csv(std::ostream& out, const SimMetrics& m) {
    out << "round,posts_created,labels,killed,deliveries,mean_seen_fraction\n";
    for (const auto& r : m.rounds) {
        out << r.round << ',' << r.posts_created << ',' << r.labels << ',' << r.killed << ','
            << r.deliveries << ',' << r.mean_seen_fraction << '\n';
    }
}

}  // namespace dimrank
