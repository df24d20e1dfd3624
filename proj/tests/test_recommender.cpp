#include <algorithm>
#include <cmath>

#include "doctest.h"

#include "dimrank/recommender.hpp"
#include "dimrank/trainer.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"
#include "support/worlds.hpp"

using namespace dimrank;
using dimrank::testing::TempDir;

namespace {

constexpr std::int64_t kNow = 1700000000;

std::vector<UserId> user_ids(std::size_t n) {
    std::vector<UserId> out;
    for (std::uint64_t i = 0; i < n; ++i) out.push_back(UserId{i});
    return out;
}

Post make_post(std::uint64_t id, std::uint64_t author) {
    return Post{PostId{id}, UserId{author}, "post", std::nullopt, kNow};
}

ModelState trained_cluster_model(const testing::ClusterWorld& world, std::uint64_t seed, int passes) {
    TrainerConfig cfg;
    cfg.eta_emb = 5.0;
    auto s = ModelState::fresh(ModelDims{}, seed);
    std::uint64_t id = 0;
    for (int p = 0; p < passes; ++p) {
        for (const auto& pair : world.train) {
            sgd_step(world.example(pair, id++), world.doc_author[pair.doc.value], s, cfg);
        }
    }
    return s;
}

struct Fixture {
    TempDir dir{"rec"};
    Store store{dir.path(), StoreOptions{false}};

    Fixture(std::size_t users, ModelState state) {
        for (std::size_t i = 0; i < users; ++i) store.users().add();
        store.snapshots().publish(state);
    }
    PostId post(std::uint64_t author) {
        const auto p = store.posts().add(UserId{author}, "text", std::nullopt, kNow);
        store.new_queue().append(encode_post_id(p.post_id));
        return p.post_id;
    }
};

Recommender::Clock fixed_clock() {
    return [] { return kNow; };
}

}  // namespace

TEST_CASE("config validation and parsing") {
    RecommenderConfig c;
    CHECK_NOTHROW(c.validate());
    c.tau_rec = 1.0;
    CHECK_THROWS_AS(c.validate(), InvalidConfig);
    c.tau_rec = 0.0;
    CHECK_THROWS_AS(c.validate(), InvalidConfig);
    c = {};
    c.knn_k = 0;
    CHECK_THROWS_AS(c.validate(), InvalidConfig);
    CHECK(parse_pruning("exhaustive") == Pruning::exhaustive);
    CHECK(parse_pruning("embedding-knn") == Pruning::embedding_knn);
    CHECK_THROWS_AS(parse_pruning("lsh"), InvalidConfig);
}

TEST_CASE("exhaustive candidates are every user") {
    const auto s = ModelState::fresh(ModelDims{}, 1);
    CHECK(candidate_users(make_post(0, 1), s, user_ids(3), RecommenderConfig{}) == user_ids(3));
}

TEST_CASE("knn with k at least the user count equals exhaustive") {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const auto s = ModelState::fresh(ModelDims{}, 100 + trial);
        const std::size_t n = 1 + rng.below(40);
        RecommenderConfig knn;
        knn.pruning = Pruning::embedding_knn;
        knn.knn_k = n + rng.below(3);
        const auto post = make_post(rng.below(50), rng.below(n));
        CHECK(candidate_users(post, s, user_ids(n), knn) ==
              candidate_users(post, s, user_ids(n), RecommenderConfig{}));
    }
}

TEST_CASE("knn always includes the author") {
    const auto s = ModelState::fresh(ModelDims{}, 9);
    RecommenderConfig knn;
    knn.pruning = Pruning::embedding_knn;
    knn.knn_k = 2;
    for (std::uint64_t author = 0; author < 30; ++author) {
        const auto c = candidate_users(make_post(author, author), s, user_ids(30), knn);
        CHECK(c.size() >= 2);
        CHECK(c.size() <= 3);
        CHECK(std::find(c.begin(), c.end(), UserId{author}) != c.end());
        CHECK(std::is_sorted(c.begin(), c.end()));
    }
}

TEST_CASE("knn query is the user gradient of the logit at zero") {
    using testing::RawNet;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto s = ModelState::fresh(ModelDims{}, seed);
        const auto doc = cold_start_user(s, UserId{seed});  // any vector of length m
        const auto ctx = featurize_context(kNow, SessionKind::browse);
        const auto q = knn_query(s.weights, doc, ctx);

        const auto& w = s.weights;
        const std::size_t in = w.dims.input_dim();
        RawNet net{w.dims.user_dim, w.dims.doc_dim, w.dims.context_dim, w.dims.hidden, {}, {}, {}, w.b2};
        for (std::size_t j = 0; j < w.dims.hidden; ++j) {
            net.w1.emplace_back(w.w1.begin() + static_cast<std::ptrdiff_t>(j * in),
                                w.w1.begin() + static_cast<std::ptrdiff_t>((j + 1) * in));
        }
        net.b1.assign(w.b1.begin(), w.b1.end());
        net.w2.assign(w.w2.begin(), w.w2.end());
        std::vector<double> u(w.dims.user_dim, 0.0);
        const std::vector<double> d(doc.begin(), doc.end());
        const std::vector<double> c(ctx.values.begin(), ctx.values.end());
        auto logit = [&] {
            const long double p = testing::oracle_score(net, u, d, c);
            return std::log(p / (1.0L - p));
        };
        for (std::size_t i = 0; i < u.size(); ++i) {
            const auto numeric = testing::central_difference(logit, u[i], 1e-6);
            CHECK(testing::relative_error(q[i], static_cast<double>(numeric), 1e-4) < 1e-3);
        }
    }
}

TEST_CASE("knn with one neighbour finds the document's cluster") {
    const auto world = testing::make_cluster_world(50, 500, 20, 0, 2);
    const auto s = trained_cluster_model(world, 2, 3);
    RecommenderConfig knn;
    knn.pruning = Pruning::embedding_knn;
    knn.knn_k = 1;
    int hits = 0;
    for (std::uint64_t d = 0; d < 500; ++d) {
        const auto post = Post{PostId{d}, world.doc_author[d], "x", std::nullopt, kNow};
        auto c = candidate_users(post, s, user_ids(50), knn, kNow);
        // The neighbour is whichever member is not the appended author.
        UserId pick = c.size() == 1 ? c[0] : (c[0] == post.author_user_id ? c[1] : c[0]);
        if (world.user_cluster[pick.value] == world.doc_cluster[d]) ++hits;
    }
    MESSAGE("in-cluster rate " << hits / 500.0);
    CHECK(hits >= 450);
}

TEST_CASE("delivery is exactly score at or above the threshold, never to the author") {
    Rng rng(31);
    for (int trial = 0; trial < 30; ++trial) {
        const auto s = ModelState::fresh(ModelDims{}, 500 + trial);
        RecommenderConfig cfg;
        cfg.tau_rec = rng.uniform(0.2, 0.8);
        const auto post = make_post(trial, rng.below(20));
        const auto d = route_post(post, s, user_ids(20), kNow, cfg);
        REQUIRE(d.scores.size() == d.candidates.size());
        std::vector<UserId> expected;
        const auto doc = document_vector(s, post.post_id, post.author_user_id);
        const auto ctx = featurize_context(kNow, SessionKind::browse);
        for (std::size_t i = 0; i < d.candidates.size(); ++i) {
            const UserId u = d.candidates[i];
            if (u == post.author_user_id) {
                CHECK(std::isnan(d.scores[i]));
                continue;
            }
            const float direct = score<float>(user_vector(s, u), doc, ctx.values, s.weights);
            CHECK(d.scores[i] == direct);
            if (direct >= cfg.tau_rec) expected.push_back(u);
        }
        CHECK(d.delivered == expected);
    }
}

TEST_CASE("a saturated model delivers to everyone but the author") {
    auto s = ModelState::fresh(ModelDims{}, 3);
    s.weights.b2 = 50.0f;
    Fixture f(4, s);
    Recommender rec(f.store, RecommenderConfig{}, fixed_clock());
    f.post(2);
    const auto d = rec.process_next(false);
    REQUIRE(d.has_value());
    CHECK(d->delivered == std::vector<UserId>{UserId{0}, UserId{1}, UserId{3}});
    for (std::uint64_t u : {0, 1, 3}) {
        CHECK(f.store.feeds().unread(UserId{u}) == std::vector<PostId>{PostId{0}});
    }
    CHECK(f.store.feeds().unread(UserId{2}).empty());
    CHECK(f.store.new_queue().cursor_position(Recommender::kCursor) == 1);
    CHECK_FALSE(rec.process_next(false).has_value());
}

TEST_CASE("a threshold above every score delivers nothing") {
    const auto s = ModelState::fresh(ModelDims{}, 8);
    const auto post = make_post(0, 0);
    const auto all = route_post(post, s, user_ids(30), kNow, RecommenderConfig{});
    float top = 0.0f;
    for (float x : all.scores) {
        if (!std::isnan(x)) top = std::max(top, x);
    }
    RecommenderConfig high;
    high.tau_rec = std::nextafter(static_cast<double>(top), 1.0);
    CHECK(route_post(post, s, user_ids(30), kNow, high).delivered.empty());
    high.tau_rec = top;
    CHECK(route_post(post, s, user_ids(30), kNow, high).delivered.size() >= 1);
}

TEST_CASE("a trained two-cluster model routes posts to their own cluster") {
    const auto world = testing::make_cluster_world(50, 500, 20, 0, 1);
    const auto s = trained_cluster_model(world, 1, 3);
    const auto users = user_ids(50);
    double same = 0, same_n = 0, cross = 0, cross_n = 0;
    for (std::uint64_t d = 0; d < 500; ++d) {
        // Fresh ids so the document starts from its author's history.
        const auto post = Post{PostId{10000 + d}, world.doc_author[d], "x", std::nullopt, kNow};
        const auto decision = route_post(post, s, users, kNow, RecommenderConfig{});
        for (UserId u : users) {
            if (u == post.author_user_id) continue;
            const bool got = std::binary_search(decision.delivered.begin(), decision.delivered.end(), u);
            if (world.user_cluster[u.value] == world.doc_cluster[d]) {
                same += got;
                ++same_n;
            } else {
                cross += got;
                ++cross_n;
            }
        }
    }
    MESSAGE("same " << same / same_n << " cross " << cross / cross_n);
    CHECK(same / same_n >= 0.9);
    CHECK(cross / cross_n <= 0.2);
}

TEST_CASE("fetch_feed ranks, limits and marks read") {
    auto s = ModelState::fresh(ModelDims{}, 21);
    s.weights.b2 = 50.0f;
    Fixture f(2, s);
    Recommender rec(f.store, RecommenderConfig{}, fixed_clock());
    CHECK(rec.fetch_feed(UserId{1}, 10).empty());
    for (int i = 0; i < 5; ++i) f.post(0);
    CHECK(rec.run_until_idle() == 5);

    // Re-score with a model that is not saturated.
    s.weights.b2 = 0.0f;
    f.store.snapshots().publish(s);
    const auto ctx = featurize_context(kNow, SessionKind::browse);
    const auto u = user_vector(s, UserId{1});
    std::vector<std::pair<float, std::uint64_t>> expected;
    for (std::uint64_t p = 0; p < 5; ++p) {
        expected.emplace_back(score<float>(u, document_vector(s, PostId{p}, UserId{0}), ctx.values, s.weights), p);
    }
    std::sort(expected.begin(), expected.end(), [](auto a, auto b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });

    const auto first = rec.fetch_feed(UserId{1}, 1);
    REQUIRE(first.size() == 1);
    CHECK(first[0].post.post_id == PostId{expected[0].second});
    CHECK(first[0].score == expected[0].first);

    const auto rest = rec.fetch_feed(UserId{1}, 10);
    REQUIRE(rest.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(rest[i].post.post_id == PostId{expected[i + 1].second});
    }
    CHECK(rec.fetch_feed(UserId{1}, 10).empty());
    CHECK_THROWS_AS(rec.fetch_feed(UserId{9}, 10), UnknownUser);
}

TEST_CASE("knn mode refuses different user and document dimensions") {
    RecommenderConfig knn;
    knn.pruning = Pruning::embedding_knn;
    const ModelDims dims{16, 32, kContextDim, 64};
    Fixture f(2, ModelState::fresh(dims, 1));
    CHECK_THROWS_AS(Recommender(f.store, knn, fixed_clock()), InvalidConfig);
    CHECK_NOTHROW(Recommender(f.store, RecommenderConfig{}, fixed_clock()));
    CHECK_THROWS_AS(candidate_users(make_post(0, 0), ModelState::fresh(dims, 1), user_ids(2), knn),
                    InvalidConfig);
}

TEST_CASE("a post that cannot be routed stays unacknowledged") {
    Fixture f(2, ModelState::fresh(ModelDims{}, 1));
    Recommender rec(f.store, RecommenderConfig{}, fixed_clock());
    f.store.new_queue().append(encode_post_id(PostId{77}));
    CHECK_THROWS_AS(rec.process_next(false), UnknownPost);
    CHECK(f.store.new_queue().cursor_position(Recommender::kCursor) == 0);
}

TEST_CASE("missing embeddings do not change the snapshot") {
    const auto s = ModelState::fresh(ModelDims{}, 2);
    Fixture f(3, s);
    Recommender rec(f.store, RecommenderConfig{}, fixed_clock());
    f.post(0);
    rec.run_until_idle();
    CHECK(f.store.snapshots().latest()->state == s);
}
