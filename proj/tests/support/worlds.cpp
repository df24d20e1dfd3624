#include "worlds.hpp"

#include <algorithm>
#include <set>

#include "dimrank/model.hpp"
#include "dimrank/search.hpp"
#include "oracles.hpp"

namespace dimrank::testing {

Example ClusterWorld::example(const Pair& p, std::uint64_t id) const {
    Example e;
    e.example_id = id;
    e.user = p.user;
    e.post = p.doc;
    e.timestamp = p.timestamp;
    e.session = SessionKind::browse;
    e.label = Label::make(p.like, 1.0);
    return e;
}

ClusterWorld make_cluster_world(std::size_t users, std::size_t docs, std::size_t labels_per_user,
                                std::size_t held_out_per_user, std::uint64_t seed) {
    Rng rng(seed);
    ClusterWorld w;
    std::vector<std::size_t> members[2];
    for (std::size_t u = 0; u < users; ++u) {
        const int c = static_cast<int>(u % 2);
        w.user_cluster.push_back(c);
        members[c].push_back(u);
    }
    for (std::size_t d = 0; d < docs; ++d) {
        const int c = rng.bernoulli(0.5) ? 1 : 0;
        w.doc_cluster.push_back(c);
        const auto& pool = members[c];
        w.doc_author.push_back(UserId{pool[rng.below(pool.size())]});
    }
    for (std::size_t u = 0; u < users; ++u) {
        std::vector<std::size_t> order(docs);
        for (std::size_t d = 0; d < docs; ++d) order[d] = d;
        rng.shuffle(order);
        for (std::size_t k = 0; k < labels_per_user + held_out_per_user && k < docs; ++k) {
            const std::size_t d = order[k];
            ClusterWorld::Pair p{UserId{u}, PostId{d}, w.user_cluster[u] == w.doc_cluster[d],
                                 static_cast<std::int64_t>(rng.below(86400))};
            (k < labels_per_user ? w.train : w.held_out).push_back(p);
        }
    }
    rng.shuffle(w.train);
    return w;
}

ModelState train_one_pass(const ClusterWorld& world, const ModelDims& dims,
                          const TrainerConfig& config) {
    ModelState state = ModelState::fresh(dims, config.seed);
    std::uint64_t id = 0;
    for (const auto& p : world.train) {
        sgd_step(world.example(p, id++), world.doc_author[p.doc.value], state, config);
    }
    return state;
}

double held_out_auc(const ClusterWorld& world, const ModelState& model) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& p : world.held_out) {
        const auto u = user_vector(model, p.user);
        const auto d = document_vector(model, p.doc, world.doc_author[p.doc.value]);
        const auto c = featurize_context(p.timestamp, SessionKind::browse);
        scores.push_back(score<float>(u, d, c.values, model.weights));
        labels.push_back(p.like ? 1 : 0);
    }
    return auc(scores, labels);
}

TopicTrial run_topic_trial(std::uint64_t seed, const TrainerConfig& config, std::size_t passes) {
    const auto world = make_cluster_world(20, 40, 10, 0, seed);
    TrainerConfig cfg = config;
    cfg.seed = seed;
    ModelState state = ModelState::fresh(ModelDims{}, seed);
    std::uint64_t id = 0;
    for (std::size_t pass = 0; pass < passes; ++pass) {
        for (const auto& p : world.train) {
            sgd_step(world.example(p, id++), world.doc_author[p.doc.value], state, cfg);
        }
    }

    IndexWriter writer;
    AuthorLookup authors;
    for (std::size_t d = 0; d < world.docs(); ++d) {
        const char* topic = world.doc_cluster[d] == 0 ? "sports" : "music";
        const Post post{PostId{d}, world.doc_author[d],
                        std::string("news ") + topic + " item" + std::to_string(d), std::nullopt, 0};
        writer.index_post(post);
        authors[post.post_id] = post.author_user_id;
    }
    writer.commit();

    Rng rng(seed ^ 0x5eedULL);
    TopicTrial t;
    t.user = UserId{rng.below(world.users())};
    t.preferred_topic = world.user_cluster[t.user.value];
    const auto ctx = featurize_context(static_cast<std::int64_t>(rng.below(86400 * 7)), SessionKind::search);
    const auto results = keyword_search(*writer.snapshot(), "news", t.user, ctx, 10, 0.5, state, authors);
    t.top_topic = world.doc_cluster[results.front().post.value];
    t.top_bm25 = results.front().generic_score;
    double lo = results.front().generic_score, hi = lo;
    for (const auto& r : results) {
        lo = std::min(lo, r.generic_score);
        hi = std::max(hi, r.generic_score);
    }
    t.bm25_spread = hi - lo;
    return t;
}

}  // namespace dimrank::testing
