#include "dimrank/recommender.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "dimrank/kernels.hpp"

namespace dimrank {

Pruning parse_pruning(const std::string& s) {
    if (s == "exhaustive") return Pruning::exhaustive;
    if (s == "embedding-knn" || s == "knn") return Pruning::embedding_knn;
    throw InvalidConfig("unknown pruning mode '" + s + "'");
}

const char* to_string(Pruning p) { return p == Pruning::exhaustive ? "exhaustive" : "embedding-knn"; }

void RecommenderConfig::validate() const {
    if (!(tau_rec > 0.0 && tau_rec < 1.0)) throw InvalidConfig("tau_rec must be in (0, 1)");
    if (knn_k < 1) throw InvalidConfig("knn_k must be >= 1");
}

namespace {

bool use_knn(const RecommenderConfig& config, std::size_t user_count) {
    return config.pruning == Pruning::embedding_knn || user_count > config.exhaustive_max_users;
}

std::vector<kernels::Rows::value_type> as_rows(const std::vector<std::vector<float>>& vs) {
    std::vector<kernels::Rows::value_type> rows;
    rows.reserve(vs.size());
    for (const auto& v : vs) rows.emplace_back(v);
    return rows;
}

}  // namespace

std::vector<float> knn_query(const ModelWeights& weights, std::span<const float> doc,
                             const ContextFeatures& context) {
    const ModelDims& dims = weights.dims;
    const std::vector<float> zero(dims.user_dim, 0.0f);
    Activations<float> act;
    score_forward<float>(zero, doc, context_span(context), weights, act);
    const std::size_t in = dims.input_dim();
    std::vector<float> q(dims.user_dim, 0.0f);
    for (std::size_t j = 0; j < dims.hidden; ++j) {
        if (!(act.pre[j] > 0.0f)) continue;
        const float* row = weights.w1.data() + j * in;
        for (std::size_t i = 0; i < dims.user_dim; ++i) q[i] += weights.w2[j] * row[i];
    }
    return q;
}

std::vector<UserId> candidate_users(const Post& post, const ModelState& model,
                                    const std::vector<UserId>& users,
                                    const RecommenderConfig& config, std::int64_t now) {
    std::vector<UserId> out;
    if (!use_knn(config, users.size())) {
        out = users;
    } else {
        if (model.dims().user_dim != model.dims().doc_dim) {
            throw InvalidConfig("embedding-knn pruning needs equal user and document dimensions");
        }
        const auto doc = document_vector(model, post.post_id, post.author_user_id);
        const auto query = knn_query(model.weights, doc, featurize_context(now, SessionKind::browse));
        std::vector<std::vector<float>> vecs;
        vecs.reserve(users.size());
        for (UserId u : users) vecs.push_back(user_vector(model, u));
        const auto rows = as_rows(vecs);
        for (std::size_t i : kernels::cosine_top_k_parallel(query, rows, config.knn_k)) {
            out.push_back(users[i]);
        }
        if (std::find(out.begin(), out.end(), post.author_user_id) == out.end() &&
            std::find(users.begin(), users.end(), post.author_user_id) != users.end()) {
            out.push_back(post.author_user_id);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

RoutingDecision route_post(const Post& post, const ModelState& model,
                           const std::vector<UserId>& users, std::int64_t now,
                           const RecommenderConfig& config) {
    RoutingDecision d;
    d.post = post.post_id;
    d.candidates = candidate_users(post, model, users, config, now);
    const auto doc = document_vector(model, post.post_id, post.author_user_id);
    std::vector<std::vector<float>> vecs;
    vecs.reserve(d.candidates.size());
    for (UserId u : d.candidates) vecs.push_back(user_vector(model, u));
    const auto rows = as_rows(vecs);
    d.scores.resize(rows.size());
    kernels::score_users_parallel(model.weights, doc, featurize_context(now, SessionKind::browse),
                                  rows, d.scores);
    for (std::size_t i = 0; i < d.candidates.size(); ++i) {
        if (d.candidates[i] == post.author_user_id) {
            d.scores[i] = std::numeric_limits<float>::quiet_NaN();
            continue;
        }
        if (static_cast<double>(d.scores[i]) >= config.tau_rec) d.delivered.push_back(d.candidates[i]);
    }
    return d;
}

Recommender::Recommender(Store& store, RecommenderConfig config, Clock clock)
    : store_(store), config_(config), clock_(std::move(clock)) {
    config_.validate();
    if (!clock_) {
        clock_ = [] {
            return std::chrono::duration_cast<std::chrono::seconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                .count();
        };
    }
    if (auto snap = store_.snapshots().latest()) {
        if (config_.pruning == Pruning::embedding_knn &&
            snap->state.dims().user_dim != snap->state.dims().doc_dim) {
            throw InvalidConfig("embedding-knn pruning needs equal user and document dimensions");
        }
    }
    store_.new_queue().register_cursor(kCursor);
}

SnapshotHandle Recommender::snapshot() const {
    auto snap = store_.snapshots().latest();
    if (!snap) throw Error("no model snapshot has been published");
    if (config_.pruning == Pruning::embedding_knn &&
        snap->state.dims().user_dim != snap->state.dims().doc_dim) {
        throw InvalidConfig("embedding-knn pruning needs equal user and document dimensions");
    }
    return snap;
}

std::optional<RoutingDecision> Recommender::process_next(bool block, std::stop_token stop) {
    auto& q = store_.new_queue();
    auto record = q.poll(kCursor, block, stop);
    if (!record) return std::nullopt;
    const PostId id = decode_post_id(record->payload);
    auto post = store_.posts().find(id);
    if (!post) throw UnknownPost("Q_new references unknown post " + std::to_string(id.value));
    const auto snap = snapshot();
    auto decision = route_post(*post, snap->state, store_.users().all(), clock_(), config_);
    for (UserId u : decision.delivered) store_.feeds().push(u, id);
    q.ack(kCursor);
    return decision;
}

RecommenderStats Recommender::run(std::stop_token stop, bool follow) {
    RecommenderStats stats;
    while (!stop.stop_requested()) {
        auto d = process_next(follow, stop);
        if (!d) {
            if (follow) continue;
            break;
        }
        ++stats.posts;
        stats.deliveries += d->delivered.size();
    }
    return stats;
}

std::uint64_t Recommender::run_until_idle() {
    std::uint64_t n = 0;
    while (process_next(false)) ++n;
    return n;
}

std::vector<FeedItem> Recommender::fetch_feed(UserId user, std::size_t limit) {
    if (!store_.users().contains(user)) {
        throw UnknownUser("unknown user " + std::to_string(user.value));
    }
    const auto unread = store_.feeds().unread(user);
    if (unread.empty() || limit == 0) return {};
    const auto snap = snapshot();
    const ModelState& model = snap->state;

    std::vector<Post> posts;
    std::vector<std::vector<float>> vecs;
    for (PostId id : unread) {
        if (auto p = store_.posts().find(id)) {
            vecs.push_back(document_vector(model, p->post_id, p->author_user_id));
            posts.push_back(std::move(*p));
        }
    }
    const auto rows = as_rows(vecs);
    std::vector<float> scores(rows.size());
    const auto u = user_vector(model, user);
    kernels::score_documents_parallel(model.weights, u, featurize_context(clock_(), SessionKind::browse),
                                      rows, scores);

    std::vector<std::size_t> order(posts.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] != scores[b] ? scores[a] > scores[b] : posts[a].post_id < posts[b].post_id;
    });
    order.resize(std::min(limit, order.size()));

    std::vector<FeedItem> out;
    std::vector<PostId> delivered;
    for (std::size_t i : order) {
        out.push_back({posts[i], scores[i]});
        delivered.push_back(posts[i].post_id);
    }
    store_.feeds().mark_read(user, delivered);
    return out;
}

}  // namespace dimrank
