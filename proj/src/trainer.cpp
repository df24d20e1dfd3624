#include "dimrank/trainer.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <iostream>

namespace dimrank {

void TrainerConfig::validate() const {
    if (!(eta_w > 0.0) || !(eta_emb > 0.0)) throw InvalidConfig("learning rates must be > 0");
    if (l2_emb < 0.0) throw InvalidConfig("l2_emb must be >= 0");
    if (snapshot_every < 1 || checkpoint_every < 1 || status_every < 1) {
        throw InvalidConfig("snapshot, checkpoint and status intervals must be >= 1");
    }
}

std::uint64_t receive_label(Store& store, UserId user, PostId post, std::int64_t timestamp,
                            SessionKind session, const Label& label) {
    label.validate();
    if (!store.users().contains(user)) {
        throw UnknownUser("unknown user " + std::to_string(user.value));
    }
    if (!store.posts().contains(post)) {
        throw UnknownPost("unknown post " + std::to_string(post.value));
    }
    Example e;
    e.user = user;
    e.post = post;
    e.timestamp = timestamp;
    e.session = session;
    e.label = label;
    const auto id = store.train_queue().append(encode_example(e));
    store.feeds().mark_read(user, post);
    return id;
}

namespace {

// theta - eta * g (+ l2 * theta), written to `out`. False if any result is
// not finite.
bool stage_update(std::span<const float> theta, std::span<const float> g, float eta, float l2,
                  std::vector<float>& out) {
    out.resize(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const float grad = l2 == 0.0f ? g[i] : g[i] + l2 * theta[i];
        out[i] = theta[i] - eta * grad;
        if (!std::isfinite(out[i])) return false;
    }
    return true;
}

}  // namespace

StepReport sgd_step(const Example& example, UserId author, ModelState& state,
                    const TrainerConfig& config) {
    example.label.validate();
    auto user_row = get_or_init_user(state, example.user);
    auto doc_row = get_or_init_document(state, example.post, author);
    const auto context = example.context();

    Activations<float> act;
    const float p = score_forward<float>(user_row, doc_row, context_span(context), state.weights, act);
    const float l = loss(p, example.label);
    const Gradients g = backward(act, example.label);

    StepReport report{static_cast<double>(l), false};
    if (!std::isfinite(l) || !g.all_finite()) {
        ++state.quarantined;
        std::clog << "trainer: quarantined example " << example.example_id
                  << " (non-finite loss or gradient)\n";
        return report;
    }

    const auto eta_w = static_cast<float>(config.eta_w);
    const auto eta_e = static_cast<float>(config.eta_emb);
    const auto l2 = static_cast<float>(config.l2_emb);
    std::vector<float> new_u, new_d, new_w1, new_b1, new_w2, new_b2;
    ModelWeights& w = state.weights;
    const float b2 = w.b2;
    bool ok = stage_update(user_row, g.du, eta_e, l2, new_u) &&
              stage_update(doc_row, g.dd, eta_e, l2, new_d) &&
              stage_update(w.w1, g.dw1, eta_w, 0.0f, new_w1) &&
              stage_update(w.b1, g.db1, eta_w, 0.0f, new_b1) &&
              stage_update(w.w2, g.dw2, eta_w, 0.0f, new_w2) &&
              stage_update(std::span<const float>(&b2, 1), std::span<const float>(&g.db2, 1), eta_w,
                           0.0f, new_b2);
    if (!ok) {
        ++state.quarantined;
        std::clog << "trainer: quarantined example " << example.example_id
                  << " (update would leave the model non-finite)\n";
        return report;
    }

    std::copy(new_u.begin(), new_u.end(), user_row.begin());
    std::copy(new_d.begin(), new_d.end(), doc_row.begin());
    w.w1 = std::move(new_w1);
    w.b1 = std::move(new_b1);
    w.w2 = std::move(new_w2);
    w.b2 = new_b2[0];
    if (example.label.target == 1) state.record_like(example.user, example.post);
    ++state.step;
    report.applied = true;
    return report;
}

Trainer::Trainer(Store& store, const ModelDims& dims, TrainerConfig config)
    : store_(store), config_(config) {
    config_.validate();
    lock_ = std::make_unique<FileLock>(store_.data_dir() / "trainer.lock");

    if (auto latest = store_.latest_checkpoint()) {
        state_ = load_checkpoint(*latest, dims).state;
    } else {
        state_ = ModelState::fresh(dims, config_.seed);
    }

    auto& q = store_.train_queue();
    q.register_cursor(kCursor);
    const auto acked = q.cursor_position(kCursor);
    if (acked < state_.training_cursor) {
        throw IoError("checkpoint is ahead of the acknowledged training cursor");
    }
    // Acked after the newest checkpoint: rebuild their effect silently.
    while (state_.training_cursor < acked) {
        const auto id = state_.training_cursor;
        const Example e = decode_example(q.read(id), id);
        apply(e);
        ++recovered_;
    }
    publish();
}

StepReport Trainer::apply(const Example& example) {
    StepReport report;
    if (auto post = store_.posts().find(example.post)) {
        report = sgd_step(example, post->author_user_id, state_, config_);
    } else {
        ++state_.quarantined;
        report.applied = false;
        std::clog << "trainer: quarantined example " << example.example_id << " (unknown post "
                  << example.post.value << ")\n";
    }
    state_.training_cursor = example.example_id + 1;
    return report;
}

std::optional<StepReport> Trainer::process_next(bool block, std::stop_token stop) {
    auto& q = store_.train_queue();
    auto record = q.poll(kCursor, block, stop);
    if (!record) return std::nullopt;
    const Example e = decode_example(record->payload, record->id);
    const StepReport report = apply(e);
    if (hook_) hook_(e);
    q.ack(kCursor);
    if (state_.training_cursor % config_.snapshot_every == 0) publish();
    if (state_.training_cursor % config_.checkpoint_every == 0) checkpoint();
    return report;
}

TrainerStats Trainer::run(std::stop_token stop, std::optional<std::uint64_t> max_steps, bool follow,
                          std::ostream* status) {
    using clock = std::chrono::steady_clock;
    TrainerStats stats;
    const auto start = clock::now();
    auto window_start = start;
    double loss_sum = 0.0, window_loss = 0.0;
    std::uint64_t window_steps = 0;
    try {
        while (!stop.stop_requested() && (!max_steps || stats.steps < *max_steps)) {
            auto report = process_next(follow, stop);
            if (!report) {
                if (follow) continue;
                break;
            }
            ++stats.steps;
            if (!report->applied) ++stats.quarantined;
            loss_sum += report->loss;
            window_loss += report->loss;
            ++window_steps;
            if (status && stats.steps % config_.status_every == 0) {
                const auto now = clock::now();
                const double secs = std::chrono::duration<double>(now - window_start).count();
                *status << "step=" << state_.step << " mean_loss=" << std::fixed
                        << std::setprecision(5) << window_loss / static_cast<double>(window_steps)
                        << " examples/sec=" << std::setprecision(1)
                        << (secs > 0 ? static_cast<double>(window_steps) / secs : 0.0) << std::endl;
                window_start = now;
                window_loss = 0.0;
                window_steps = 0;
            }
        }
    } catch (const IoError&) {
        try {
            checkpoint();
        } catch (...) {
        }
        throw;
    }
    checkpoint();
    publish();
    stats.mean_loss = stats.steps ? loss_sum / static_cast<double>(stats.steps) : 0.0;
    stats.seconds = std::chrono::duration<double>(clock::now() - start).count();
    return stats;
}

std::uint64_t Trainer::run_until_idle() {
    std::uint64_t n = 0;
    while (process_next(false)) ++n;
    publish();
    return n;
}

ModelCheckpoint Trainer::make_checkpoint() const {
    ModelCheckpoint ckpt;
    ckpt.hyper.dims = state_.dims();
    ckpt.hyper.eta_w = config_.eta_w;
    ckpt.hyper.eta_emb = config_.eta_emb;
    ckpt.hyper.l2_emb = config_.l2_emb;
    ckpt.state = state_;
    return ckpt;
}

std::filesystem::path Trainer::checkpoint() {
    const auto path = store_.checkpoint_path(state_.training_cursor);
    save_checkpoint(path, make_checkpoint(), store_.options().sync);
    return path;
}

SnapshotHandle Trainer::publish() { return store_.snapshots().publish(state_); }

}  // namespace dimrank
