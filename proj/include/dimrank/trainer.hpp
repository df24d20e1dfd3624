#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <stop_token>

#include "dimrank/checkpoint.hpp"
#include "dimrank/records.hpp"
#include "dimrank/store.hpp"

namespace dimrank {

struct TrainerConfig {
    double eta_w = 0.01;    // shared weights
    double eta_emb = 0.05;  // user and document embeddings
    double l2_emb = 0.0;
    std::uint64_t snapshot_every = 100;
    std::uint64_t checkpoint_every = 10000;
    std::uint64_t status_every = 1000;
    std::uint64_t seed = 42;

    void validate() const;
};

/// Builds an Example from a fresh label and appends it to Q_train. Also
/// marks the post read in the labeler's feed. Safe to call from many
/// threads; the queue append is the serialization point.
std::uint64_t receive_label(Store& store, UserId user, PostId post, std::int64_t timestamp,
                            SessionKind session, const Label& label);

struct StepReport {
    double loss = 0.0;    // before the update
    bool applied = true;  // false when quarantined as non-finite
};

/// One SGD update for one example: forward, backward, then
/// theta -= eta * grad for the two active embedding rows and the weights.
StepReport sgd_step(const Example& example, UserId author, ModelState& state,
                    const TrainerConfig& config);

struct TrainerStats {
    std::uint64_t steps = 0;        // examples processed in this run
    std::uint64_t quarantined = 0;  // of those, skipped as non-finite
    double mean_loss = 0.0;
    double seconds = 0.0;
};

/// The training server. Exactly one may run per data directory (a lock
/// file enforces it). On construction it loads the newest checkpoint and
/// re-applies any examples that were acknowledged after that checkpoint was
/// written, so the in-memory model matches every acknowledged example.
class Trainer {
public:
    static constexpr const char* kCursor = "trainer";

    Trainer(Store& store, const ModelDims& dims, TrainerConfig config);

    /// Polls one example, steps, acks. nullopt when nothing was available.
    std::optional<StepReport> process_next(bool block, std::stop_token stop = {});

    /// Processes until `stop` fires, `max_steps` examples have been handled,
    /// or (when not following) the queue is drained. Checkpoints on exit.
    TrainerStats run(std::stop_token stop, std::optional<std::uint64_t> max_steps, bool follow,
                     std::ostream* status = nullptr);

    /// Drains Q_train without blocking and publishes a snapshot.
    std::uint64_t run_until_idle();

    std::filesystem::path checkpoint();
    SnapshotHandle publish();

    ModelCheckpoint make_checkpoint() const;
    const ModelState& state() const { return state_; }
    const TrainerConfig& config() const { return config_; }

    /// Examples re-applied from the log during recovery.
    std::uint64_t recovered() const { return recovered_; }

    /// Called after each step and before its ack. Test seam for crash
    /// injection.
    void set_step_hook(std::function<void(const Example&)> hook) { hook_ = std::move(hook); }

private:
    StepReport apply(const Example& example);

    Store& store_;
    TrainerConfig config_;
    std::unique_ptr<FileLock> lock_;
    ModelState state_;
    std::uint64_t recovered_ = 0;
    std::function<void(const Example&)> hook_;
};

}  // namespace dimrank
