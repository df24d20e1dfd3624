// dimrank: umbrella command line for the server, the offline workers and
// the brigading simulation.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"

#include "dimrank/brigade.hpp"
#include "dimrank/checkpoint.hpp"
#include "dimrank/config.hpp"
#include "dimrank/recommender.hpp"
#include "dimrank/search.hpp"
#include "dimrank/service.hpp"
#include "dimrank/store.hpp"
#include "dimrank/trainer.hpp"

using namespace dimrank;

namespace {

struct Common {
    std::optional<std::string> config_file;
    std::optional<std::string> data_dir;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config_file, "JSON config file");
    cmd->add_option("--data-dir", c.data_dir, "data directory");
}

ServiceConfig resolve(const Common& c) {
    std::optional<std::filesystem::path> file;
    if (c.config_file) file = *c.config_file;
    ServiceConfig cfg = load_config(file, process_env());
    if (c.data_dir) cfg.data_dir = *c.data_dir;
    cfg.validate();
    return cfg;
}

std::int64_t wall_clock() {
    return std::chrono::duration_cast<std::chrono::seconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

// Readers outside the training process see the model as of the newest
// checkpoint, or the untrained model when there is none.
std::optional<std::filesystem::path> publish_from_disk(Store& store, const ServiceConfig& cfg,
                                                       std::optional<std::filesystem::path> seen = {}) {
    const auto latest = store.latest_checkpoint();
    if (latest && latest == seen) return seen;
    if (latest) {
        store.snapshots().publish(load_checkpoint(*latest, cfg.dims).state);
    } else if (!store.snapshots().latest()) {
        store.snapshots().publish(ModelState::fresh(cfg.dims, cfg.trainer.seed));
    }
    return latest;
}

// SIGINT/SIGTERM are blocked in every thread and collected here, so the
// stop request happens on an ordinary thread.
class SignalStop {
public:
    SignalStop() {
        sigemptyset(&set_);
        sigaddset(&set_, SIGINT);
        sigaddset(&set_, SIGTERM);
        pthread_sigmask(SIG_BLOCK, &set_, nullptr);
        thread_ = std::thread([this] {
            int sig = 0;
            sigwait(&set_, &sig);
            if (!done_) {
                source_.request_stop();
                if (on_stop_) on_stop_();
            }
        });
    }
    ~SignalStop() {
        done_ = true;
        pthread_kill(thread_.native_handle(), SIGTERM);
        thread_.join();
    }
    std::stop_token token() const { return source_.get_token(); }
    void on_stop(std::function<void()> f) { on_stop_ = std::move(f); }

private:
    sigset_t set_{};
    std::stop_source source_;
    std::function<void()> on_stop_;
    std::atomic<bool> done_{false};
    std::thread thread_;
};

std::string snippet(const std::string& text, std::size_t n = 60) {
    if (text.size() <= n) return text;
    return text.substr(0, n) + "...";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DimensionRank: personalized recommendation and search"};
    app.require_subcommand(1);

    Common serve_c, train_c, rec_c, feed_c, search_c, ckpt_c, user_c, post_c, label_c;

    auto* serve = app.add_subcommand("serve", "run the HTTP API with in-process trainer and recommender");
    add_common(serve, serve_c);
    std::optional<std::string> listen;
    serve->add_option("--listen", listen, "host:port");

    auto* train = app.add_subcommand("train", "run the training server over Q_train");
    add_common(train, train_c);
    std::optional<std::uint64_t> steps;
    bool train_follow = false;
    std::optional<std::uint64_t> seed;
    auto* steps_opt = train->add_option("--steps", steps, "process at most N examples, then exit");
    train->add_flag("--follow", train_follow, "keep waiting for new examples")->excludes(steps_opt);
    train->add_option("--seed", seed, "initialization seed");

    auto* recommend = app.add_subcommand("recommend", "route posts in Q_new into user feeds");
    add_common(recommend, rec_c);
    bool rec_follow = false;
    recommend->add_flag("--follow", rec_follow, "keep waiting for new posts");

    auto* feed = app.add_subcommand("feed", "fetch a user's feed (marks the posts read)");
    add_common(feed, feed_c);
    std::uint64_t feed_user = 0;
    std::size_t feed_limit = 20;
    feed->add_option("--user", feed_user)->required();
    feed->add_option("--limit", feed_limit);

    auto* search = app.add_subcommand("search", "personalized keyword search");
    add_common(search, search_c);
    std::uint64_t search_user = 0;
    std::string query;
    std::size_t top_k = 10;
    std::optional<double> alpha;
    search->add_option("--user", search_user)->required();
    search->add_option("--query,-q", query)->required();
    search->add_option("--top-k", top_k);
    search->add_option("--alpha", alpha)->check(CLI::Range(0.0, 1.0));

    auto* simulate = app.add_subcommand("simulate", "brigading simulation");
    SimConfig sim;
    std::string algorithm = "reddit";
    std::string out_json, out_csv;
    simulate->add_option("--algorithm", algorithm)->check(CLI::IsMember({"reddit", "dimensionrank"}));
    simulate->add_option("--community", sim.community);
    simulate->add_option("--attackers", sim.attackers);
    simulate->add_option("--rounds", sim.rounds);
    simulate->add_option("--seed", sim.seed);
    simulate->add_option("--p-like", sim.p_like);
    simulate->add_option("--warmup", sim.warmup_rounds);
    simulate->add_option("--eta-w", sim.eta_w);
    simulate->add_option("--eta-emb", sim.eta_emb);
    simulate->add_option("--tau-rec", sim.tau_rec);
    simulate->add_option("--attacker-activity", sim.attacker_activity);
    simulate->add_option("--community-activity", sim.community_activity);
    simulate->add_option("--out", out_json, "metrics JSON path");
    simulate->add_option("--out-csv", out_csv, "per-round CSV path");

    auto* checkpoint = app.add_subcommand("checkpoint", "inspect or write a model checkpoint");
    add_common(checkpoint, ckpt_c);
    std::optional<std::string> ckpt_file;
    bool ckpt_write = false;
    checkpoint->add_option("--file", ckpt_file, "checkpoint to inspect (default: newest)");
    checkpoint->add_flag("--write", ckpt_write, "catch up on acknowledged examples and write a checkpoint");

    auto* add_user = app.add_subcommand("add-user", "register a user");
    add_common(add_user, user_c);

    auto* post = app.add_subcommand("post", "create a post");
    add_common(post, post_c);
    std::uint64_t author = 0;
    std::string text;
    std::optional<std::string> url;
    post->add_option("--author", author)->required();
    post->add_option("--text", text)->required();
    post->add_option("--url", url);

    auto* label = app.add_subcommand("label", "label a post for a user");
    add_common(label, label_c);
    std::uint64_t label_user = 0, label_post = 0;
    bool dislike = false;
    double magnitude = 1.0;
    std::string session = "browse";
    label->add_option("--user", label_user)->required();
    label->add_option("--post", label_post)->required();
    label->add_flag("--dislike", dislike);
    label->add_option("--magnitude", magnitude);
    label->add_option("--session", session);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*serve) {
            auto cfg = resolve(serve_c);
            if (listen) cfg.listen_address = *listen;
            SignalStop stop;
            Service service(cfg);
            stop.on_stop([&] { service.shutdown(); });
            service.start_workers();
            std::cerr << "listening on " << cfg.listen_address << '\n';
            service.listen();
            service.stop_workers();
            return 0;
        }
        if (*train) {
            auto cfg = resolve(train_c);
            if (seed) cfg.trainer.seed = *seed;
            SignalStop stop;
            Store store(cfg.data_dir, cfg.store_options());
            Trainer trainer(store, cfg.dims, cfg.trainer);
            if (trainer.recovered() > 0) {
                std::cerr << "recovered " << trainer.recovered() << " acknowledged examples\n";
            }
            const auto stats = trainer.run(stop.token(), steps, train_follow, &std::cout);
            std::cout << "done steps=" << stats.steps << " quarantined=" << stats.quarantined
                      << " mean_loss=" << stats.mean_loss << " cursor=" << trainer.state().training_cursor
                      << '\n';
            return 0;
        }
        if (*recommend) {
            auto cfg = resolve(rec_c);
            SignalStop stop;
            Store store(cfg.data_dir, cfg.store_options());
            auto seen = publish_from_disk(store, cfg);
            Recommender rec(store, cfg.recommender);
            RecommenderStats stats;
            while (!stop.token().stop_requested()) {
                auto d = rec.process_next(false);
                if (d) {
                    ++stats.posts;
                    stats.deliveries += d->delivered.size();
                    continue;
                }
                if (!rec_follow) break;
                std::this_thread::sleep_for(std::chrono::milliseconds(200));
                seen = publish_from_disk(store, cfg, seen);
            }
            std::cout << "routed posts=" << stats.posts << " deliveries=" << stats.deliveries << '\n';
            return 0;
        }
        if (*feed) {
            auto cfg = resolve(feed_c);
            Store store(cfg.data_dir, cfg.store_options());
            publish_from_disk(store, cfg);
            Recommender rec(store, cfg.recommender);
            for (const auto& item : rec.fetch_feed(UserId{feed_user}, feed_limit)) {
                std::printf("%llu\t%.6f\t%s\n", static_cast<unsigned long long>(item.post.post_id.value),
                            static_cast<double>(item.score), snippet(item.post.text).c_str());
            }
            return 0;
        }
        if (*search) {
            auto cfg = resolve(search_c);
            Store store(cfg.data_dir, cfg.store_options());
            publish_from_disk(store, cfg);
            Searcher searcher(store);
            const auto results = searcher.search(query, UserId{search_user},
                                                 featurize_context(wall_clock(), SessionKind::search),
                                                 top_k, alpha.value_or(cfg.alpha));
            for (const auto& r : results) {
                const auto p = store.posts().find(r.post);
                std::printf("%zu\t%llu\t%.6f\t%.6f\t%.6f\t%s\n", r.rank,
                            static_cast<unsigned long long>(r.post.value), r.final_score, r.generic_score,
                            r.personalized_score, p ? snippet(p->text).c_str() : "");
            }
            return 0;
        }
        if (*simulate) {
            sim.algorithm = parse_algorithm(algorithm);
            const auto metrics = run_simulation(sim);
            const auto j = to_json(metrics);
            if (!out_json.empty()) {
                std::ofstream out(out_json);
                out << j.dump(2) << '\n';
                if (!out) throw IoError("cannot write " + out_json);
            }
            if (!out_csv.empty()) {
                std::ofstream out(out_csv);
                write_rounds_csv(out, metrics);
                if (!out) throw IoError("cannot write " + out_csv);
            }
            std::printf("algorithm=%s good_posts=%zu suppression=%.4f visibility=%.4f killed=%zu\n",
                        to_string(metrics.algorithm), metrics.good_posts, metrics.suppression_rate,
                        metrics.visibility_rate, metrics.killed_posts);
            return 0;
        }
        if (*checkpoint) {
            auto cfg = resolve(ckpt_c);
            std::optional<std::filesystem::path> path;
            if (ckpt_write) {
                Store store(cfg.data_dir, cfg.store_options());
                Trainer trainer(store, cfg.dims, cfg.trainer);
                path = trainer.checkpoint();
            } else if (ckpt_file) {
                path = *ckpt_file;
            } else {
                Store store(cfg.data_dir, cfg.store_options());
                path = store.latest_checkpoint();
            }
            if (!path) {
                std::cerr << "no checkpoint in " << cfg.data_dir << '\n';
                return 1;
            }
            const auto ck = load_checkpoint(*path);
            const auto& d = ck.hyper.dims;
            nlohmann::json info = {{"path", path->string()},
                                   {"format_version", ck.format_version},
                                   {"n", d.user_dim},
                                   {"m", d.doc_dim},
                                   {"p", d.context_dim},
                                   {"h", d.hidden},
                                   {"seed", ck.state.seed},
                                   {"step", ck.state.step},
                                   {"training_cursor", ck.state.training_cursor},
                                   {"quarantined", ck.state.quarantined},
                                   {"users", ck.state.users.size()},
                                   {"documents", ck.state.docs.size()}};
            std::cout << info.dump(2) << '\n';
            return 0;
        }
        if (*add_user) {
            auto cfg = resolve(user_c);
            Store store(cfg.data_dir, cfg.store_options());
            std::cout << store.users().add().value << '\n';
            return 0;
        }
        if (*post) {
            auto cfg = resolve(post_c);
            Store store(cfg.data_dir, cfg.store_options());
            if (!store.users().contains(UserId{author})) throw UnknownUser("unknown author");
            const Post p = store.posts().add(UserId{author}, text, url, wall_clock());
            store.new_queue().append(encode_post_id(p.post_id));
            std::cout << p.post_id.value << '\n';
            return 0;
        }
        if (*label) {
            auto cfg = resolve(label_c);
            Store store(cfg.data_dir, cfg.store_options());
            const auto l = Label::make(!dislike, magnitude);
            std::cout << receive_label(store, UserId{label_user}, PostId{label_post}, wall_clock(),
                                       parse_session_kind(session), l)
                      << '\n';
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "dimrank: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
