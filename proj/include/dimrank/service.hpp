#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <thread>

#include "dimrank/config.hpp"
#include "dimrank/recommender.hpp"
#include "dimrank/search.hpp"
#include "dimrank/store.hpp"
#include "dimrank/trainer.hpp"

namespace httplib {
class Server;
}

namespace dimrank {

struct HttpResponse {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;

    nlohmann::json json() const { return nlohmann::json::parse(body); }
};

using QueryParams = std::map<std::string, std::string>;

/// The HTTP facade. Handlers are plain member functions so they can be
/// driven without a socket; mount() wires them to an httplib server.
class Service {
public:
    using Clock = std::function<std::int64_t()>;

    explicit Service(ServiceConfig config, Clock clock = {});
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Background trainer and recommender threads.
    void start_workers();
    void stop_workers();

    /// Trains on and routes everything queued so far. Only while the
    /// workers are stopped.
    void drain();

    HttpResponse create_user();
    HttpResponse create_post(std::string_view body);
    HttpResponse post_label(std::string_view body);
    HttpResponse get_feed(std::string_view user, const QueryParams& params);
    HttpResponse search(const QueryParams& params);
    HttpResponse health();
    HttpResponse metrics();

    void mount(httplib::Server& server);

    /// Blocks serving on config.listen_address until shutdown().
    void listen();
    void shutdown();

    Store& store() { return *store_; }
    Trainer& trainer() { return *trainer_; }
    Recommender& recommender() { return *recommender_; }
    Searcher& searcher() { return *searcher_; }
    const ServiceConfig& config() const { return config_; }

private:
    std::int64_t now() const { return clock_(); }

    ServiceConfig config_;
    Clock clock_;
    std::unique_ptr<Store> store_;
    std::unique_ptr<Trainer> trainer_;
    std::unique_ptr<Recommender> recommender_;
    std::unique_ptr<Searcher> searcher_;
    std::jthread train_worker_;
    std::jthread recommend_worker_;
    std::unique_ptr<httplib::Server> server_;

    struct Counters {
        std::atomic<std::uint64_t> requests{0};
        std::atomic<std::uint64_t> users_created{0};
        std::atomic<std::uint64_t> posts_created{0};
        std::atomic<std::uint64_t> labels_accepted{0};
        std::atomic<std::uint64_t> feed_requests{0};
        std::atomic<std::uint64_t> search_requests{0};
        std::atomic<std::uint64_t> client_errors{0};
        std::atomic<std::uint64_t> server_errors{0};
    } counters_;
};

}  // namespace dimrank
