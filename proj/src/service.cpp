#include "dimrank/service.hpp"

#include <chrono>
#include <iostream>
#include <sstream>

#include "httplib.h"

namespace dimrank {

namespace {

using nlohmann::json;

HttpResponse reply(int status, const json& body) { return {status, "application/json", body.dump()}; }

HttpResponse error_reply(int status, const std::string& message) {
    return reply(status, json{{"error", message}});
}

std::uint64_t parse_u64(std::string_view s, const char* what) {
    if (s.empty() || s.size() > 19) throw InvalidArgument(std::string("invalid ") + what);
    std::uint64_t v = 0;
    for (char c : s) {
        if (c < '0' || c > '9') throw InvalidArgument(std::string("invalid ") + what);
        v = v * 10 + static_cast<std::uint64_t>(c - '0');
    }
    return v;
}

double parse_double(const std::string& s, const char* what) {
    try {
        std::size_t used = 0;
        const double d = std::stod(s, &used);
        if (used == s.size()) return d;
    } catch (const std::exception&) {
    }
    throw InvalidArgument(std::string("invalid ") + what);
}

std::uint64_t body_id(const json& body, const char* key) {
    if (!body.contains(key) || !body[key].is_number_unsigned()) {
        throw InvalidArgument(std::string("'") + key + "' must be a non-negative integer");
    }
    return body[key].get<std::uint64_t>();
}

json parse_body(std::string_view body) {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw InvalidArgument("body must be a JSON object");
    return j;
}

json post_json(const Post& p) {
    json j = to_json(p);
    return j;
}

}  // namespace

Service::Service(ServiceConfig config, Clock clock) : config_(std::move(config)), clock_(std::move(clock)) {
    config_.validate();
    if (!clock_) {
        clock_ = [] {
            return std::chrono::duration_cast<std::chrono::seconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                .count();
        };
    }
    store_ = std::make_unique<Store>(config_.data_dir, config_.store_options());
    trainer_ = std::make_unique<Trainer>(*store_, config_.dims, config_.trainer);
    recommender_ = std::make_unique<Recommender>(*store_, config_.recommender, clock_);
    searcher_ = std::make_unique<Searcher>(*store_);
    server_ = std::make_unique<httplib::Server>();
}

Service::~Service() {
    shutdown();
    stop_workers();
}

void Service::start_workers() {
    if (train_worker_.joinable()) return;
    train_worker_ = std::jthread([this](std::stop_token stop) {
        try {
            trainer_->run(stop, std::nullopt, true);
        } catch (const std::exception& e) {
            std::cerr << "trainer stopped: " << e.what() << '\n';
        }
    });
    recommend_worker_ = std::jthread([this](std::stop_token stop) {
        try {
            recommender_->run(stop, true);
        } catch (const std::exception& e) {
            std::cerr << "recommender stopped: " << e.what() << '\n';
        }
    });
}

void Service::stop_workers() {
    for (auto* t : {&train_worker_, &recommend_worker_}) {
        if (t->joinable()) {
            t->request_stop();
            t->join();
        }
    }
}

void Service::drain() {
    if (train_worker_.joinable()) throw Error("drain() needs the workers stopped");
    trainer_->run_until_idle();
    recommender_->run_until_idle();
}

HttpResponse Service::create_user() {
    const UserId id = store_->users().add();
    ++counters_.users_created;
    return reply(201, {{"user_id", id.value}});
}

HttpResponse Service::create_post(std::string_view raw) {
    const json body = parse_body(raw);
    const UserId author{body_id(body, "author")};
    if (!body.contains("text") || !body["text"].is_string()) {
        throw InvalidArgument("'text' must be a string");
    }
    std::optional<std::string> url;
    if (body.contains("url") && !body["url"].is_null()) {
        if (!body["url"].is_string()) throw InvalidArgument("'url' must be a string");
        url = body["url"].get<std::string>();
    }
    const auto text = body["text"].get<std::string>();
    if (text.empty()) throw InvalidArgument("'text' must not be empty");
    if (!store_->users().contains(author)) {
        throw UnknownUser("unknown author " + std::to_string(author.value));
    }
    const Post post = store_->posts().add(author, text, url, now());
    searcher_->index_post(post);
    store_->new_queue().append(encode_post_id(post.post_id));
    ++counters_.posts_created;
    return reply(201, {{"post_id", post.post_id.value}});
}

HttpResponse Service::post_label(std::string_view raw) {
    const json body = parse_body(raw);
    const UserId user{body_id(body, "user")};
    const PostId post{body_id(body, "post")};
    if (!body.contains("like") || !body["like"].is_boolean()) {
        throw InvalidArgument("'like' must be a boolean");
    }
    double magnitude = 1.0;
    if (body.contains("magnitude")) {
        if (!body["magnitude"].is_number()) throw InvalidArgument("'magnitude' must be a number");
        magnitude = body["magnitude"].get<double>();
    }
    SessionKind session = SessionKind::browse;
    if (body.contains("session")) {
        if (!body["session"].is_string()) throw InvalidArgument("'session' must be a string");
        session = parse_session_kind(body["session"].get<std::string>());
    }
    const Label label = Label::make(body["like"].get<bool>(), magnitude, LabelSource::explicit_signal);
    const auto example_id = receive_label(*store_, user, post, now(), session, label);
    ++counters_.labels_accepted;
    return reply(202, {{"example_id", example_id}});
}

HttpResponse Service::get_feed(std::string_view user_text, const QueryParams& params) {
    ++counters_.feed_requests;
    const UserId user{parse_u64(user_text, "user id")};
    std::size_t limit = 20;
    if (auto it = params.find("limit"); it != params.end()) limit = parse_u64(it->second, "limit");
    json out = json::array();
    for (const auto& item : recommender_->fetch_feed(user, limit)) {
        json j = post_json(item.post);
        j["score"] = item.score;
        out.push_back(std::move(j));
    }
    return reply(200, out);
}

HttpResponse Service::search(const QueryParams& params) {
    ++counters_.search_requests;
    auto get = [&](const char* key) -> const std::string* {
        auto it = params.find(key);
        return it == params.end() ? nullptr : &it->second;
    };
    const auto* user_text = get("user");
    if (!user_text) throw InvalidArgument("missing 'user'");
    const UserId user{parse_u64(*user_text, "user")};
    const auto* q = get("q");
    if (!q || q->empty()) throw EmptyQuery("missing or empty 'q'");
    std::size_t top_k = 10;
    if (const auto* s = get("top_k")) top_k = parse_u64(*s, "top_k");
    double alpha = config_.alpha;
    if (const auto* s = get("alpha")) alpha = parse_double(*s, "alpha");
    if (top_k < 1) throw InvalidArgument("top_k must be >= 1");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must be in [0, 1]");

    const auto results =
        searcher_->search(*q, user, featurize_context(now(), SessionKind::search), top_k, alpha);
    json out = json::array();
    for (const auto& r : results) {
        json j = {{"post_id", r.post.value},
                  {"rank", r.rank},
                  {"generic_score", r.generic_score},
                  {"personalized_score", r.personalized_score},
                  {"final_score", r.final_score}};
        if (auto p = store_->posts().find(r.post)) j["text"] = p->text;
        out.push_back(std::move(j));
    }
    return reply(200, out);
}

HttpResponse Service::health() {
    auto& tq = store_->train_queue();
    auto& nq = store_->new_queue();
    const auto snap = store_->snapshots().latest();
    return reply(200, {{"status", "ok"},
                       {"q_train_backlog", tq.size() - tq.cursor_position(Trainer::kCursor)},
                       {"q_new_backlog", nq.size() - nq.cursor_position(Recommender::kCursor)},
                       {"snapshot_version", snap ? snap->version : 0},
                       {"users", store_->users().size()},
                       {"posts", store_->posts().size()}});
}

HttpResponse Service::metrics() {
    auto& tq = store_->train_queue();
    auto& nq = store_->new_queue();
    const auto snap = store_->snapshots().latest();
    std::ostringstream out;
    out << "dimrank_requests_total " << counters_.requests.load() << '\n'
        << "dimrank_users_created_total " << counters_.users_created.load() << '\n'
        << "dimrank_posts_created_total " << counters_.posts_created.load() << '\n'
        << "dimrank_labels_accepted_total " << counters_.labels_accepted.load() << '\n'
        << "dimrank_feed_requests_total " << counters_.feed_requests.load() << '\n'
        << "dimrank_search_requests_total " << counters_.search_requests.load() << '\n'
        << "dimrank_client_errors_total " << counters_.client_errors.load() << '\n'
        << "dimrank_server_errors_total " << counters_.server_errors.load() << '\n'
        << "dimrank_train_queue_length " << tq.size() << '\n'
        << "dimrank_train_queue_backlog " << tq.size() - tq.cursor_position(Trainer::kCursor) << '\n'
        << "dimrank_new_queue_length " << nq.size() << '\n'
        << "dimrank_new_queue_backlog " << nq.size() - nq.cursor_position(Recommender::kCursor) << '\n'
        << "dimrank_snapshot_version " << (snap ? snap->version : 0) << '\n'
        << "dimrank_snapshot_step " << (snap ? snap->state.step : 0) << '\n';
    return {200, "text/plain; version=0.0.4", out.str()};
}

void Service::mount(httplib::Server& server) {
    // Maps module errors onto status codes; every handler goes through here.
    auto guarded = [this](auto&& handler) {
        return [this, handler](const httplib::Request& req, httplib::Response& res) {
            ++counters_.requests;
            HttpResponse r;
            try {
                r = handler(req);
            } catch (const UnknownUser& e) {
                r = error_reply(404, e.what());
            } catch (const UnknownPost& e) {
                r = error_reply(404, e.what());
            } catch (const InvalidArgument& e) {
                r = error_reply(400, e.what());
            } catch (const InvalidLabel& e) {
                r = error_reply(400, e.what());
            } catch (const EmptyQuery& e) {
                r = error_reply(400, e.what());
            } catch (const std::exception& e) {
                r = error_reply(500, e.what());
            }
            if (r.status >= 500) ++counters_.server_errors;
            else if (r.status >= 400) ++counters_.client_errors;
            res.status = r.status;
            res.set_content(r.body, r.content_type);
        };
    };
    auto params_of = [](const httplib::Request& req) {
        QueryParams p;
        for (const auto& [k, v] : req.params) p.emplace(k, v);
        return p;
    };

    server.Post("/users", guarded([this](const httplib::Request&) { return create_user(); }));
    server.Post("/posts", guarded([this](const httplib::Request& req) { return create_post(req.body); }));
    server.Post("/labels", guarded([this](const httplib::Request& req) { return post_label(req.body); }));
    server.Get(R"(/feed/([^/]+))", guarded([this, params_of](const httplib::Request& req) {
                   return get_feed(req.matches[1].str(), params_of(req));
               }));
    server.Get("/search", guarded([this, params_of](const httplib::Request& req) {
                   return search(params_of(req));
               }));
    server.Get("/health", guarded([this](const httplib::Request&) { return health(); }));
    server.Get("/metrics", guarded([this](const httplib::Request&) { return metrics(); }));
}

void Service::listen() {
    const auto colon = config_.listen_address.rfind(':');
    if (colon == std::string::npos) throw InvalidConfig("listen_address must be host:port");
    const std::string host = config_.listen_address.substr(0, colon);
    const int port = static_cast<int>(parse_u64(config_.listen_address.substr(colon + 1), "port"));
    mount(*server_);
    if (!server_->listen(host, port)) {
        throw IoError("cannot listen on " + config_.listen_address);
    }
}

void Service::shutdown() {
    if (server_ && server_->is_running()) server_->stop();
}

}  // namespace dimrank
