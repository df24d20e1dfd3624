#include "dimrank/config.hpp"

#include <cstdlib>
#include <fstream>

namespace dimrank {

namespace {

constexpr const char* kKeys[] = {
    "data_dir", "listen_address", "n", "m", "h", "eta_w", "eta_emb", "l2_emb",
    "snapshot_every", "checkpoint_every", "status_every", "seed", "tau_rec", "pruning", "knn_k",
    "exhaustive_max_users", "alpha", "feed_capacity", "sync"};

// Environment values arrive as strings; coerce them to the JSON type each
// key expects before applying.
nlohmann::json coerce(const std::string& key, const std::string& value) {
    try {
        if (key == "data_dir" || key == "listen_address" || key == "pruning") return value;
        if (key == "sync") {
            if (value == "1" || value == "true") return true;
            if (value == "0" || value == "false") return false;
            throw InvalidConfig("bad boolean");
        }
        if (key == "eta_w" || key == "eta_emb" || key == "l2_emb" || key == "tau_rec" || key == "alpha") {
            std::size_t used = 0;
            const double d = std::stod(value, &used);
            if (used != value.size()) throw InvalidConfig("trailing characters");
            return d;
        }
        std::size_t used = 0;
        const unsigned long long u = std::stoull(value, &used);
        if (used != value.size() || value.find('-') != std::string::npos) {
            throw InvalidConfig("bad integer");
        }
        return u;
    } catch (const std::exception&) {
        throw InvalidConfig("invalid value '" + value + "' for config key " + key);
    }
}

std::uint64_t count(const std::string& key, const nlohmann::json& v) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        throw InvalidConfig("config key '" + key + "' needs a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

}  // namespace

void ServiceConfig::validate() const {
    if (dims.context_dim != kContextDim) throw InvalidConfig("p is fixed at 6 context features");
    if (dims.user_dim < 1 || dims.doc_dim < 1 || dims.hidden < 1) {
        throw InvalidConfig("n, m and h must be >= 1");
    }
    trainer.validate();
    recommender.validate();
    if (recommender.pruning == Pruning::embedding_knn && dims.user_dim != dims.doc_dim) {
        throw InvalidConfig("embedding-knn pruning requires n == m");
    }
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidConfig("alpha must be in [0, 1]");
    if (feed_capacity < 1) throw InvalidConfig("feed_capacity must be >= 1");
}

void apply_config_json(ServiceConfig& c, const nlohmann::json& j) {
    if (!j.is_object()) throw InvalidConfig("config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "data_dir") c.data_dir = value.get<std::string>();
            else if (key == "listen_address") c.listen_address = value.get<std::string>();
            else if (key == "n") c.dims.user_dim = count(key, value);
            else if (key == "m") c.dims.doc_dim = count(key, value);
            else if (key == "p") c.dims.context_dim = count(key, value);
            else if (key == "h") c.dims.hidden = count(key, value);
            else if (key == "eta_w") c.trainer.eta_w = value.get<double>();
            else if (key == "eta_emb") c.trainer.eta_emb = value.get<double>();
            else if (key == "l2_emb") c.trainer.l2_emb = value.get<double>();
            else if (key == "snapshot_every") c.trainer.snapshot_every = count(key, value);
            else if (key == "checkpoint_every") c.trainer.checkpoint_every = count(key, value);
            else if (key == "status_every") c.trainer.status_every = count(key, value);
            else if (key == "seed") c.trainer.seed = count(key, value);
            else if (key == "tau_rec") c.recommender.tau_rec = value.get<double>();
            else if (key == "pruning") c.recommender.pruning = parse_pruning(value.get<std::string>());
            else if (key == "knn_k") c.recommender.knn_k = count(key, value);
            else if (key == "exhaustive_max_users") c.recommender.exhaustive_max_users = count(key, value);
            else if (key == "alpha") c.alpha = value.get<double>();
            else if (key == "feed_capacity") c.feed_capacity = count(key, value);
            else if (key == "sync") c.sync = value.get<bool>();
            else throw InvalidConfig("unknown config key '" + key + "'");
        } catch (const nlohmann::json::exception& e) {
            throw InvalidConfig("bad value for config key '" + key + "': " + e.what());
        }
    }
}

void apply_config_env(ServiceConfig& config, const EnvLookup& env) {
    nlohmann::json j = nlohmann::json::object();
    for (const char* key : kKeys) {
        std::string name = "DIMRANK_";
        for (const char* p = key; *p; ++p) name.push_back(static_cast<char>(std::toupper(*p)));
        if (auto v = env(name)) j[key] = coerce(key, *v);
    }
    apply_config_json(config, j);
}

EnvLookup process_env() {
    return [](const std::string& name) -> std::optional<std::string> {
        if (const char* v = std::getenv(name.c_str())) return std::string(v);
        return std::nullopt;
    };
}

ServiceConfig load_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env) {
    ServiceConfig c;
    if (file) {
        std::ifstream in(*file);
        if (!in) throw InvalidConfig("cannot read config file " + file->string());
        try {
            apply_config_json(c, nlohmann::json::parse(in));
        } catch (const nlohmann::json::parse_error& e) {
            throw InvalidConfig("config file " + file->string() + " is not valid JSON: " + e.what());
        }
    }
    if (env) apply_config_env(c, env);
    c.validate();
    return c;
}

nlohmann::json to_json(const ServiceConfig& c) {
    return {{"data_dir", c.data_dir.string()},
            {"listen_address", c.listen_address},
            {"n", c.dims.user_dim},
            {"m", c.dims.doc_dim},
            {"p", c.dims.context_dim},
            {"h", c.dims.hidden},
            {"eta_w", c.trainer.eta_w},
            {"eta_emb", c.trainer.eta_emb},
            {"l2_emb", c.trainer.l2_emb},
            {"snapshot_every", c.trainer.snapshot_every},
            {"checkpoint_every", c.trainer.checkpoint_every},
            {"status_every", c.trainer.status_every},
            {"seed", c.trainer.seed},
            {"tau_rec", c.recommender.tau_rec},
            {"pruning", to_string(c.recommender.pruning)},
            {"knn_k", c.recommender.knn_k},
            {"exhaustive_max_users", c.recommender.exhaustive_max_users},
            {"alpha", c.alpha},
            {"feed_capacity", c.feed_capacity},
            {"sync", c.sync}};
}

}  // namespace dimrank
