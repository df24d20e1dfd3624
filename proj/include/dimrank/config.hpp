#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "json.hpp"

#include "dimrank/model.hpp"
#include "dimrank/recommender.hpp"
#include "dimrank/trainer.hpp"

namespace dimrank {

struct ServiceConfig {
    std::filesystem::path data_dir = "data";
    std::string listen_address = "127.0.0.1:8080";
    ModelDims dims;
    TrainerConfig trainer;
    RecommenderConfig recommender;
    double alpha = 0.5;
    std::size_t feed_capacity = kDefaultFeedCapacity;
    bool sync = true;

    void validate() const;
    StoreOptions store_options() const { return {sync, feed_capacity}; }
};

/// Recognized keys (same names in the JSON file and, upper-cased with a
/// DIMRANK_ prefix, in the environment): data_dir, listen_address, n, m, h,
/// eta_w, eta_emb, l2_emb, snapshot_every, checkpoint_every, status_every,
/// seed, tau_rec, pruning, knn_k, exhaustive_max_users, alpha,
/// feed_capacity, sync.
void apply_config_json(ServiceConfig& config, const nlohmann::json& j);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
void apply_config_env(ServiceConfig& config, const EnvLookup& env);
EnvLookup process_env();

/// Defaults, then the file (if any), then the environment.
ServiceConfig load_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env);

nlohmann::json to_json(const ServiceConfig& config);

}  // namespace dimrank
