#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include <msync/chain/generator.hpp>
#include <msync/chain/simulator.hpp>
#include <msync/common/retry.hpp>

namespace mxsync::service {

struct ChainConfig {
    chain::ChainParams params;
    chain::SporkTable sporks;  ///< empty for non-sporked chains
    /// Block content for self-minting simulated chains (serve mode).
    std::optional<chain::BlockGenerator> generator;
};

struct SchedulerConfig {
    std::int64_t tick_ms{1000};
    std::size_t workers{4};
    Height partition_size{0};  ///< 0 = each chain's max batch
    std::size_t backfill_jobs_per_tick{256};
};

/// Serve mode only: simulated chains grow with wall time.
struct SimulationConfig {
    Height initial_height{0};
};

struct ServiceConfig {
    std::vector<ChainConfig> chains;
    SchedulerConfig scheduler;
    std::filesystem::path data_dir{"msync-data"};
    std::filesystem::path store_path;  ///< default <data_dir>/store
    std::filesystem::path queue_path;  ///< default <data_dir>/queue
    RetryPolicy job_retry;
    RetryPolicy delivery_retry;
    std::string http_bind{"127.0.0.1:8787"};
    std::string metrics_bind;  ///< empty = served by the API listener
    bool fsync{true};
    std::uint64_t seed{1};
    SimulationConfig simulation;
};

/// Environment variable naming the config file.
inline constexpr const char* kConfigEnv = "MSYNC_CONFIG";

ChainConfig chain_config_from_json(const nlohmann::json& j);
nlohmann::json chain_config_to_json(const ChainConfig& c);

/// Parses and validates; unknown keys are rejected. Errors name the field.
ServiceConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ServiceConfig& c);
ServiceConfig load_config(const std::filesystem::path& path);

/// Throws Error(invalid_argument) naming the offending field. Creates the
/// data directories and checks they are writable.
void validate(ServiceConfig& config);

/// "host:port" split; throws Error(invalid_argument) naming `field`.
std::pair<std::string, int> parse_bind(const std::string& bind, const std::string& field);

}  // namespace mxsync::service
