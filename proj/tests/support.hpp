#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <stdexcept>

#include <stdlib.h>
#include <string>
#include <vector>

#include <msync/chain/simulator.hpp>
#include <msync/common/clock.hpp>
#include <msync/dispatch/transport.hpp>
#include <msync/service/config.hpp>
#include <msync/service/service.hpp>
#include <msync/store/schema.hpp>

namespace testing {

using namespace mxsync;

/// Scratch directory removed on destruction.
class TempDir {
  public:
    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "msync-test-XXXXXX").string();
        if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

  private:
    std::filesystem::path path_;
};

inline chain::ChainParams eth_params(std::int64_t mb = 100, std::int64_t gamma = 5) {
    return {.chain_id = "eth", .max_batch = mb, .confirmation_depth = gamma, .sporked = false,
            .block_interval_s = 12, .genesis_time = 1'600'000'000};
}

inline chain::ChainParams flow_params(std::int64_t mb = 50, std::int64_t gamma = 3) {
    return {.chain_id = "flow", .max_batch = mb, .confirmation_depth = gamma, .sporked = true,
            .block_interval_s = 1, .genesis_time = 1'600'000'000};
}

inline chain::EventSpec ev(const std::string& contract, const std::string& sig, std::vector<PayloadField> payload = {}) {
    return {contract, sig, std::move(payload), std::nullopt, std::nullopt};
}

inline chain::EventSpec transfer(const std::string& contract, std::int64_t token, const std::string& from = "0xa",
                                 const std::string& to = "0xb") {
    return ev(contract, "Transfer(address,address,uint256)",
              {{"from", from}, {"to", to}, {"tokenId", token}});
}

inline void mint_empty(chain::Simulator& sim, const std::string& chain_id, Height n) {
    for (Height i = 0; i < n; ++i) sim.mint_block(chain_id, {});
}

/// Schema mapping every listed integer/string field onto itself.
inline store::MappingSchema identity_schema(const std::string& id,
                                            std::vector<std::pair<std::string, store::ValueType>> fields) {
    store::MappingSchema s;
    s.schema_id = id;
    for (auto& [name, type] : fields) s.field_mappings.push_back({name, name, type, {}, false});
    return s;
}

inline store::MappingSchema transfer_schema(const std::string& id = "transfer") {
    return identity_schema(id, {{"from", store::ValueType::string},
                                {"to", store::ValueType::string},
                                {"tokenId", store::ValueType::integer}});
}

/// Service wired to in-memory transport and a virtual clock.
struct World {
    explicit World(std::vector<service::ChainConfig> chains, std::size_t workers = 2, Height partition_size = 0,
                   FaultHooksPtr hooks = nullptr)
        : clock(1'700'000'000'000) {
        config.chains = std::move(chains);
        config.data_dir = dir.path() / "data";
        config.fsync = false;
        config.seed = 7;
        config.scheduler.workers = workers;
        config.scheduler.partition_size = partition_size;
        config.job_retry = {.base_ms = 10, .factor = 2.0, .max_attempts = 5};
        config.delivery_retry = {.base_ms = 10, .factor = 2.0, .max_attempts = 5};
        this->hooks = std::move(hooks);
        open();
    }

    void open() { svc = std::make_unique<service::Service>(config, clock, transport, service::Service::Options{hooks}); }
    void reopen() {
        svc.reset();
        open();
    }

    /// Ticks (advancing the clock) until the engine has nothing left to do.
    int run_until_caught_up(int max_ticks = 10'000) {
        int n = 0;
        while (n < max_ticks) {
            svc->tick();
            clock.advance(1000);
            ++n;
            if (svc->engine().caught_up()) break;
        }
        return n;
    }

    void drain_deliveries(int max_rounds = 1000) {
        for (int i = 0; i < max_rounds; ++i) {
            svc->deliver();
            if (svc->dispatcher().queue().count(dispatch::NotificationState::pending) == 0) return;
            clock.advance(60'000);
        }
    }

    chain::Simulator& sim() { return svc->simulator(); }

    TempDir dir;
    VirtualClock clock;
    dispatch::LocalTransport transport;
    service::ServiceConfig config;
    FaultHooksPtr hooks;
    std::unique_ptr<service::Service> svc;
};

inline service::ChainConfig chain_config(chain::ChainParams p, chain::SporkTable sporks = {}) {
    return {std::move(p), std::move(sporks), std::nullopt};
}

}  // namespace testing
