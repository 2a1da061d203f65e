#pragma once

#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include <msync/chain/simulator.hpp>
#include <msync/common/clock.hpp>
#include <msync/common/faults.hpp>
#include <msync/dispatch/dispatcher.hpp>
#include <msync/fetcher/fetcher.hpp>
#include <msync/integrity/integrity.hpp>
#include <msync/registry/registry.hpp>
#include <msync/service/config.hpp>
#include <msync/store/event_store.hpp>
#include <msync/sync/engine.hpp>

namespace mxsync::service {

/// Composition root: simulated chains, fetcher, registry, store, integrity,
/// dispatcher and engine wired from one configuration. Reopening the same
/// data directory restores cursors, records, checksums and the queue.
class Service {
  public:
    struct Options {
        FaultHooksPtr hooks;
        /// Grow generator-backed chains with the clock (serve mode).
        bool wall_clock_chains{false};
    };

    Service(ServiceConfig config, const Clock& clock, dispatch::Transport& transport, Options options);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    registry::EventRegistration register_event(const std::string& chain_id, const std::string& contract_address,
                                               const std::string& event_signature, Height init_block_height,
                                               store::MappingSchema schema);

    /// Mints blocks from the chain's generator (empty blocks without one).
    chain::BlockHeader mint_generated(const std::string& chain_id, Height blocks);
    /// Mints generator blocks until the wall-clock height is reached.
    void advance_wall_clock_chains();

    sync::TickReport tick();
    dispatch::DeliveryStats deliver();

    [[nodiscard]] std::string metrics_text() const;
    [[nodiscard]] nlohmann::json health() const;

    [[nodiscard]] const ServiceConfig& config() const noexcept { return config_; }
    [[nodiscard]] const Clock& clock() const noexcept { return clock_; }
    [[nodiscard]] chain::Simulator& simulator() noexcept { return *simulator_; }
    [[nodiscard]] fetcher::Fetcher& fetcher() noexcept { return *fetcher_; }
    [[nodiscard]] registry::Registry& registry() noexcept { return *registry_; }
    [[nodiscard]] store::EventStore& store() noexcept { return *store_; }
    [[nodiscard]] integrity::Integrity& integrity() noexcept { return *integrity_; }
    [[nodiscard]] dispatch::Dispatcher& dispatcher() noexcept { return *dispatcher_; }
    [[nodiscard]] sync::Engine& engine() noexcept { return *engine_; }
    [[nodiscard]] WorkerPool& delivery_pool() noexcept { return *delivery_pool_; }

  private:
    Height wall_clock_height(const ChainConfig& chain) const;

    ServiceConfig config_;
    const Clock& clock_;
    Options options_;
    std::int64_t sim_epoch_ms_{0};
    std::shared_ptr<chain::Simulator> simulator_;
    std::unique_ptr<fetcher::Fetcher> fetcher_;
    std::unique_ptr<registry::Registry> registry_;
    std::unique_ptr<store::EventStore> store_;
    std::unique_ptr<integrity::Integrity> integrity_;
    std::unique_ptr<dispatch::Dispatcher> dispatcher_;
    std::unique_ptr<sync::Engine> engine_;
    std::unique_ptr<WorkerPool> delivery_pool_;
};

}  // namespace mxsync::service
