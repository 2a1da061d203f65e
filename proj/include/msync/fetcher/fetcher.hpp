#pragma once

#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include <msync/chain/catalog.hpp>
#include <msync/chain/simulator.hpp>
#include <msync/common/faults.hpp>
#include <msync/common/types.hpp>
#include <msync/registry/registry.hpp>

namespace mxsync::fetcher {

struct FetchRequest {
    std::string chain_id;
    Height from{0};
    Height to{0};
    /// Empty = every event in the range.
    chain::EventFilter eoi_filter;
};

struct Subrange {
    BlockRange range;
    std::string endpoint_id;

    bool operator==(const Subrange&) const = default;
};

/// Intersects [from, to] with each spork in ascending order. Throws
/// Error(spork_range) when the range is not covered by the table.
std::vector<Subrange> split_by_sporks(const FetchRequest& request, const chain::SporkTable& table);

/// Turns a raw log into typed fields tagged with the registration id.
DecodedEvent decode(const chain::ChainEvent& raw, const registry::EventRegistration& registration);

/// Per-chain pull-only adapter over an archive node.
class ChainAdapter {
  public:
    virtual ~ChainAdapter() = default;

    [[nodiscard]] virtual std::string chain_id() const = 0;
    [[nodiscard]] virtual chain::ChainParams params() const = 0;
    [[nodiscard]] virtual chain::SporkTable spork_table() const = 0;
    [[nodiscard]] virtual std::vector<chain::ChainEvent> get_events(const std::string& endpoint_id, Height from,
                                                                    Height to,
                                                                    const chain::EventFilter* filter) const = 0;
    [[nodiscard]] virtual std::optional<chain::ChainHead> head() const = 0;
    [[nodiscard]] virtual std::optional<chain::BlockHeader> header(Height height) const = 0;
};

class SimulatorAdapter final : public ChainAdapter {
  public:
    /// `params` overrides the simulator's view of batch size and confirmation
    /// depth (deployment configuration); defaults to the simulator's values.
    SimulatorAdapter(std::shared_ptr<const chain::Simulator> simulator, std::string chain_id,
                     std::optional<chain::ChainParams> params = std::nullopt);

    [[nodiscard]] std::string chain_id() const override { return chain_id_; }
    [[nodiscard]] chain::ChainParams params() const override { return params_; }
    [[nodiscard]] chain::SporkTable spork_table() const override;
    [[nodiscard]] std::vector<chain::ChainEvent> get_events(const std::string& endpoint_id, Height from, Height to,
                                                            const chain::EventFilter* filter) const override;
    [[nodiscard]] std::optional<chain::ChainHead> head() const override;
    [[nodiscard]] std::optional<chain::BlockHeader> header(Height height) const override;

  private:
    std::shared_ptr<const chain::Simulator> simulator_;
    std::string chain_id_;
    chain::ChainParams params_;
};

/// Result of scanning a block range for a set of registrations.
struct ScopedFetch {
    /// Every event the endpoints returned for the range, counted at the
    /// adapter boundary.
    std::int64_t total_events{0};
    std::vector<DecodedEvent> matched;
    /// Events matching no registration in scope.
    std::int64_t unmatched{0};
};

/// Spork-aware fetch middleware: splits ranges across endpoints, fetches the
/// pieces, and merges them into one ordered stream.
class Fetcher final : public chain::ChainCatalog {
  public:
    struct Options {
        bool concurrent_subranges{true};
        FaultHooksPtr hooks;
    };

    Fetcher() : Fetcher(Options{}) {}
    explicit Fetcher(Options options);

    void add_adapter(std::shared_ptr<ChainAdapter> adapter);
    [[nodiscard]] const ChainAdapter& adapter(const std::string& chain_id) const;

    /// Raw events for the request, globally ordered by (height, tx, log).
    /// Any subrange failure fails the whole request.
    [[nodiscard]] std::vector<chain::ChainEvent> fetch_raw(const FetchRequest& request) const;

    /// Filtered and decoded events; every event must belong to one of
    /// `registrations`.
    [[nodiscard]] std::vector<DecodedEvent> fetch_range(
        const FetchRequest& request, std::span<const registry::EventRegistration> registrations) const;

    [[nodiscard]] ScopedFetch fetch_scope(const std::string& chain_id, BlockRange range,
                                          std::span<const registry::EventRegistration> scope) const;

    [[nodiscard]] std::vector<std::string> chains() const override;
    [[nodiscard]] bool has_chain(const std::string& chain_id) const override;
    [[nodiscard]] chain::ChainParams chain_params(const std::string& chain_id) const override;
    [[nodiscard]] std::optional<chain::ChainHead> chain_head(const std::string& chain_id) const override;
    [[nodiscard]] std::optional<std::string> block_hash(const std::string& chain_id, Height height) const override;

  private:
    std::vector<chain::ChainEvent> fetch_unchecked(const FetchRequest& request, std::int64_t* raw_count) const;

    Options options_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, std::shared_ptr<ChainAdapter>> adapters_;
};

}  // namespace mxsync::fetcher
