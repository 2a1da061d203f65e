#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <msync/common/types.hpp>

namespace mxsync::chain {

struct ChainParams {
    std::string chain_id;
    /// Maximum blocks scanned by one sync job.
    std::int64_t max_batch{100};
    /// Trailing blocks excluded from sync (confirmation depth).
    std::int64_t confirmation_depth{5};
    bool sporked{false};
    std::int64_t block_interval_s{12};
    std::int64_t genesis_time{1'600'000'000};
};

void validate(const ChainParams& params);

struct SporkEntry {
    Height start{0};
    std::optional<Height> end;  ///< inclusive; nullopt = open-ended
    std::string endpoint_id;

    bool operator==(const SporkEntry&) const = default;
};

using SporkTable = std::vector<SporkEntry>;

/// Throws Error(invalid_argument) unless entries are contiguous from 0,
/// ascending, non-overlapping, and only the last one is open-ended.
void validate(const SporkTable& table);

struct BlockHeader {
    Height height{0};
    std::string block_hash;
    std::string parent_hash;
    std::int64_t timestamp{0};
};

struct ChainEvent {
    std::string chain_id;
    Height block_height{0};
    std::string block_hash;
    std::int64_t block_timestamp{0};
    std::int64_t tx_index{0};
    std::int64_t log_index{0};
    std::string contract_address;
    std::string event_signature;
    std::vector<PayloadField> payload;

    [[nodiscard]] EventId id() const { return {chain_id, block_height, tx_index, log_index}; }
    bool operator==(const ChainEvent&) const = default;
};

struct ChainHead {
    std::string chain_id;
    Height latest_height{0};
    std::string head_hash;
};

/// (contractAddress, eventSignature)
struct EventKey {
    std::string contract_address;
    std::string event_signature;

    auto operator<=>(const EventKey&) const = default;
};

using EventFilter = std::set<EventKey>;

struct EventSpec {
    std::string contract_address;
    std::string event_signature;
    std::vector<PayloadField> payload;
    std::optional<std::int64_t> tx_index;
    std::optional<std::int64_t> log_index;
};

inline const std::string kGenesisParentHash(64, '0');

/// Deterministic in-memory archive nodes for several chains.
///
/// Non-sporked chains are served by a single endpoint "<chainId>-archive";
/// sporked chains by one endpoint per spork table entry. Reads are safe from
/// concurrent callers; mint/reorg are serialized per chain.
class Simulator {
  public:
    explicit Simulator(std::uint64_t seed);
    ~Simulator();

    void add_chain(const ChainParams& params, SporkTable sporks = {});

    BlockHeader mint_block(const std::string& chain_id, std::vector<EventSpec> events);

    /// Replaces the top `depth` blocks with an alternative branch of
    /// depth + extra blocks whose events are re-drawn from a perturbed seed.
    ChainHead reorg(const std::string& chain_id, Height depth, Height extra = 0);

    /// Reinstates the branch displaced by the most recent reorg (the node
    /// abandoning an uncle branch). Valid only while no block was minted since.
    ChainHead revert_reorg(const std::string& chain_id);

    std::vector<ChainEvent> get_events(const std::string& endpoint_id, const std::string& chain_id, Height from,
                                       Height to, const EventFilter* filter = nullptr) const;

    [[nodiscard]] ChainHead latest_height(const std::string& chain_id) const;
    [[nodiscard]] bool has_blocks(const std::string& chain_id) const;
    [[nodiscard]] BlockHeader block_header(const std::string& chain_id, Height height) const;

    [[nodiscard]] bool has_chain(const std::string& chain_id) const;
    [[nodiscard]] std::vector<std::string> chain_ids() const;
    [[nodiscard]] ChainParams params(const std::string& chain_id) const;
    [[nodiscard]] SporkTable spork_table(const std::string& chain_id) const;

    /// Whole-chain accessor that ignores spork boundaries. Oracle for tests.
    [[nodiscard]] std::vector<ChainEvent> canonical_events(const std::string& chain_id, Height from,
                                                           Height to) const;

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

  private:
    struct Block;
    struct ChainState;

    ChainState& chain(const std::string& chain_id) const;
    Block build_block(const ChainState& c, Height height, const std::string& parent_hash, std::uint64_t branch,
                      std::vector<EventSpec> specs) const;

    std::uint64_t seed_;
    mutable std::shared_mutex chains_mutex_;
    std::map<std::string, std::unique_ptr<ChainState>> chains_;
    std::map<std::string, std::string> endpoint_chain_;
};

}  // namespace mxsync::chain
