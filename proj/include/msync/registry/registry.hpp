#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include <msync/chain/catalog.hpp>
#include <msync/common/append_log.hpp>
#include <msync/common/clock.hpp>
#include <msync/common/types.hpp>
#include <msync/store/schema.hpp>

namespace mxsync::registry {

/// An event of interest with its sync cursors.
///
/// Cursors are "last scanned" heights: regular jobs continue at
/// synced_latest + 1, and the backfill group covers
/// [init_block_height, synced_start_block_height - 1].
struct EventRegistration {
    std::string registration_id;
    std::string chain_id;
    std::string contract_address;
    std::string event_signature;
    Height init_block_height{0};
    Height synced_start_block_height{0};
    Height synced_latest_block_height{-1};
    /// Hash of the block at synced_latest_block_height when it was scanned;
    /// empty while nothing has been scanned.
    std::string latest_block_hash;
    store::MappingSchema mapping_schema;
    std::int64_t created_at{0};
    Height partition_size{1};
    bool halted{false};
    std::string halt_reason;
};

struct CursorUpdate {
    std::string registration_id;
    Height from_height{0};
    Height new_latest{0};
    std::string block_hash;
    std::string job_id;
};

struct AdvanceResult {
    EventRegistration registration;
    bool applied{false};
};

struct SyncedRange {
    BlockRange range;
    std::string job_id;
    bool backfill{false};
};

struct BackfillStatus {
    std::string registration_id;
    Height init_block_height{0};
    Height synced_start_block_height{0};
    Height partition_size{1};
    bool complete{false};
    std::vector<BlockRange> done;     ///< merged, ascending
    std::vector<BlockRange> missing;  ///< uncovered gaps of [init, start - 1]
};

/// Stable identity: lowercase hex SHA-256 of the length-prefixed triple.
std::string registration_id(const std::string& chain_id, const std::string& contract_address,
                            const std::string& event_signature);

void to_json(nlohmann::json& j, const EventRegistration& r);
void from_json(const nlohmann::json& j, EventRegistration& r);
void to_json(nlohmann::json& j, const BackfillStatus& s);

/// The block sync database: registrations, cursors and backfill progress,
/// persisted as an append-only journal replayed at construction.
class Registry {
  public:
    struct Options {
        bool fsync{true};
        /// Backfill partition size; 0 = the chain's max batch.
        Height partition_size{0};
    };

    Registry(std::filesystem::path journal, const chain::ChainCatalog& catalog, const Clock& clock, Options options);

    EventRegistration register_event(const std::string& chain_id, const std::string& contract_address,
                                     const std::string& event_signature, Height init_block_height,
                                     store::MappingSchema schema);

    /// Moves synced_latest forward; stale updates are reported as no-ops.
    AdvanceResult advance_latest(const CursorUpdate& update);

    /// Records a successfully synced backfill partition.
    void mark_partition_done(const std::string& registration_id, BlockRange range, const std::string& job_id);

    /// Collapses synced_start to init once every partition is done.
    /// Throws Error(incomplete_backfill) while gaps remain.
    EventRegistration complete_backfill(const std::string& registration_id);

    EventRegistration halt(const std::string& registration_id, const std::string& reason);

    [[nodiscard]] std::vector<EventRegistration> list_registrations(
        const std::optional<std::string>& chain_id = std::nullopt) const;
    [[nodiscard]] std::optional<EventRegistration> find(const std::string& registration_id) const;
    [[nodiscard]] EventRegistration get(const std::string& registration_id) const;
    [[nodiscard]] bool contains(const std::string& registration_id) const;
    [[nodiscard]] BackfillStatus backfill_status(const std::string& registration_id) const;
    /// Ranges of every successful job, in completion order.
    [[nodiscard]] std::vector<SyncedRange> sync_history(const std::string& registration_id) const;

  private:
    struct Entry {
        EventRegistration registration;
        std::vector<BlockRange> done_partitions;
        std::vector<SyncedRange> history;
    };

    void apply(const nlohmann::json& op);
    Entry& entry(const std::string& registration_id);
    const Entry& entry(const std::string& registration_id) const;
    static BackfillStatus status_of(const Entry& e);

    const chain::ChainCatalog& catalog_;
    const Clock& clock_;
    Options options_;
    AppendLog journal_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, Entry> entries_;
};

}  // namespace mxsync::registry
