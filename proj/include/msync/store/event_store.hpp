#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include <msync/common/append_log.hpp>
#include <msync/common/clock.hpp>
#include <msync/common/faults.hpp>
#include <msync/store/schema.hpp>

namespace mxsync::store {

enum class FilterOp { eq, ne, lt, le, gt, ge, contains };
enum class Aggregate { count, min, max, sum };

struct Filter {
    std::string column;
    FilterOp op{FilterOp::eq};
    Value value;
};

struct SortKey {
    std::string column;
    bool descending{false};
};

struct PageSpec {
    std::int64_t offset{0};
    std::optional<std::string> cursor;
    std::int64_t limit{100};
};

struct GroupBy {
    std::string column;
    Aggregate aggregate{Aggregate::count};
    /// Column aggregated by min/max/sum; ignored by count.
    std::optional<std::string> value_column;
};

struct QuerySpec {
    std::optional<std::set<std::string>> event_types;
    std::vector<Filter> filters;
    std::vector<SortKey> sort;
    PageSpec page;
    std::optional<GroupBy> group_by;
};

struct GroupRow {
    std::optional<Value> group;
    std::optional<Value> value;
};

struct QueryResult {
    std::vector<MappedRecord> records;
    std::vector<GroupRow> groups;
    std::optional<std::string> next_cursor;
};

struct PersistResult {
    std::int64_t inserted{0};
    std::int64_t duplicates{0};
};

FilterOp filter_op_from_string(const std::string& s);
std::string to_string(FilterOp op);
Aggregate aggregate_from_string(const std::string& s);
std::string to_string(Aggregate a);

void from_json(const nlohmann::json& j, QuerySpec& spec);
void to_json(nlohmann::json& j, const QuerySpec& spec);
nlohmann::json query_result_to_json(const QueryResult& result);

/// Embedded, append-only record store.
///
/// Records live in `<dir>/records.log` (one JSON record per frame) and are
/// indexed in memory by record key and by (eventType, blockTimestamp).
/// Persisting is idempotent on the record key.
class EventStore {
  public:
    struct Options {
        bool fsync{true};
        FaultHooksPtr hooks;
    };

    EventStore(const std::filesystem::path& dir, const Clock& clock, Options options);

    /// Makes a schema's columns known to queries; merges event types of
    /// schemas sharing an id.
    void register_schema(const MappingSchema& schema);

    PersistResult persist(std::span<const MappedRecord> records);

    [[nodiscard]] bool contains(const EventId& key) const;
    [[nodiscard]] std::optional<MappedRecord> get(const EventId& key) const;
    [[nodiscard]] QueryResult query(const QuerySpec& spec) const;

    [[nodiscard]] std::size_t size() const;
    [[nodiscard]] std::map<std::string, std::int64_t> count_by_type() const;
    /// Every record's canonical line, ordered by record key.
    [[nodiscard]] std::vector<std::string> canonical_dump() const;

  private:
    using TimeKey = std::tuple<std::string, std::int64_t, EventId>;

    void index(MappedRecord record);
    std::set<std::string> known_columns(const std::optional<std::set<std::string>>& event_types) const;

    const Clock& clock_;
    Options options_;
    AppendLog log_;
    mutable std::shared_mutex mutex_;
    std::map<EventId, MappedRecord> primary_;
    std::set<TimeKey> by_type_time_;
    std::map<std::string, MappingSchema> schemas_;
    std::uint64_t next_seq_{1};
};

}  // namespace mxsync::store
