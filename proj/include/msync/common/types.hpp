#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace mxsync {

/// Block height. Signed so that -1 can stand for "nothing scanned yet".
using Height = std::int64_t;

using Bytes = std::vector<std::uint8_t>;

/// Typed payload/column value. Alternatives are ordered, so variant comparison
/// gives a total order across types (integers < strings < booleans < bytes).
using Value = std::variant<std::int64_t, std::string, bool, Bytes>;

/// Inclusive block range.
struct BlockRange {
    Height from{0};
    Height to{0};

    [[nodiscard]] Height size() const noexcept { return to - from + 1; }
    auto operator<=>(const BlockRange&) const = default;
};

/// Identity of an on-chain event: (chainId, blockHeight, txIndex, logIndex).
struct EventId {
    std::string chain_id;
    Height block_height{0};
    std::int64_t tx_index{0};
    std::int64_t log_index{0};

    auto operator<=>(const EventId&) const = default;
    [[nodiscard]] std::string to_string() const;
};

struct PayloadField {
    std::string name;
    Value value;

    bool operator==(const PayloadField&) const = default;
};

/// A raw event decoded into typed, named fields and tagged with the
/// registration it belongs to.
struct DecodedEvent {
    EventId identity;
    std::string event_type;
    std::int64_t block_timestamp{0};
    std::vector<PayloadField> fields;

    bool operator==(const DecodedEvent&) const = default;
};

std::string value_to_string(const Value& v);

// JSON form: integers and booleans as JSON natives, strings as strings,
// bytes as {"bytes": "<hex>"}.
nlohmann::json value_to_json(const Value& v);
Value value_from_json(const nlohmann::json& j);

nlohmann::json optional_value_to_json(const std::optional<Value>& v);
std::optional<Value> optional_value_from_json(const nlohmann::json& j);

void to_json(nlohmann::json& j, const EventId& id);
void from_json(const nlohmann::json& j, EventId& id);
void to_json(nlohmann::json& j, const BlockRange& r);
void from_json(const nlohmann::json& j, BlockRange& r);

nlohmann::json payload_to_json(const std::vector<PayloadField>& fields);
std::vector<PayloadField> payload_from_json(const nlohmann::json& j);

}  // namespace mxsync
