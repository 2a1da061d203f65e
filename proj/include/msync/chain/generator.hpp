#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include <msync/chain/simulator.hpp>

namespace mxsync::chain {

struct FieldGenerator {
    enum class Kind { integer, string, boolean, bytes, address };

    std::string name;
    Kind kind{Kind::integer};
    std::int64_t min{0};         ///< integer: inclusive lower bound
    std::int64_t max{100};       ///< integer: inclusive upper bound
    std::string prefix{"v"};     ///< string
    std::int64_t cardinality{16};///< string/address: number of distinct values
    std::int64_t length{8};      ///< bytes
};

struct EventTemplate {
    std::string contract_address;
    std::string event_signature;
    std::vector<FieldGenerator> fields;
    std::int64_t weight{1};
};

/// Random-but-deterministic block content: the events of a block are a pure
/// function of (seed, chainId, height, generator).
struct BlockGenerator {
    std::vector<EventTemplate> templates;
    std::int64_t min_events{0};
    std::int64_t max_events{4};
    /// Percent chance that an event shares the previous event's transaction.
    std::int64_t same_tx_percent{25};
};

std::vector<EventSpec> generate_block_events(std::uint64_t seed, const std::string& chain_id, Height height,
                                             const BlockGenerator& generator);

void from_json(const nlohmann::json& j, FieldGenerator& f);
void from_json(const nlohmann::json& j, EventTemplate& t);
void from_json(const nlohmann::json& j, BlockGenerator& g);
void to_json(nlohmann::json& j, const FieldGenerator& f);
void to_json(nlohmann::json& j, const EventTemplate& t);
void to_json(nlohmann::json& j, const BlockGenerator& g);

/// {"contract", "signature", "payload", "txIndex"?, "logIndex"?}; payload is an
/// object of name to value or an array of [name, value] pairs.
void from_json(const nlohmann::json& j, EventSpec& e);
void to_json(nlohmann::json& j, const ChainEvent& e);

}  // namespace mxsync::chain
