#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include <msync/common/types.hpp>

namespace mxsync::store {

enum class ValueType { integer, string, boolean, bytes };

struct Transform {
    enum class Kind { none, rename, to_string, to_integer, scale };
    Kind kind{Kind::none};
    std::int64_t factor{1};  ///< scale(n): integer multiplication by n

    bool operator==(const Transform&) const = default;
};

struct FieldMapping {
    std::string target_column;
    std::string source_path;
    ValueType target_type{ValueType::string};
    Transform transform;
    bool optional{false};

    bool operator==(const FieldMapping&) const = default;
};

/// Developer-defined transformation from decoded events to store records.
/// One schema may serve several event types (e.g. the same token schema on
/// two chains). Record timestamps always come from the block timestamp.
struct MappingSchema {
    std::string schema_id;
    std::set<std::string> event_types;
    std::vector<FieldMapping> field_mappings;

    [[nodiscard]] bool same_mappings(const MappingSchema& other) const {
        return field_mappings == other.field_mappings;
    }
};

/// Columns every record carries regardless of its schema.
inline const std::set<std::string> kPseudoColumns = {"chainId", "blockHeight", "txIndex", "logIndex",
                                                     "eventType", "schemaId", "blockTimestamp"};

/// Throws Error(schema_error) on empty id, duplicate or reserved target
/// columns, empty source paths, or non-positive scale factors.
void validate(const MappingSchema& schema);

struct MappedRecord {
    EventId record_key;
    std::string event_type;
    std::string schema_id;
    std::map<std::string, Value> columns;
    std::int64_t stored_at{0};  ///< diagnostic only
    std::int64_t block_timestamp{0};
    std::uint64_t seq{0};       ///< ingestion sequence assigned by the store

    /// Column lookup including pseudo columns; nullopt when absent.
    [[nodiscard]] std::optional<Value> column(const std::string& name) const;
};

MappedRecord apply_schema(const DecodedEvent& event, const MappingSchema& schema);

/// Converts a value to the requested type, throwing Error(coercion_error).
Value coerce(const Value& v, ValueType target, const std::string& column);

std::string to_string(ValueType t);
ValueType value_type_from_string(const std::string& s);
std::string to_string(const Transform& t);
Transform transform_from_string(const std::string& s);

void to_json(nlohmann::json& j, const FieldMapping& m);
void from_json(const nlohmann::json& j, FieldMapping& m);
void to_json(nlohmann::json& j, const MappingSchema& s);
void from_json(const nlohmann::json& j, MappingSchema& s);

/// Full record including storage metadata (store file format).
nlohmann::json record_to_json(const MappedRecord& r);
MappedRecord record_from_json(const nlohmann::json& j);

/// Canonical line for content comparison: everything except stored_at and seq.
std::string canonical_line(const MappedRecord& r);

}  // namespace mxsync::store
