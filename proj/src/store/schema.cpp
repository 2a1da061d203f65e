#include <msync/store/schema.hpp>

#include <charconv>
#include <limits>

#include <msync/common/error.hpp>
#include <msync/common/hash.hpp>

namespace mxsync::store {

void validate(const MappingSchema& schema) {
    if (schema.schema_id.empty()) throw Error(Errc::schema_error, "schemaId must not be empty");
    std::set<std::string> seen;
    for (const auto& m : schema.field_mappings) {
        if (m.target_column.empty()) throw Error(Errc::schema_error, "empty target column in " + schema.schema_id);
        if (m.source_path.empty()) {
            throw Error(Errc::schema_error, "empty source path for column " + m.target_column);
        }
        if (kPseudoColumns.contains(m.target_column)) {
            throw Error(Errc::schema_error, "target column shadows a built-in column: " + m.target_column);
        }
        if (!seen.insert(m.target_column).second) {
            throw Error(Errc::schema_error, "duplicate target column: " + m.target_column);
        }
        if (m.transform.kind == Transform::Kind::scale && m.transform.factor == 0) {
            throw Error(Errc::schema_error, "scale factor must be non-zero for column " + m.target_column);
        }
    }
}

std::optional<Value> MappedRecord::column(const std::string& name) const {
    if (auto it = columns.find(name); it != columns.end()) return it->second;
    if (name == "chainId") return record_key.chain_id;
    if (name == "blockHeight") return record_key.block_height;
    if (name == "txIndex") return record_key.tx_index;
    if (name == "logIndex") return record_key.log_index;
    if (name == "eventType") return event_type;
    if (name == "schemaId") return schema_id;
    if (name == "blockTimestamp") return block_timestamp;
    return std::nullopt;
}

namespace {

[[noreturn]] void coercion_failure(const Value& v, ValueType target, const std::string& column) {
    throw Error(Errc::coercion_error,
                "cannot convert '" + value_to_string(v) + "' to " + to_string(target) + " for column " + column);
}

std::optional<std::int64_t> parse_int(const std::string& s) {
    std::int64_t out = 0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    if (begin != end && *begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc{} || ptr != end || begin == end) return std::nullopt;
    return out;
}

std::int64_t to_integer(const Value& v, const std::string& column) {
    if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
    if (const auto* b = std::get_if<bool>(&v)) return *b ? 1 : 0;
    if (const auto* s = std::get_if<std::string>(&v)) {
        if (auto parsed = parse_int(*s)) return *parsed;
    }
    coercion_failure(v, ValueType::integer, column);
}

}  // namespace

Value coerce(const Value& v, ValueType target, const std::string& column) {
    switch (target) {
        case ValueType::integer:
            if (std::holds_alternative<std::int64_t>(v)) return v;
            if (const auto* s = std::get_if<std::string>(&v)) {
                if (auto parsed = parse_int(*s)) return *parsed;
            }
            break;
        case ValueType::string:
            return value_to_string(v);
        case ValueType::boolean:
            if (std::holds_alternative<bool>(v)) return v;
            if (const auto* s = std::get_if<std::string>(&v)) {
                if (*s == "true") return true;
                if (*s == "false") return false;
            }
            break;
        case ValueType::bytes:
            if (std::holds_alternative<Bytes>(v)) return v;
            if (const auto* s = std::get_if<std::string>(&v)) {
                try {
                    return from_hex(*s);
                } catch (const Error&) {
                }
            }
            break;
    }
    coercion_failure(v, target, column);
}

MappedRecord apply_schema(const DecodedEvent& event, const MappingSchema& schema) {
    if (!schema.event_types.empty() && !schema.event_types.contains(event.event_type)) {
        throw Error(Errc::schema_error, "schema " + schema.schema_id + " does not cover event type " + event.event_type);
    }
    MappedRecord record;
    record.record_key = event.identity;
    record.event_type = event.event_type;
    record.schema_id = schema.schema_id;
    record.block_timestamp = event.block_timestamp;

    for (const auto& m : schema.field_mappings) {
        const PayloadField* source = nullptr;
        for (const auto& f : event.fields) {
            if (f.name == m.source_path) {
                source = &f;
                break;
            }
        }
        if (source == nullptr) {
            if (m.optional) continue;
            throw Error(Errc::schema_error, "source path '" + m.source_path + "' not found for column " +
                                                m.target_column + " in event " + event.identity.to_string());
        }
        Value v = source->value;
        switch (m.transform.kind) {
            case Transform::Kind::none:
            case Transform::Kind::rename:
                break;
            case Transform::Kind::to_string:
                v = value_to_string(v);
                break;
            case Transform::Kind::to_integer:
                v = to_integer(v, m.target_column);
                break;
            case Transform::Kind::scale: {
                const std::int64_t base = to_integer(v, m.target_column);
                std::int64_t scaled = 0;
                if (__builtin_mul_overflow(base, m.transform.factor, &scaled)) {
                    throw Error(Errc::coercion_error, "scale overflow for column " + m.target_column);
                }
                v = scaled;
                break;
            }
        }
        record.columns.emplace(m.target_column, coerce(v, m.target_type, m.target_column));
    }
    return record;
}

std::string to_string(ValueType t) {
    switch (t) {
        case ValueType::integer: return "int";
        case ValueType::string: return "string";
        case ValueType::boolean: return "bool";
        case ValueType::bytes: return "bytes";
    }
    return "string";
}

ValueType value_type_from_string(const std::string& s) {
    if (s == "int" || s == "integer") return ValueType::integer;
    if (s == "string") return ValueType::string;
    if (s == "bool" || s == "boolean") return ValueType::boolean;
    if (s == "bytes") return ValueType::bytes;
    throw Error(Errc::schema_error, "unknown column type: " + s);
}

std::string to_string(const Transform& t) {
    switch (t.kind) {
        case Transform::Kind::none: return "";
        case Transform::Kind::rename: return "rename";
        case Transform::Kind::to_string: return "toString";
        case Transform::Kind::to_integer: return "toInteger";
        case Transform::Kind::scale: return "scale(" + std::to_string(t.factor) + ")";
    }
    return "";
}

Transform transform_from_string(const std::string& s) {
    if (s.empty() || s == "none") return {};
    if (s == "rename") return {Transform::Kind::rename, 1};
    if (s == "toString") return {Transform::Kind::to_string, 1};
    if (s == "toInteger") return {Transform::Kind::to_integer, 1};
    if (s.starts_with("scale(") && s.ends_with(")")) {
        const auto inner = s.substr(6, s.size() - 7);
        std::int64_t factor = 0;
        auto [ptr, ec] = std::from_chars(inner.data(), inner.data() + inner.size(), factor);
        if (ec == std::errc{} && ptr == inner.data() + inner.size() && factor != 0) {
            return {Transform::Kind::scale, factor};
        }
    }
    throw Error(Errc::schema_error, "unknown transform: " + s);
}

void to_json(nlohmann::json& j, const FieldMapping& m) {
    j = {{"column", m.target_column}, {"source", m.source_path}, {"type", to_string(m.target_type)}};
    if (m.transform.kind != Transform::Kind::none) j["transform"] = to_string(m.transform);
    if (m.optional) j["optional"] = true;
}

void from_json(const nlohmann::json& j, FieldMapping& m) {
    m = FieldMapping{};
    j.at("column").get_to(m.target_column);
    m.source_path = j.value("source", m.target_column);
    m.target_type = value_type_from_string(j.value("type", std::string("string")));
    m.transform = transform_from_string(j.value("transform", std::string()));
    m.optional = j.value("optional", false);
}

void to_json(nlohmann::json& j, const MappingSchema& s) {
    j = {{"schemaId", s.schema_id}, {"eventTypes", s.event_types}, {"fields", s.field_mappings}};
}

void from_json(const nlohmann::json& j, MappingSchema& s) {
    s = MappingSchema{};
    j.at("schemaId").get_to(s.schema_id);
    s.event_types = j.value("eventTypes", std::set<std::string>{});
    j.at("fields").get_to(s.field_mappings);
}

nlohmann::json record_to_json(const MappedRecord& r) {
    nlohmann::json cols = nlohmann::json::object();
    for (const auto& [k, v] : r.columns) cols[k] = value_to_json(v);
    return {{"recordKey", r.record_key},
            {"eventType", r.event_type},
            {"schemaId", r.schema_id},
            {"blockTimestamp", r.block_timestamp},
            {"storedAt", r.stored_at},
            {"seq", r.seq},
            {"columns", std::move(cols)}};
}

MappedRecord record_from_json(const nlohmann::json& j) {
    MappedRecord r;
    j.at("recordKey").get_to(r.record_key);
    j.at("eventType").get_to(r.event_type);
    j.at("schemaId").get_to(r.schema_id);
    j.at("blockTimestamp").get_to(r.block_timestamp);
    r.stored_at = j.value("storedAt", std::int64_t{0});
    r.seq = j.value("seq", std::uint64_t{0});
    for (const auto& [k, v] : j.at("columns").items()) r.columns.emplace(k, value_from_json(v));
    return r;
}

std::string canonical_line(const MappedRecord& r) {
    auto j = record_to_json(r);
    j.erase("storedAt");
    j.erase("seq");
    return j.dump();
}

}  // namespace mxsync::store
