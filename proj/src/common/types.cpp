#include <msync/common/types.hpp>

#include <msync/common/error.hpp>
#include <msync/common/hash.hpp>

namespace mxsync {

std::string EventId::to_string() const {
    return chain_id + "/" + std::to_string(block_height) + "/" + std::to_string(tx_index) + "/" +
           std::to_string(log_index);
}

std::string value_to_string(const Value& v) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, std::int64_t>) {
                return std::to_string(x);
            } else if constexpr (std::is_same_v<T, std::string>) {
                return x;
            } else if constexpr (std::is_same_v<T, bool>) {
                return x ? "true" : "false";
            } else {
                return "0x" + to_hex(x);
            }
        },
        v);
}

nlohmann::json value_to_json(const Value& v) {
    return std::visit(
        [](const auto& x) -> nlohmann::json {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Bytes>) {
                return {{"bytes", to_hex(x)}};
            } else {
                return x;
            }
        },
        v);
}

Value value_from_json(const nlohmann::json& j) {
    if (j.is_boolean()) return j.get<bool>();
    if (j.is_number_integer()) return j.get<std::int64_t>();
    if (j.is_number_float()) {
        const double d = j.get<double>();
        const auto i = static_cast<std::int64_t>(d);
        if (static_cast<double>(i) != d) throw Error(Errc::invalid_argument, "non-integer number value");
        return i;
    }
    if (j.is_string()) return j.get<std::string>();
    if (j.is_object() && j.size() == 1 && j.contains("bytes") && j["bytes"].is_string()) {
        return from_hex(j["bytes"].get<std::string>());
    }
    throw Error(Errc::invalid_argument, "unsupported value: " + j.dump());
}

nlohmann::json optional_value_to_json(const std::optional<Value>& v) {
    return v ? value_to_json(*v) : nlohmann::json(nullptr);
}

std::optional<Value> optional_value_from_json(const nlohmann::json& j) {
    if (j.is_null()) return std::nullopt;
    return value_from_json(j);
}

void to_json(nlohmann::json& j, const EventId& id) {
    j = {{"chainId", id.chain_id},
         {"blockHeight", id.block_height},
         {"txIndex", id.tx_index},
         {"logIndex", id.log_index}};
}

void from_json(const nlohmann::json& j, EventId& id) {
    j.at("chainId").get_to(id.chain_id);
    j.at("blockHeight").get_to(id.block_height);
    j.at("txIndex").get_to(id.tx_index);
    j.at("logIndex").get_to(id.log_index);
}

void to_json(nlohmann::json& j, const BlockRange& r) { j = {{"from", r.from}, {"to", r.to}}; }

void from_json(const nlohmann::json& j, BlockRange& r) {
    j.at("from").get_to(r.from);
    j.at("to").get_to(r.to);
}

nlohmann::json payload_to_json(const std::vector<PayloadField>& fields) {
    auto out = nlohmann::json::array();
    for (const auto& f : fields) out.push_back(nlohmann::json::array({f.name, value_to_json(f.value)}));
    return out;
}

std::vector<PayloadField> payload_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw Error(Errc::malformed_payload, "payload must be an array of [name, value] pairs");
    std::vector<PayloadField> out;
    out.reserve(j.size());
    for (const auto& item : j) {
        if (!item.is_array() || item.size() != 2 || !item[0].is_string()) {
            throw Error(Errc::malformed_payload, "payload entry must be [name, value]: " + item.dump());
        }
        out.push_back({item[0].get<std::string>(), value_from_json(item[1])});
    }
    return out;
}

}  // namespace mxsync
