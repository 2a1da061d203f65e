#include <msync/chain/generator.hpp>

#include <random>

#include <msync/common/error.hpp>
#include <msync/common/hash.hpp>

namespace mxsync::chain {

namespace {

std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) { return n == 0 ? 0 : rng() % n; }

Value generate_value(std::mt19937_64& rng, const FieldGenerator& f) {
    switch (f.kind) {
        case FieldGenerator::Kind::integer: {
            const auto span = static_cast<std::uint64_t>(f.max - f.min) + 1;
            return f.min + static_cast<std::int64_t>(bounded(rng, span));
        }
        case FieldGenerator::Kind::string:
            return f.prefix + std::to_string(bounded(rng, static_cast<std::uint64_t>(f.cardinality)));
        case FieldGenerator::Kind::boolean:
            return rng() % 2 == 0;
        case FieldGenerator::Kind::bytes: {
            Bytes b(static_cast<std::size_t>(f.length));
            for (auto& x : b) x = static_cast<std::uint8_t>(rng());
            return b;
        }
        case FieldGenerator::Kind::address: {
            const auto n = bounded(rng, static_cast<std::uint64_t>(f.cardinality));
            return "0x" + sha256_hex("address:" + std::to_string(n)).substr(0, 40);
        }
    }
    return std::int64_t{0};
}

FieldGenerator::Kind kind_from_string(const std::string& s) {
    if (s == "int" || s == "integer") return FieldGenerator::Kind::integer;
    if (s == "string") return FieldGenerator::Kind::string;
    if (s == "bool" || s == "boolean") return FieldGenerator::Kind::boolean;
    if (s == "bytes") return FieldGenerator::Kind::bytes;
    if (s == "address") return FieldGenerator::Kind::address;
    throw Error(Errc::invalid_argument, "unknown field generator kind: " + s);
}

std::string kind_to_string(FieldGenerator::Kind k) {
    switch (k) {
        case FieldGenerator::Kind::integer: return "int";
        case FieldGenerator::Kind::string: return "string";
        case FieldGenerator::Kind::boolean: return "bool";
        case FieldGenerator::Kind::bytes: return "bytes";
        case FieldGenerator::Kind::address: return "address";
    }
    return "int";
}

}  // namespace

std::vector<EventSpec> generate_block_events(std::uint64_t seed, const std::string& chain_id, Height height,
                                             const BlockGenerator& generator) {
    if (generator.templates.empty()) return {};
    std::string seed_input;
    append_field(seed_input, std::to_string(seed));
    append_field(seed_input, chain_id);
    append_field(seed_input, std::to_string(height));
    const Digest d = sha256(seed_input);
    std::uint64_t s = 0;
    for (int i = 0; i < 8; ++i) s = s << 8 | d[static_cast<std::size_t>(i)];
    std::mt19937_64 rng(s);

    std::int64_t total_weight = 0;
    for (const auto& t : generator.templates) total_weight += std::max<std::int64_t>(t.weight, 0);
    if (total_weight <= 0) return {};

    const auto span = static_cast<std::uint64_t>(generator.max_events - generator.min_events) + 1;
    const auto count = generator.min_events + static_cast<std::int64_t>(bounded(rng, span));

    std::vector<EventSpec> out;
    std::int64_t tx = 0;
    std::int64_t log = 0;
    for (std::int64_t i = 0; i < count; ++i) {
        auto pick = static_cast<std::int64_t>(bounded(rng, static_cast<std::uint64_t>(total_weight)));
        const EventTemplate* chosen = &generator.templates.front();
        for (const auto& t : generator.templates) {
            if (pick < t.weight) {
                chosen = &t;
                break;
            }
            pick -= std::max<std::int64_t>(t.weight, 0);
        }
        if (i > 0) {
            if (static_cast<std::int64_t>(bounded(rng, 100)) < generator.same_tx_percent) {
                ++log;
            } else {
                ++tx;
                log = 0;
            }
        }
        EventSpec spec;
        spec.contract_address = chosen->contract_address;
        spec.event_signature = chosen->event_signature;
        spec.tx_index = tx;
        spec.log_index = log;
        for (const auto& f : chosen->fields) spec.payload.push_back({f.name, generate_value(rng, f)});
        out.push_back(std::move(spec));
    }
    return out;
}

void from_json(const nlohmann::json& j, FieldGenerator& f) {
    f = FieldGenerator{};
    j.at("name").get_to(f.name);
    f.kind = kind_from_string(j.value("kind", std::string("int")));
    f.min = j.value("min", f.min);
    f.max = j.value("max", f.max);
    f.prefix = j.value("prefix", f.prefix);
    f.cardinality = j.value("cardinality", f.cardinality);
    f.length = j.value("length", f.length);
    if (f.max < f.min) throw Error(Errc::invalid_argument, "field generator " + f.name + ": max < min");
    if (f.cardinality < 1) throw Error(Errc::invalid_argument, "field generator " + f.name + ": cardinality < 1");
}

void from_json(const nlohmann::json& j, EventTemplate& t) {
    t = EventTemplate{};
    j.at("contract").get_to(t.contract_address);
    j.at("signature").get_to(t.event_signature);
    t.fields = j.value("fields", std::vector<FieldGenerator>{});
    t.weight = j.value("weight", t.weight);
}

void from_json(const nlohmann::json& j, BlockGenerator& g) {
    g = BlockGenerator{};
    j.at("templates").get_to(g.templates);
    g.min_events = j.value("minEvents", g.min_events);
    g.max_events = j.value("maxEvents", g.max_events);
    g.same_tx_percent = j.value("sameTxPercent", g.same_tx_percent);
    if (g.min_events < 0 || g.max_events < g.min_events) {
        throw Error(Errc::invalid_argument, "generator needs 0 <= minEvents <= maxEvents");
    }
}

void to_json(nlohmann::json& j, const FieldGenerator& f) {
    j = {{"name", f.name},     {"kind", kind_to_string(f.kind)}, {"min", f.min},       {"max", f.max},
         {"prefix", f.prefix}, {"cardinality", f.cardinality},   {"length", f.length}};
}

void to_json(nlohmann::json& j, const EventTemplate& t) {
    j = {{"contract", t.contract_address}, {"signature", t.event_signature}, {"fields", t.fields}, {"weight", t.weight}};
}

void to_json(nlohmann::json& j, const BlockGenerator& g) {
    j = {{"templates", g.templates},
         {"minEvents", g.min_events},
         {"maxEvents", g.max_events},
         {"sameTxPercent", g.same_tx_percent}};
}

void from_json(const nlohmann::json& j, EventSpec& e) {
    if (!j.is_object()) throw Error(Errc::invalid_argument, "event spec must be an object");
    e.contract_address = j.at("contract").get<std::string>();
    e.event_signature = j.at("signature").get<std::string>();
    e.payload.clear();
    if (j.contains("payload")) {
        const auto& p = j["payload"];
        if (p.is_object()) {
            for (const auto& [name, v] : p.items()) e.payload.push_back({name, value_from_json(v)});
        } else {
            e.payload = payload_from_json(p);
        }
    }
    if (j.contains("txIndex")) e.tx_index = j["txIndex"].get<std::int64_t>();
    if (j.contains("logIndex")) e.log_index = j["logIndex"].get<std::int64_t>();
}

void to_json(nlohmann::json& j, const ChainEvent& e) {
    j = {{"chainId", e.chain_id},
         {"blockHeight", e.block_height},
         {"blockHash", e.block_hash},
         {"blockTimestamp", e.block_timestamp},
         {"txIndex", e.tx_index},
         {"logIndex", e.log_index},
         {"contract", e.contract_address},
         {"signature", e.event_signature},
         {"payload", payload_to_json(e.payload)}};
}

}  // namespace mxsync::chain
