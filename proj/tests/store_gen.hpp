#pragma once

#include <algorithm>
#include <functional>
#include <optional>
#include <set>
#include <random>
#include <string>
#include <vector>

#include <msync/store/event_store.hpp>

namespace testing {

using namespace mxsync;

inline const std::vector<std::string> kStoreTypes = {"typeA", "typeB"};

inline store::MappingSchema token_schema(const std::string& id, std::set<std::string> types) {
    store::MappingSchema s;
    s.schema_id = id;
    s.event_types = std::move(types);
    s.field_mappings = {{"tokenId", "tokenId", store::ValueType::integer, {}, false},
                        {"owner", "owner", store::ValueType::string, {}, false},
                        {"price", "price", store::ValueType::integer, {}, true}};
    return s;
}

/// Record with a small value domain so filters and sort keys collide often.
inline store::MappedRecord random_record(std::mt19937_64& rng, Height height, std::int64_t log) {
    store::MappedRecord r;
    r.record_key = {rng() % 2 ? "eth" : "flow", height, 0, log};
    r.event_type = kStoreTypes[rng() % kStoreTypes.size()];
    r.schema_id = "tok";
    r.block_timestamp = 1000 + height * 10;
    r.columns["tokenId"] = static_cast<std::int64_t>(rng() % 12);
    r.columns["owner"] = "0x" + std::string(1, static_cast<char>('a' + rng() % 5));
    if (rng() % 4) r.columns["price"] = static_cast<std::int64_t>(rng() % 50);
    return r;
}

inline store::QuerySpec random_query(std::mt19937_64& rng) {
    static const std::vector<std::string> cols = {"tokenId", "owner", "price", "blockTimestamp", "chainId",
                                                  "blockHeight"};
    store::QuerySpec q;
    if (rng() % 2) q.event_types = std::set<std::string>{kStoreTypes[rng() % kStoreTypes.size()]};
    const int nf = static_cast<int>(rng() % 3);
    for (int i = 0; i < nf; ++i) {
        const auto& c = cols[rng() % cols.size()];
        const auto op = static_cast<store::FilterOp>(rng() % 6);
        Value v;
        if (c == "owner") v = "0x" + std::string(1, static_cast<char>('a' + rng() % 5));
        else if (c == "chainId") v = std::string(rng() % 2 ? "eth" : "flow");
        else if (c == "blockTimestamp") v = static_cast<std::int64_t>(1000 + (rng() % 200) * 10);
        else if (c == "blockHeight") v = static_cast<std::int64_t>(rng() % 200);
        else v = static_cast<std::int64_t>(rng() % 50);
        q.filters.push_back({c, op, v});
    }
    const int ns = static_cast<int>(rng() % 3);
    for (int i = 0; i < ns; ++i) q.sort.push_back({cols[rng() % cols.size()], rng() % 2 == 0});
    q.page.limit = 1 + static_cast<std::int64_t>(rng() % 17);
    return q;
}

/// Brute-force evaluation: scan, filter, sort, no paging.
inline std::vector<EventId> oracle_query(const std::vector<store::MappedRecord>& all, const store::QuerySpec& q) {
    auto column = [](const store::MappedRecord& r, const std::string& name) -> std::optional<Value> {
        if (name == "chainId") return r.record_key.chain_id;
        if (name == "blockHeight") return r.record_key.block_height;
        if (name == "blockTimestamp") return r.block_timestamp;
        auto it = r.columns.find(name);
        if (it == r.columns.end()) return std::nullopt;
        return it->second;
    };
    std::vector<const store::MappedRecord*> hits;
    for (const auto& r : all) {
        if (q.event_types && !q.event_types->contains(r.event_type)) continue;
        bool ok = true;
        for (const auto& f : q.filters) {
            const auto v = column(r, f.column);
            const bool comparable = v && v->index() == f.value.index();
            bool m = false;
            switch (f.op) {
                case store::FilterOp::eq: m = comparable && *v == f.value; break;
                case store::FilterOp::ne: m = !comparable || *v != f.value; break;
                case store::FilterOp::lt: m = comparable && *v < f.value; break;
                case store::FilterOp::le: m = comparable && *v <= f.value; break;
                case store::FilterOp::gt: m = comparable && *v > f.value; break;
                case store::FilterOp::ge: m = comparable && *v >= f.value; break;
                case store::FilterOp::contains: {
                    const auto* s = v ? std::get_if<std::string>(&*v) : nullptr;
                    const auto* n = std::get_if<std::string>(&f.value);
                    m = s && n && s->find(*n) != std::string::npos;
                    break;
                }
            }
            ok = ok && m;
        }
        if (ok) hits.push_back(&r);
    }
    std::stable_sort(hits.begin(), hits.end(), [&](const auto* a, const auto* b) {
        for (const auto& s : q.sort) {
            const auto x = column(*a, s.column);
            const auto y = column(*b, s.column);
            if (x == y) continue;
            return s.descending ? y < x : x < y;
        }
        return a->record_key < b->record_key;
    });
    std::vector<EventId> out;
    for (const auto* r : hits) out.push_back(r->record_key);
    return out;
}

/// Follows cursors to the end.
inline std::vector<std::vector<EventId>> paginate(const store::EventStore& store, store::QuerySpec q,
                                                  const std::function<void()>& between = {}) {
    std::vector<std::vector<EventId>> pages;
    for (int guard = 0; guard < 100000; ++guard) {
        const auto res = store.query(q);
        std::vector<EventId> page;
        for (const auto& r : res.records) page.push_back(r.record_key);
        pages.push_back(std::move(page));
        if (!res.next_cursor) break;
        q.page.cursor = res.next_cursor;
        if (between) between();
    }
    return pages;
}

}  // namespace testing
