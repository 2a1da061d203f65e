#include <msync/store/event_store.hpp>

#include <algorithm>
#include <mutex>

#include <msync/common/error.hpp>
#include <msync/common/hash.hpp>

namespace mxsync::store {

FilterOp filter_op_from_string(const std::string& s) {
    if (s == "=" || s == "==" || s == "eq") return FilterOp::eq;
    if (s == "!=" || s == "≠" || s == "ne") return FilterOp::ne;
    if (s == "<" || s == "lt") return FilterOp::lt;
    if (s == "<=" || s == "≤" || s == "le") return FilterOp::le;
    if (s == ">" || s == "gt") return FilterOp::gt;
    if (s == ">=" || s == "≥" || s == "ge") return FilterOp::ge;
    if (s == "contains") return FilterOp::contains;
    throw Error(Errc::invalid_argument, "unknown filter operator: " + s);
}

std::string to_string(FilterOp op) {
    switch (op) {
        case FilterOp::eq: return "=";
        case FilterOp::ne: return "!=";
        case FilterOp::lt: return "<";
        case FilterOp::le: return "<=";
        case FilterOp::gt: return ">";
        case FilterOp::ge: return ">=";
        case FilterOp::contains: return "contains";
    }
    return "=";
}

Aggregate aggregate_from_string(const std::string& s) {
    if (s == "count") return Aggregate::count;
    if (s == "min") return Aggregate::min;
    if (s == "max") return Aggregate::max;
    if (s == "sum") return Aggregate::sum;
    throw Error(Errc::invalid_argument, "unknown aggregate: " + s);
}

std::string to_string(Aggregate a) {
    switch (a) {
        case Aggregate::count: return "count";
        case Aggregate::min: return "min";
        case Aggregate::max: return "max";
        case Aggregate::sum: return "sum";
    }
    return "count";
}

void from_json(const nlohmann::json& j, QuerySpec& spec) {
    if (!j.is_object()) throw Error(Errc::invalid_argument, "query spec must be an object");
    spec = QuerySpec{};
    try {
        if (j.contains("eventTypes") && !j["eventTypes"].is_null()) {
            spec.event_types = j["eventTypes"].get<std::set<std::string>>();
        }
        for (const auto& f : j.value("filters", nlohmann::json::array())) {
            spec.filters.push_back({f.at("column").get<std::string>(),
                                    filter_op_from_string(f.value("op", std::string("="))),
                                    value_from_json(f.at("value"))});
        }
        for (const auto& s : j.value("sort", nlohmann::json::array())) {
            const auto dir = s.value("dir", std::string("asc"));
            if (dir != "asc" && dir != "desc") throw Error(Errc::invalid_argument, "sort dir must be asc or desc");
            spec.sort.push_back({s.at("column").get<std::string>(), dir == "desc"});
        }
        if (j.contains("page")) {
            const auto& p = j["page"];
            spec.page.offset = p.value("offset", std::int64_t{0});
            spec.page.limit = p.value("limit", spec.page.limit);
            if (p.contains("cursor") && !p["cursor"].is_null()) spec.page.cursor = p["cursor"].get<std::string>();
        }
        if (j.contains("groupBy") && !j["groupBy"].is_null()) {
            const auto& g = j["groupBy"];
            GroupBy group;
            group.column = g.at("column").get<std::string>();
            group.aggregate = aggregate_from_string(g.value("aggregate", std::string("count")));
            if (g.contains("valueColumn") && !g["valueColumn"].is_null()) {
                group.value_column = g["valueColumn"].get<std::string>();
            }
            spec.group_by = std::move(group);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::invalid_argument, std::string("malformed query spec: ") + e.what());
    }
}

void to_json(nlohmann::json& j, const QuerySpec& spec) {
    j = nlohmann::json::object();
    if (spec.event_types) j["eventTypes"] = *spec.event_types;
    auto filters = nlohmann::json::array();
    for (const auto& f : spec.filters) {
        filters.push_back({{"column", f.column}, {"op", to_string(f.op)}, {"value", value_to_json(f.value)}});
    }
    j["filters"] = std::move(filters);
    auto sort = nlohmann::json::array();
    for (const auto& s : spec.sort) sort.push_back({{"column", s.column}, {"dir", s.descending ? "desc" : "asc"}});
    j["sort"] = std::move(sort);
    j["page"] = {{"offset", spec.page.offset}, {"limit", spec.page.limit}};
    if (spec.page.cursor) j["page"]["cursor"] = *spec.page.cursor;
    if (spec.group_by) {
        j["groupBy"] = {{"column", spec.group_by->column}, {"aggregate", to_string(spec.group_by->aggregate)}};
        if (spec.group_by->value_column) j["groupBy"]["valueColumn"] = *spec.group_by->value_column;
    }
}

nlohmann::json query_result_to_json(const QueryResult& result) {
    nlohmann::json j = {{"version", 1}};
    auto records = nlohmann::json::array();
    for (const auto& r : result.records) {
        auto rec = record_to_json(r);
        rec.erase("seq");
        records.push_back(std::move(rec));
    }
    j["records"] = std::move(records);
    if (!result.groups.empty()) {
        auto groups = nlohmann::json::array();
        for (const auto& g : result.groups) {
            groups.push_back({{"group", optional_value_to_json(g.group)}, {"value", optional_value_to_json(g.value)}});
        }
        j["groups"] = std::move(groups);
    }
    j["nextCursor"] = result.next_cursor ? nlohmann::json(*result.next_cursor) : nlohmann::json(nullptr);
    return j;
}

namespace {

using SortValues = std::vector<std::optional<Value>>;

struct Cursor {
    std::uint64_t snapshot{0};
    SortValues keys;
    EventId record_key;
};

std::string encode_cursor(const Cursor& c) {
    auto keys = nlohmann::json::array();
    for (const auto& k : c.keys) keys.push_back(optional_value_to_json(k));
    const nlohmann::json j = {{"v", 1}, {"s", c.snapshot}, {"k", std::move(keys)}, {"r", c.record_key}};
    return to_hex(j.dump());
}

Cursor decode_cursor(const std::string& token, std::size_t sort_keys) {
    try {
        const auto raw = from_hex(token);
        const auto j = nlohmann::json::parse(std::string(raw.begin(), raw.end()));
        if (j.at("v").get<int>() != 1) throw Error(Errc::malformed_cursor, "unsupported cursor version");
        Cursor c;
        c.snapshot = j.at("s").get<std::uint64_t>();
        for (const auto& k : j.at("k")) c.keys.push_back(optional_value_from_json(k));
        c.record_key = j.at("r").get<EventId>();
        if (c.keys.size() != sort_keys) throw Error(Errc::malformed_cursor, "cursor does not match sort spec");
        return c;
    } catch (const Error& e) {
        throw Error(Errc::malformed_cursor, std::string("malformed cursor: ") + e.what());
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::malformed_cursor, std::string("malformed cursor: ") + e.what());
    }
}

bool contains_value(const Value& haystack, const Value& needle) {
    if (const auto* s = std::get_if<std::string>(&haystack)) {
        if (const auto* n = std::get_if<std::string>(&needle)) return s->find(*n) != std::string::npos;
        return false;
    }
    if (const auto* b = std::get_if<Bytes>(&haystack)) {
        if (const auto* n = std::get_if<Bytes>(&needle)) {
            return std::search(b->begin(), b->end(), n->begin(), n->end()) != b->end();
        }
    }
    return false;
}

bool matches(const MappedRecord& r, const Filter& f) {
    const auto v = r.column(f.column);
    if (!v) return f.op == FilterOp::ne;
    if (f.op == FilterOp::contains) return contains_value(*v, f.value);
    if (v->index() != f.value.index()) return f.op == FilterOp::ne;
    switch (f.op) {
        case FilterOp::eq: return *v == f.value;
        case FilterOp::ne: return *v != f.value;
        case FilterOp::lt: return *v < f.value;
        case FilterOp::le: return *v <= f.value;
        case FilterOp::gt: return *v > f.value;
        case FilterOp::ge: return *v >= f.value;
        case FilterOp::contains: break;
    }
    return false;
}

/// Negative, zero or positive like strcmp, following the sort spec and then
/// the record key.
int compare_position(const SortValues& ak, const EventId& aid, const SortValues& bk, const EventId& bid,
                     const std::vector<SortKey>& sort) {
    for (std::size_t i = 0; i < sort.size(); ++i) {
        if (ak[i] == bk[i]) continue;
        const bool less = ak[i] < bk[i];
        return (less != sort[i].descending) ? -1 : 1;
    }
    if (aid == bid) return 0;
    return aid < bid ? -1 : 1;
}

}  // namespace

EventStore::EventStore(const std::filesystem::path& dir, const Clock& clock, Options options)
    : clock_(clock), options_(std::move(options)), log_(dir / "records.log", {options_.fsync}) {
    log_.replay([this](std::string_view frame) {
        MappedRecord r;
        try {
            r = record_from_json(nlohmann::json::parse(frame));
        } catch (const std::exception& e) {
            throw Error(Errc::corrupt_file, "unreadable record in " + log_.path().string() + ": " + e.what());
        }
        next_seq_ = std::max(next_seq_, r.seq + 1);
        index(std::move(r));
    });
}

void EventStore::index(MappedRecord record) {
    by_type_time_.insert({record.event_type, record.block_timestamp, record.record_key});
    auto key = record.record_key;
    primary_.emplace(std::move(key), std::move(record));
}

void EventStore::register_schema(const MappingSchema& schema) {
    validate(schema);
    std::unique_lock lock(mutex_);
    auto [it, inserted] = schemas_.emplace(schema.schema_id, schema);
    if (!inserted) {
        if (!it->second.same_mappings(schema)) {
            throw Error(Errc::duplicate, "schema id " + schema.schema_id + " already defined with different fields");
        }
        it->second.event_types.insert(schema.event_types.begin(), schema.event_types.end());
    }
}

PersistResult EventStore::persist(std::span<const MappedRecord> records) {
    PersistResult result;
    std::vector<std::string> frames;
    std::vector<MappedRecord> fresh;
    const auto now = clock_.now_ms();
    const auto& hooks = options_.hooks;

    std::unique_lock lock(mutex_);
    std::set<EventId> batch;
    for (const auto& r : records) {
        if (primary_.contains(r.record_key) || batch.contains(r.record_key)) {
            ++result.duplicates;
            continue;
        }
        batch.insert(r.record_key);
        ++result.inserted;
        if (hooks && hooks->drop_persisted && hooks->drop_persisted(r.record_key)) continue;
        MappedRecord copy = r;
        copy.stored_at = now;
        copy.seq = next_seq_ + fresh.size();
        frames.push_back(record_to_json(copy).dump());
        fresh.push_back(std::move(copy));
    }
    log_.append(frames);
    next_seq_ += fresh.size();
    for (auto& r : fresh) index(std::move(r));
    return result;
}

bool EventStore::contains(const EventId& key) const {
    std::shared_lock lock(mutex_);
    return primary_.contains(key);
}

std::optional<MappedRecord> EventStore::get(const EventId& key) const {
    std::shared_lock lock(mutex_);
    auto it = primary_.find(key);
    if (it == primary_.end()) return std::nullopt;
    return it->second;
}

std::set<std::string> EventStore::known_columns(const std::optional<std::set<std::string>>& event_types) const {
    std::set<std::string> out = kPseudoColumns;
    for (const auto& [_, schema] : schemas_) {
        bool relevant = !event_types;
        if (event_types) {
            for (const auto& t : *event_types) {
                if (schema.event_types.contains(t)) {
                    relevant = true;
                    break;
                }
            }
        }
        if (!relevant) continue;
        for (const auto& m : schema.field_mappings) out.insert(m.target_column);
    }
    return out;
}

QueryResult EventStore::query(const QuerySpec& spec) const {
    if (spec.page.limit < 1) throw Error(Errc::invalid_argument, "page limit must be >= 1");
    if (spec.page.offset < 0) throw Error(Errc::invalid_argument, "page offset must be >= 0");

    std::shared_lock lock(mutex_);
    const auto columns = known_columns(spec.event_types);
    const auto require = [&](const std::string& c) {
        if (!columns.contains(c)) throw Error(Errc::unknown_column, "unknown column: " + c);
    };
    for (const auto& f : spec.filters) require(f.column);
    for (const auto& s : spec.sort) require(s.column);
    if (spec.group_by) {
        require(spec.group_by->column);
        if (spec.group_by->aggregate != Aggregate::count) {
            if (!spec.group_by->value_column) {
                throw Error(Errc::invalid_argument, "aggregate " + to_string(spec.group_by->aggregate) +
                                                        " needs a valueColumn");
            }
            require(*spec.group_by->value_column);
        }
    }

    std::optional<Cursor> cursor;
    if (spec.page.cursor) cursor = decode_cursor(*spec.page.cursor, spec.sort.size());
    const std::uint64_t snapshot = cursor ? cursor->snapshot : next_seq_ - 1;

    std::vector<const MappedRecord*> candidates;
    const auto accept = [&](const MappedRecord& r) {
        if (r.seq > snapshot) return;
        for (const auto& f : spec.filters) {
            if (!matches(r, f)) return;
        }
        candidates.push_back(&r);
    };

    if (spec.event_types) {
        // narrow the secondary-index scan with any blockTimestamp bounds
        std::int64_t lo = std::numeric_limits<std::int64_t>::min();
        std::int64_t hi = std::numeric_limits<std::int64_t>::max();
        for (const auto& f : spec.filters) {
            if (f.column != "blockTimestamp") continue;
            const auto* v = std::get_if<std::int64_t>(&f.value);
            if (!v) continue;
            switch (f.op) {
                case FilterOp::eq: lo = std::max(lo, *v); hi = std::min(hi, *v); break;
                case FilterOp::ge: lo = std::max(lo, *v); break;
                case FilterOp::gt: lo = std::max(lo, *v == std::numeric_limits<std::int64_t>::max() ? *v : *v + 1); break;
                case FilterOp::le: hi = std::min(hi, *v); break;
                case FilterOp::lt: hi = std::min(hi, *v == std::numeric_limits<std::int64_t>::min() ? *v : *v - 1); break;
                default: break;
            }
        }
        for (const auto& type : *spec.event_types) {
            for (auto it = by_type_time_.lower_bound({type, lo, EventId{}});
                 it != by_type_time_.end() && std::get<0>(*it) == type && std::get<1>(*it) <= hi; ++it) {
                accept(primary_.at(std::get<2>(*it)));
            }
        }
    } else {
        for (const auto& [_, r] : primary_) accept(r);
    }

    QueryResult result;

    if (spec.group_by) {
        const auto& g = *spec.group_by;
        std::map<std::optional<Value>, std::optional<Value>> groups;
        for (const auto* r : candidates) {
            auto& slot = groups[r->column(g.column)];
            if (g.aggregate == Aggregate::count) {
                slot = std::get<std::int64_t>(slot.value_or(std::int64_t{0})) + 1;
                continue;
            }
            const auto v = r->column(*g.value_column);
            if (!v) continue;
            switch (g.aggregate) {
                case Aggregate::min:
                    if (!slot || *v < *slot) slot = v;
                    break;
                case Aggregate::max:
                    if (!slot || *v > *slot) slot = v;
                    break;
                case Aggregate::sum: {
                    const auto* i = std::get_if<std::int64_t>(&*v);
                    if (!i) throw Error(Errc::invalid_argument, "sum over non-integer column " + *g.value_column);
                    slot = (slot ? std::get<std::int64_t>(*slot) : 0) + *i;
                    break;
                }
                case Aggregate::count: break;
            }
        }
        std::int64_t index = 0;
        for (auto& [group, value] : groups) {
            if (index++ < spec.page.offset) continue;
            if (static_cast<std::int64_t>(result.groups.size()) == spec.page.limit) break;
            result.groups.push_back({group, value});
        }
        return result;
    }

    std::vector<std::pair<SortValues, const MappedRecord*>> keyed;
    keyed.reserve(candidates.size());
    for (const auto* r : candidates) {
        SortValues keys;
        keys.reserve(spec.sort.size());
        for (const auto& s : spec.sort) keys.push_back(r->column(s.column));
        keyed.emplace_back(std::move(keys), r);
    }
    std::sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
        return compare_position(a.first, a.second->record_key, b.first, b.second->record_key, spec.sort) < 0;
    });

    std::size_t start = 0;
    if (cursor) {
        start = static_cast<std::size_t>(
            std::partition_point(keyed.begin(), keyed.end(),
                                 [&](const auto& item) {
                                     return compare_position(item.first, item.second->record_key, cursor->keys,
                                                             cursor->record_key, spec.sort) <= 0;
                                 }) -
            keyed.begin());
    } else {
        start = static_cast<std::size_t>(std::min<std::int64_t>(spec.page.offset, static_cast<std::int64_t>(keyed.size())));
    }
    const std::size_t end = std::min(keyed.size(), start + static_cast<std::size_t>(spec.page.limit));
    for (std::size_t i = start; i < end; ++i) result.records.push_back(*keyed[i].second);
    if (end < keyed.size() && end > start) {
        result.next_cursor = encode_cursor({snapshot, keyed[end - 1].first, keyed[end - 1].second->record_key});
    }
    return result;
}

std::size_t EventStore::size() const {
    std::shared_lock lock(mutex_);
    return primary_.size();
}

std::map<std::string, std::int64_t> EventStore::count_by_type() const {
    std::shared_lock lock(mutex_);
    std::map<std::string, std::int64_t> out;
    for (const auto& [_, r] : primary_) ++out[r.event_type];
    return out;
}

std::vector<std::string> EventStore::canonical_dump() const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    out.reserve(primary_.size());
    for (const auto& [_, r] : primary_) out.push_back(canonical_line(r));
    return out;
}

}  // namespace mxsync::store
