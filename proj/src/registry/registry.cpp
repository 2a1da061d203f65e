#include <msync/registry/registry.hpp>

#include <algorithm>
#include <mutex>

#include <msync/common/error.hpp>
#include <msync/common/hash.hpp>

namespace mxsync::registry {

std::string registration_id(const std::string& chain_id, const std::string& contract_address,
                            const std::string& event_signature) {
    std::string canonical;
    append_field(canonical, chain_id);
    append_field(canonical, contract_address);
    append_field(canonical, event_signature);
    return sha256_hex(canonical);
}

void to_json(nlohmann::json& j, const EventRegistration& r) {
    j = {{"registrationId", r.registration_id},
         {"chainId", r.chain_id},
         {"contractAddress", r.contract_address},
         {"eventSignature", r.event_signature},
         {"initBlockHeight", r.init_block_height},
         {"syncedStartBlockHeight", r.synced_start_block_height},
         {"syncedLatestBlockHeight", r.synced_latest_block_height},
         {"latestBlockHash", r.latest_block_hash},
         {"mappingSchema", r.mapping_schema},
         {"createdAt", r.created_at},
         {"partitionSize", r.partition_size},
         {"halted", r.halted},
         {"haltReason", r.halt_reason}};
}

void from_json(const nlohmann::json& j, EventRegistration& r) {
    j.at("registrationId").get_to(r.registration_id);
    j.at("chainId").get_to(r.chain_id);
    j.at("contractAddress").get_to(r.contract_address);
    j.at("eventSignature").get_to(r.event_signature);
    j.at("initBlockHeight").get_to(r.init_block_height);
    j.at("syncedStartBlockHeight").get_to(r.synced_start_block_height);
    j.at("syncedLatestBlockHeight").get_to(r.synced_latest_block_height);
    r.latest_block_hash = j.value("latestBlockHash", std::string());
    j.at("mappingSchema").get_to(r.mapping_schema);
    r.created_at = j.value("createdAt", std::int64_t{0});
    r.partition_size = j.value("partitionSize", Height{1});
    r.halted = j.value("halted", false);
    r.halt_reason = j.value("haltReason", std::string());
}

void to_json(nlohmann::json& j, const BackfillStatus& s) {
    j = {{"registrationId", s.registration_id},
         {"initBlockHeight", s.init_block_height},
         {"syncedStartBlockHeight", s.synced_start_block_height},
         {"partitionSize", s.partition_size},
         {"complete", s.complete},
         {"done", s.done},
         {"missing", s.missing}};
}

Registry::Registry(std::filesystem::path journal, const chain::ChainCatalog& catalog, const Clock& clock,
                   Options options)
    : catalog_(catalog), clock_(clock), options_(options), journal_(std::move(journal), {options.fsync}) {
    journal_.replay([this](std::string_view frame) {
        nlohmann::json op;
        try {
            op = nlohmann::json::parse(frame);
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::corrupt_file, "unreadable entry in " + journal_.path().string() + ": " + e.what());
        }
        apply(op);
    });
}

void Registry::apply(const nlohmann::json& op) {
    const auto kind = op.at("op").get<std::string>();
    if (kind == "register") {
        auto reg = op.at("registration").get<EventRegistration>();
        const auto id = reg.registration_id;
        entries_[id] = Entry{std::move(reg), {}, {}};
        return;
    }
    auto& e = entry(op.at("id").get<std::string>());
    if (kind == "advance") {
        const Height latest = op.at("latest").get<Height>();
        if (latest > e.registration.synced_latest_block_height) {
            e.registration.synced_latest_block_height = latest;
            e.registration.latest_block_hash = op.at("hash").get<std::string>();
            e.history.push_back({{op.at("from").get<Height>(), latest}, op.at("job").get<std::string>(), false});
        }
    } else if (kind == "partition") {
        const BlockRange r{op.at("from").get<Height>(), op.at("to").get<Height>()};
        if (std::find(e.done_partitions.begin(), e.done_partitions.end(), r) == e.done_partitions.end()) {
            e.done_partitions.push_back(r);
            e.history.push_back({r, op.at("job").get<std::string>(), true});
        }
    } else if (kind == "complete") {
        e.registration.synced_start_block_height = e.registration.init_block_height;
    } else if (kind == "halt") {
        e.registration.halted = true;
        e.registration.halt_reason = op.at("reason").get<std::string>();
    } else {
        throw Error(Errc::corrupt_file, "unknown journal op '" + kind + "' in " + journal_.path().string());
    }
}

Registry::Entry& Registry::entry(const std::string& registration_id) {
    auto it = entries_.find(registration_id);
    if (it == entries_.end()) throw Error(Errc::unknown_registration, "unknown registration: " + registration_id);
    return it->second;
}

const Registry::Entry& Registry::entry(const std::string& registration_id) const {
    auto it = entries_.find(registration_id);
    if (it == entries_.end()) throw Error(Errc::unknown_registration, "unknown registration: " + registration_id);
    return it->second;
}

EventRegistration Registry::register_event(const std::string& chain_id, const std::string& contract_address,
                                           const std::string& event_signature, Height init_block_height,
                                           store::MappingSchema schema) {
    if (!catalog_.has_chain(chain_id)) throw Error(Errc::unknown_chain, "unknown chain: " + chain_id);
    if (contract_address.empty() || event_signature.empty()) {
        throw Error(Errc::invalid_argument, "contractAddress and eventSignature must not be empty");
    }
    if (init_block_height < 0) throw Error(Errc::invalid_argument, "initBlockHeight must be non-negative");
    store::validate(schema);

    const auto params = catalog_.chain_params(chain_id);
    const auto head = catalog_.chain_head(chain_id);
    const Height head_height = head ? head->latest_height : -1;
    if (init_block_height > head_height) {
        throw Error(Errc::invalid_argument, "initBlockHeight " + std::to_string(init_block_height) +
                                                " is beyond chain head " + std::to_string(head_height));
    }

    EventRegistration reg;
    reg.registration_id = registration_id(chain_id, contract_address, event_signature);
    reg.chain_id = chain_id;
    reg.contract_address = contract_address;
    reg.event_signature = event_signature;
    reg.init_block_height = init_block_height;
    const Height safe_head = head_height - params.confirmation_depth;
    reg.synced_start_block_height = std::max(init_block_height, safe_head);
    reg.synced_latest_block_height = reg.synced_start_block_height - 1;
    if (reg.synced_latest_block_height >= 0) {
        reg.latest_block_hash = catalog_.block_hash(chain_id, reg.synced_latest_block_height).value_or("");
    }
    reg.created_at = clock_.now_ms();
    reg.partition_size = options_.partition_size > 0 ? options_.partition_size : params.max_batch;
    schema.event_types.insert(reg.registration_id);
    reg.mapping_schema = std::move(schema);

    std::unique_lock lock(mutex_);
    if (entries_.contains(reg.registration_id)) {
        throw Error(Errc::duplicate, "event already registered: " + chain_id + " " + contract_address + " " +
                                         event_signature);
    }
    for (const auto& [_, e] : entries_) {
        const auto& other = e.registration.mapping_schema;
        if (other.schema_id == reg.mapping_schema.schema_id && !other.same_mappings(reg.mapping_schema)) {
            throw Error(Errc::duplicate, "schema id " + other.schema_id + " already defined with different fields");
        }
    }
    journal_.append(nlohmann::json{{"op", "register"}, {"registration", reg}}.dump());
    entries_[reg.registration_id] = Entry{reg, {}, {}};
    return reg;
}

AdvanceResult Registry::advance_latest(const CursorUpdate& update) {
    std::unique_lock lock(mutex_);
    auto& e = entry(update.registration_id);
    if (update.new_latest <= e.registration.synced_latest_block_height) return {e.registration, false};
    const nlohmann::json op = {{"op", "advance"},         {"id", update.registration_id},
                               {"from", update.from_height}, {"latest", update.new_latest},
                               {"hash", update.block_hash},  {"job", update.job_id}};
    journal_.append(op.dump());
    apply(op);
    return {e.registration, true};
}

void Registry::mark_partition_done(const std::string& registration_id, BlockRange range, const std::string& job_id) {
    std::unique_lock lock(mutex_);
    auto& e = entry(registration_id);
    const auto& reg = e.registration;
    // replays of a finished partition stay no-ops even after the cursor collapsed
    if (std::find(e.done_partitions.begin(), e.done_partitions.end(), range) != e.done_partitions.end()) return;
    if (range.from > range.to || range.from < reg.init_block_height || range.to >= reg.synced_start_block_height) {
        throw Error(Errc::invalid_argument, "partition outside the backfill range of " + registration_id);
    }
    const nlohmann::json op = {
        {"op", "partition"}, {"id", registration_id}, {"from", range.from}, {"to", range.to}, {"job", job_id}};
    journal_.append(op.dump());
    apply(op);
}

BackfillStatus Registry::status_of(const Entry& e) {
    const auto& reg = e.registration;
    BackfillStatus s;
    s.registration_id = reg.registration_id;
    s.init_block_height = reg.init_block_height;
    s.synced_start_block_height = reg.synced_start_block_height;
    s.partition_size = reg.partition_size;

    auto ranges = e.done_partitions;
    std::sort(ranges.begin(), ranges.end());
    for (const auto& r : ranges) {
        if (!s.done.empty() && r.from <= s.done.back().to + 1) {
            s.done.back().to = std::max(s.done.back().to, r.to);
        } else {
            s.done.push_back(r);
        }
    }
    Height next = reg.init_block_height;
    const Height last = reg.synced_start_block_height - 1;
    for (const auto& r : s.done) {
        if (r.from > next) s.missing.push_back({next, std::min(r.from - 1, last)});
        next = std::max(next, r.to + 1);
    }
    if (next <= last) s.missing.push_back({next, last});
    s.complete = reg.synced_start_block_height == reg.init_block_height;
    return s;
}

EventRegistration Registry::complete_backfill(const std::string& registration_id) {
    std::unique_lock lock(mutex_);
    auto& e = entry(registration_id);
    if (e.registration.synced_start_block_height == e.registration.init_block_height) return e.registration;
    const auto status = status_of(e);
    if (!status.missing.empty()) {
        const auto& gap = status.missing.front();
        throw Error(Errc::incomplete_backfill, "backfill of " + registration_id + " incomplete: [" +
                                                   std::to_string(gap.from) + "," + std::to_string(gap.to) +
                                                   "] not synced");
    }
    const nlohmann::json op = {{"op", "complete"}, {"id", registration_id}};
    journal_.append(op.dump());
    apply(op);
    return e.registration;
}

EventRegistration Registry::halt(const std::string& registration_id, const std::string& reason) {
    std::unique_lock lock(mutex_);
    auto& e = entry(registration_id);
    if (e.registration.halted) return e.registration;
    const nlohmann::json op = {{"op", "halt"}, {"id", registration_id}, {"reason", reason}};
    journal_.append(op.dump());
    apply(op);
    return e.registration;
}

std::vector<EventRegistration> Registry::list_registrations(const std::optional<std::string>& chain_id) const {
    std::shared_lock lock(mutex_);
    std::vector<EventRegistration> out;
    for (const auto& [_, e] : entries_) {
        if (chain_id && e.registration.chain_id != *chain_id) continue;
        out.push_back(e.registration);
    }
    return out;
}

std::optional<EventRegistration> Registry::find(const std::string& registration_id) const {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(registration_id);
    if (it == entries_.end()) return std::nullopt;
    return it->second.registration;
}

EventRegistration Registry::get(const std::string& registration_id) const {
    std::shared_lock lock(mutex_);
    return entry(registration_id).registration;
}

bool Registry::contains(const std::string& registration_id) const {
    std::shared_lock lock(mutex_);
    return entries_.contains(registration_id);
}

BackfillStatus Registry::backfill_status(const std::string& registration_id) const {
    std::shared_lock lock(mutex_);
    return status_of(entry(registration_id));
}

std::vector<SyncedRange> Registry::sync_history(const std::string& registration_id) const {
    std::shared_lock lock(mutex_);
    return entry(registration_id).history;
}

}  // namespace mxsync::registry
