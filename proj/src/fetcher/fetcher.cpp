#include <msync/fetcher/fetcher.hpp>

#include <algorithm>
#include <future>
#include <limits>
#include <mutex>
#include <set>

#include <msync/common/error.hpp>

namespace mxsync::fetcher {

std::vector<Subrange> split_by_sporks(const FetchRequest& request, const chain::SporkTable& table) {
    if (request.from > request.to) throw Error(Errc::invalid_argument, "fromHeight must be <= toHeight");
    if (request.from < 0) throw Error(Errc::invalid_argument, "fromHeight must be non-negative");
    if (table.empty() || table.front().start > request.from) {
        throw Error(Errc::spork_range, "range [" + std::to_string(request.from) + "," + std::to_string(request.to) +
                                           "] is not covered by the spork table");
    }
    std::vector<Subrange> out;
    Height next = request.from;
    for (const auto& e : table) {
        const Height end = e.end.value_or(std::numeric_limits<Height>::max());
        if (end < next) continue;
        if (e.start > next) break;
        const Height to = std::min(end, request.to);
        out.push_back({{next, to}, e.endpoint_id});
        next = to + 1;
        if (to == request.to) return out;
    }
    throw Error(Errc::spork_range, "range [" + std::to_string(next) + "," + std::to_string(request.to) +
                                       "] is not covered by the spork table");
}

DecodedEvent decode(const chain::ChainEvent& raw, const registry::EventRegistration& registration) {
    if (raw.chain_id != registration.chain_id || raw.contract_address != registration.contract_address ||
        raw.event_signature != registration.event_signature) {
        throw Error(Errc::signature_mismatch, "event " + raw.id().to_string() + " (" + raw.contract_address + " " +
                                                  raw.event_signature + ") does not match registration " +
                                                  registration.registration_id);
    }
    std::set<std::string> names;
    for (const auto& f : raw.payload) {
        if (f.name.empty()) throw Error(Errc::malformed_payload, "empty field name in " + raw.id().to_string());
        if (!names.insert(f.name).second) {
            throw Error(Errc::malformed_payload, "duplicate field '" + f.name + "' in " + raw.id().to_string());
        }
    }
    return {raw.id(), registration.registration_id, raw.block_timestamp, raw.payload};
}

SimulatorAdapter::SimulatorAdapter(std::shared_ptr<const chain::Simulator> simulator, std::string chain_id,
                                   std::optional<chain::ChainParams> params)
    : simulator_(std::move(simulator)), chain_id_(std::move(chain_id)) {
    params_ = params ? *params : simulator_->params(chain_id_);
    params_.chain_id = chain_id_;
}

chain::SporkTable SimulatorAdapter::spork_table() const { return simulator_->spork_table(chain_id_); }

std::vector<chain::ChainEvent> SimulatorAdapter::get_events(const std::string& endpoint_id, Height from, Height to,
                                                            const chain::EventFilter* filter) const {
    return simulator_->get_events(endpoint_id, chain_id_, from, to, filter);
}

std::optional<chain::ChainHead> SimulatorAdapter::head() const {
    if (!simulator_->has_blocks(chain_id_)) return std::nullopt;
    return simulator_->latest_height(chain_id_);
}

std::optional<chain::BlockHeader> SimulatorAdapter::header(Height height) const {
    try {
        return simulator_->block_header(chain_id_, height);
    } catch (const Error& e) {
        if (e.code() == Errc::invalid_argument) return std::nullopt;
        throw;
    }
}

Fetcher::Fetcher(Options options) : options_(std::move(options)) {}

void Fetcher::add_adapter(std::shared_ptr<ChainAdapter> adapter) {
    std::unique_lock lock(mutex_);
    const auto id = adapter->chain_id();
    if (adapters_.contains(id)) throw Error(Errc::duplicate, "adapter already registered for chain " + id);
    adapters_.emplace(id, std::move(adapter));
}

const ChainAdapter& Fetcher::adapter(const std::string& chain_id) const {
    std::shared_lock lock(mutex_);
    auto it = adapters_.find(chain_id);
    if (it == adapters_.end()) throw Error(Errc::unknown_chain, "no adapter for chain " + chain_id);
    return *it->second;
}

std::vector<chain::ChainEvent> Fetcher::fetch_unchecked(const FetchRequest& request, std::int64_t* raw_count) const {
    const auto& a = adapter(request.chain_id);
    const auto pieces = split_by_sporks(request, a.spork_table());
    const chain::EventFilter* filter = request.eoi_filter.empty() ? nullptr : &request.eoi_filter;

    const auto fetch_piece = [&](const Subrange& piece) {
        try {
            return a.get_events(piece.endpoint_id, piece.range.from, piece.range.to, filter);
        } catch (const Error& e) {
            throw Error(e.code(), "subrange [" + std::to_string(piece.range.from) + "," +
                                      std::to_string(piece.range.to) + "] via " + piece.endpoint_id + ": " + e.what());
        }
    };

    std::vector<std::vector<chain::ChainEvent>> results(pieces.size());
    if (pieces.size() > 1 && options_.concurrent_subranges) {
        std::vector<std::future<std::vector<chain::ChainEvent>>> futures;
        futures.reserve(pieces.size());
        for (const auto& p : pieces) futures.push_back(std::async(std::launch::async, fetch_piece, std::cref(p)));
        // collect all before rethrowing so no task outlives this frame
        std::exception_ptr first_error;
        for (std::size_t i = 0; i < futures.size(); ++i) {
            try {
                results[i] = futures[i].get();
            } catch (...) {
                if (!first_error) first_error = std::current_exception();
            }
        }
        if (first_error) std::rethrow_exception(first_error);
    } else {
        for (std::size_t i = 0; i < pieces.size(); ++i) results[i] = fetch_piece(pieces[i]);
    }

    std::vector<chain::ChainEvent> merged;
    std::size_t total = 0;
    for (const auto& r : results) total += r.size();
    merged.reserve(total);
    for (auto& r : results) std::move(r.begin(), r.end(), std::back_inserter(merged));
    if (raw_count) *raw_count = static_cast<std::int64_t>(total);

    for (std::size_t i = 1; i < merged.size(); ++i) {
        const auto prev = merged[i - 1].id();
        const auto cur = merged[i].id();
        if (!(prev < cur)) {
            throw Error(Errc::malformed_payload, "endpoint returned events out of order at " + cur.to_string());
        }
    }
    return merged;
}

std::vector<chain::ChainEvent> Fetcher::fetch_raw(const FetchRequest& request) const {
    return fetch_unchecked(request, nullptr);
}

std::vector<DecodedEvent> Fetcher::fetch_range(const FetchRequest& request,
                                               std::span<const registry::EventRegistration> registrations) const {
    std::map<chain::EventKey, const registry::EventRegistration*> by_key;
    for (const auto& r : registrations) by_key[{r.contract_address, r.event_signature}] = &r;

    std::vector<DecodedEvent> out;
    for (const auto& raw : fetch_raw(request)) {
        auto it = by_key.find({raw.contract_address, raw.event_signature});
        if (it == by_key.end()) {
            throw Error(Errc::signature_mismatch, "no registration for " + raw.contract_address + " " +
                                                      raw.event_signature + " at " + raw.id().to_string());
        }
        out.push_back(decode(raw, *it->second));
    }
    return out;
}

ScopedFetch Fetcher::fetch_scope(const std::string& chain_id, BlockRange range,
                                 std::span<const registry::EventRegistration> scope) const {
    std::map<chain::EventKey, const registry::EventRegistration*> by_key;
    for (const auto& r : scope) {
        if (r.chain_id != chain_id) {
            throw Error(Errc::invalid_argument, "registration " + r.registration_id + " is not on chain " + chain_id);
        }
        by_key[{r.contract_address, r.event_signature}] = &r;
    }

    ScopedFetch out;
    auto raw = fetch_unchecked({chain_id, range.from, range.to, {}}, &out.total_events);
    const auto& hooks = options_.hooks;
    for (const auto& e : raw) {
        if (hooks && hooks->drop_fetched && hooks->drop_fetched(e.id())) continue;
        auto it = by_key.find({e.contract_address, e.event_signature});
        if (it == by_key.end()) {
            ++out.unmatched;
            continue;
        }
        out.matched.push_back(decode(e, *it->second));
    }
    return out;
}

std::vector<std::string> Fetcher::chains() const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, _] : adapters_) out.push_back(id);
    return out;
}

bool Fetcher::has_chain(const std::string& chain_id) const {
    std::shared_lock lock(mutex_);
    return adapters_.contains(chain_id);
}

chain::ChainParams Fetcher::chain_params(const std::string& chain_id) const { return adapter(chain_id).params(); }

std::optional<chain::ChainHead> Fetcher::chain_head(const std::string& chain_id) const {
    return adapter(chain_id).head();
}

std::optional<std::string> Fetcher::block_hash(const std::string& chain_id, Height height) const {
    auto h = adapter(chain_id).header(height);
    if (!h) return std::nullopt;
    return h->block_hash;
}

}  // namespace mxsync::fetcher
