#include <msync/chain/simulator.hpp>

#include <algorithm>
#include <mutex>
#include <limits>
#include <random>

#include <msync/common/error.hpp>
#include <msync/common/hash.hpp>

namespace mxsync::chain {

void validate(const ChainParams& params) {
    if (params.chain_id.empty()) throw Error(Errc::invalid_argument, "chainId must not be empty");
    if (params.max_batch < 1) throw Error(Errc::invalid_argument, "maxBatch must be >= 1 for " + params.chain_id);
    if (params.confirmation_depth < 0) {
        throw Error(Errc::invalid_argument, "confirmationDepth must be >= 0 for " + params.chain_id);
    }
    if (params.block_interval_s < 0) {
        throw Error(Errc::invalid_argument, "blockInterval must be >= 0 for " + params.chain_id);
    }
}

void validate(const SporkTable& table) {
    if (table.empty()) throw Error(Errc::invalid_argument, "spork table must not be empty");
    Height expected = 0;
    std::set<std::string> endpoints;
    for (std::size_t i = 0; i < table.size(); ++i) {
        const auto& e = table[i];
        if (e.endpoint_id.empty()) throw Error(Errc::invalid_argument, "spork endpoint id must not be empty");
        if (!endpoints.insert(e.endpoint_id).second) {
            throw Error(Errc::invalid_argument, "duplicate spork endpoint " + e.endpoint_id);
        }
        if (e.start != expected) {
            throw Error(Errc::invalid_argument, "spork " + e.endpoint_id + " starts at " + std::to_string(e.start) +
                                                    ", expected " + std::to_string(expected));
        }
        const bool last = i + 1 == table.size();
        if (last) {
            if (e.end) throw Error(Errc::invalid_argument, "last spork must be open-ended");
        } else {
            if (!e.end || *e.end < e.start) {
                throw Error(Errc::invalid_argument, "spork " + e.endpoint_id + " needs an end >= its start");
            }
            expected = *e.end + 1;
        }
    }
}

struct Simulator::Block {
    BlockHeader header;
    std::vector<ChainEvent> events;
};

struct Simulator::ChainState {
    ChainParams params;
    SporkTable sporks;
    std::vector<Block> blocks;
    std::uint64_t reorgs{0};
    /// Branch displaced by the last reorg and the height it started at.
    std::vector<Block> displaced;
    std::size_t replacement_length{0};
    mutable std::shared_mutex mutex;
};

Simulator::Simulator(std::uint64_t seed) : seed_(seed) {}
Simulator::~Simulator() = default;

void Simulator::add_chain(const ChainParams& params, SporkTable sporks) {
    validate(params);
    if (params.sporked) {
        validate(sporks);
    } else {
        if (!sporks.empty()) throw Error(Errc::invalid_argument, "spork table given for non-sporked chain");
        sporks = {{0, std::nullopt, params.chain_id + "-archive"}};
    }

    std::unique_lock lock(chains_mutex_);
    if (chains_.contains(params.chain_id)) throw Error(Errc::duplicate, "chain already defined: " + params.chain_id);
    for (const auto& e : sporks) {
        if (endpoint_chain_.contains(e.endpoint_id)) {
            throw Error(Errc::duplicate, "endpoint already bound: " + e.endpoint_id);
        }
    }
    auto state = std::make_unique<ChainState>();
    state->params = params;
    state->sporks = std::move(sporks);
    for (const auto& e : state->sporks) endpoint_chain_[e.endpoint_id] = params.chain_id;
    chains_.emplace(params.chain_id, std::move(state));
}

Simulator::ChainState& Simulator::chain(const std::string& chain_id) const {
    std::shared_lock lock(chains_mutex_);
    auto it = chains_.find(chain_id);
    if (it == chains_.end()) throw Error(Errc::unknown_chain, "unknown chain: " + chain_id);
    return *it->second;
}

Simulator::Block Simulator::build_block(const ChainState& c, Height height, const std::string& parent_hash,
                                        std::uint64_t branch, std::vector<EventSpec> specs) const {
    Block block;
    block.header.height = height;
    block.header.parent_hash = parent_hash;
    block.header.timestamp = c.params.genesis_time + height * c.params.block_interval_s;

    std::int64_t next_tx = 0;
    for (auto& s : specs) {
        ChainEvent e;
        e.chain_id = c.params.chain_id;
        e.block_height = height;
        e.block_timestamp = block.header.timestamp;
        e.tx_index = s.tx_index.value_or(next_tx);
        e.log_index = s.log_index.value_or(0);
        next_tx = std::max(next_tx, e.tx_index + 1);
        e.contract_address = std::move(s.contract_address);
        e.event_signature = std::move(s.event_signature);
        e.payload = std::move(s.payload);
        block.events.push_back(std::move(e));
    }
    std::sort(block.events.begin(), block.events.end(), [](const ChainEvent& a, const ChainEvent& b) {
        return std::tie(a.tx_index, a.log_index) < std::tie(b.tx_index, b.log_index);
    });
    for (std::size_t i = 1; i < block.events.size(); ++i) {
        const auto& a = block.events[i - 1];
        const auto& b = block.events[i];
        if (a.tx_index == b.tx_index && a.log_index == b.log_index) {
            throw Error(Errc::invalid_argument, "duplicate (txIndex, logIndex) in block " + std::to_string(height));
        }
    }

    std::string digest_input;
    append_field(digest_input, std::to_string(seed_));
    append_field(digest_input, c.params.chain_id);
    append_field(digest_input, std::to_string(branch));
    append_field(digest_input, std::to_string(height));
    append_field(digest_input, parent_hash);
    append_field(digest_input, std::to_string(block.header.timestamp));
    for (const auto& e : block.events) {
        append_field(digest_input, std::to_string(e.tx_index));
        append_field(digest_input, std::to_string(e.log_index));
        append_field(digest_input, e.contract_address);
        append_field(digest_input, e.event_signature);
        append_field(digest_input, payload_to_json(e.payload).dump());
    }
    block.header.block_hash = sha256_hex(digest_input);
    for (auto& e : block.events) e.block_hash = block.header.block_hash;
    return block;
}

BlockHeader Simulator::mint_block(const std::string& chain_id, std::vector<EventSpec> events) {
    auto& c = chain(chain_id);
    std::unique_lock lock(c.mutex);
    const Height height = static_cast<Height>(c.blocks.size());
    const std::string parent = c.blocks.empty() ? kGenesisParentHash : c.blocks.back().header.block_hash;
    c.blocks.push_back(build_block(c, height, parent, 0, std::move(events)));
    c.displaced.clear();
    return c.blocks.back().header;
}

ChainHead Simulator::reorg(const std::string& chain_id, Height depth, Height extra) {
    auto& c = chain(chain_id);
    std::unique_lock lock(c.mutex);
    if (c.params.sporked) throw Error(Errc::invalid_argument, "reorg is not supported on sporked chain " + chain_id);
    if (depth <= 0) throw Error(Errc::invalid_argument, "reorg depth must be positive");
    if (extra < 0) throw Error(Errc::invalid_argument, "reorg extra blocks must be non-negative");
    const auto length = static_cast<Height>(c.blocks.size());
    if (depth > length) {
        throw Error(Errc::invalid_argument, "reorg depth " + std::to_string(depth) + " exceeds chain length " +
                                                std::to_string(length));
    }

    ++c.reorgs;
    std::string seed_input;
    append_field(seed_input, std::to_string(seed_));
    append_field(seed_input, chain_id);
    append_field(seed_input, "reorg");
    append_field(seed_input, std::to_string(c.reorgs));
    const Digest d = sha256(seed_input);
    std::uint64_t perturbed = 0;
    for (int i = 0; i < 8; ++i) perturbed = perturbed << 8 | d[static_cast<std::size_t>(i)];
    std::mt19937_64 rng(perturbed);

    const Height first = length - depth;
    std::vector<Block> old(std::make_move_iterator(c.blocks.begin() + first), std::make_move_iterator(c.blocks.end()));
    c.blocks.resize(static_cast<std::size_t>(first));

    std::vector<ChainEvent> pool;
    for (const auto& b : old) pool.insert(pool.end(), b.events.begin(), b.events.end());

    const auto to_spec = [](const ChainEvent& e) {
        return EventSpec{e.contract_address, e.event_signature, e.payload, std::nullopt, std::nullopt};
    };

    for (Height i = 0; i < depth + extra; ++i) {
        std::vector<EventSpec> specs;
        if (i < depth) {
            // keep a random subset of the displaced block's events
            for (const auto& e : old[static_cast<std::size_t>(i)].events) {
                if (rng() % 2 == 0) specs.push_back(to_spec(e));
            }
        }
        // occasionally a fresh variant of some displaced event
        if (!pool.empty() && rng() % 3 == 0) {
            auto spec = to_spec(pool[rng() % pool.size()]);
            for (auto& f : spec.payload) {
                if (auto* v = std::get_if<std::int64_t>(&f.value)) {
                    *v += 1 + static_cast<std::int64_t>(rng() % 1000);
                    break;
                }
            }
            specs.push_back(std::move(spec));
        }
        const Height height = first + i;
        const std::string parent = c.blocks.empty() ? kGenesisParentHash : c.blocks.back().header.block_hash;
        c.blocks.push_back(build_block(c, height, parent, c.reorgs, std::move(specs)));
    }

    c.displaced = std::move(old);
    c.replacement_length = static_cast<std::size_t>(depth + extra);
    return {chain_id, static_cast<Height>(c.blocks.size()) - 1, c.blocks.back().header.block_hash};
}

ChainHead Simulator::revert_reorg(const std::string& chain_id) {
    auto& c = chain(chain_id);
    std::unique_lock lock(c.mutex);
    if (c.displaced.empty()) throw Error(Errc::invalid_argument, "no reorg to revert on " + chain_id);
    c.blocks.resize(c.blocks.size() - c.replacement_length);
    for (auto& b : c.displaced) c.blocks.push_back(std::move(b));
    c.displaced.clear();
    c.replacement_length = 0;
    return {chain_id, static_cast<Height>(c.blocks.size()) - 1, c.blocks.back().header.block_hash};
}

std::vector<ChainEvent> Simulator::get_events(const std::string& endpoint_id, const std::string& chain_id,
                                              Height from, Height to, const EventFilter* filter) const {
    if (from > to) throw Error(Errc::invalid_argument, "fromHeight must be <= toHeight");
    if (from < 0) throw Error(Errc::invalid_argument, "fromHeight must be non-negative");
    {
        std::shared_lock lock(chains_mutex_);
        auto it = endpoint_chain_.find(endpoint_id);
        if (it == endpoint_chain_.end() || it->second != chain_id) {
            throw Error(Errc::unknown_endpoint, "unknown endpoint " + endpoint_id + " for chain " + chain_id);
        }
    }
    auto& c = chain(chain_id);
    std::shared_lock lock(c.mutex);

    const auto spork = std::find_if(c.sporks.begin(), c.sporks.end(),
                                    [&](const SporkEntry& e) { return e.endpoint_id == endpoint_id; });
    const Height spork_end = spork->end.value_or(std::numeric_limits<Height>::max());
    if (from < spork->start || to > spork_end) {
        const Height bad_from = from < spork->start ? from : std::max(from, spork_end + 1);
        const Height bad_to = from < spork->start ? std::min(to, spork->start - 1) : to;
        throw Error(Errc::spork_range, "range [" + std::to_string(bad_from) + "," + std::to_string(bad_to) +
                                           "] is outside spork " + endpoint_id + " [" + std::to_string(spork->start) +
                                           "," + (spork->end ? std::to_string(*spork->end) : "open") + "]");
    }

    std::vector<ChainEvent> out;
    const Height last = std::min(to, static_cast<Height>(c.blocks.size()) - 1);
    for (Height h = from; h <= last; ++h) {
        for (const auto& e : c.blocks[static_cast<std::size_t>(h)].events) {
            if (filter && !filter->contains({e.contract_address, e.event_signature})) continue;
            out.push_back(e);
        }
    }
    return out;
}

ChainHead Simulator::latest_height(const std::string& chain_id) const {
    auto& c = chain(chain_id);
    std::shared_lock lock(c.mutex);
    if (c.blocks.empty()) throw Error(Errc::empty_chain, "chain has no blocks: " + chain_id);
    return {chain_id, static_cast<Height>(c.blocks.size()) - 1, c.blocks.back().header.block_hash};
}

bool Simulator::has_blocks(const std::string& chain_id) const {
    auto& c = chain(chain_id);
    std::shared_lock lock(c.mutex);
    return !c.blocks.empty();
}

BlockHeader Simulator::block_header(const std::string& chain_id, Height height) const {
    auto& c = chain(chain_id);
    std::shared_lock lock(c.mutex);
    if (height < 0 || height >= static_cast<Height>(c.blocks.size())) {
        throw Error(Errc::invalid_argument, "no block at height " + std::to_string(height) + " on " + chain_id);
    }
    return c.blocks[static_cast<std::size_t>(height)].header;
}

bool Simulator::has_chain(const std::string& chain_id) const {
    std::shared_lock lock(chains_mutex_);
    return chains_.contains(chain_id);
}

std::vector<std::string> Simulator::chain_ids() const {
    std::shared_lock lock(chains_mutex_);
    std::vector<std::string> out;
    for (const auto& [id, _] : chains_) out.push_back(id);
    return out;
}

ChainParams Simulator::params(const std::string& chain_id) const { return chain(chain_id).params; }

SporkTable Simulator::spork_table(const std::string& chain_id) const { return chain(chain_id).sporks; }

std::vector<ChainEvent> Simulator::canonical_events(const std::string& chain_id, Height from, Height to) const {
    auto& c = chain(chain_id);
    std::shared_lock lock(c.mutex);
    std::vector<ChainEvent> out;
    const Height last = std::min(to, static_cast<Height>(c.blocks.size()) - 1);
    for (Height h = std::max<Height>(from, 0); h <= last; ++h) {
        const auto& events = c.blocks[static_cast<std::size_t>(h)].events;
        out.insert(out.end(), events.begin(), events.end());
    }
    return out;
}

}  // namespace mxsync::chain
