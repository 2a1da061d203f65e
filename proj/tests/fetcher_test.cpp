#include <doctest.h>

#include <algorithm>
#include <random>

#include <msync/chain/generator.hpp>
#include <msync/common/error.hpp>
#include <msync/fetcher/fetcher.hpp>
#include <msync/registry/registry.hpp>

#include "support.hpp"

using namespace mxsync;
using namespace mxsync::fetcher;
using chain::SporkTable;

namespace {

const SporkTable kThree = {{0, 99, "e0"}, {100, 199, "e1"}, {200, std::nullopt, "e2"}};

SporkTable random_table(std::mt19937_64& rng) {
    SporkTable t;
    Height start = 0;
    const int n = 1 + static_cast<int>(rng() % 6);
    for (int i = 0; i < n; ++i) {
        const auto id = "e" + std::to_string(i);
        if (i == n - 1) {
            t.push_back({start, std::nullopt, id});
        } else {
            const Height len = 1 + static_cast<Height>(rng() % 80);
            t.push_back({start, start + len - 1, id});
            start += len;
        }
    }
    return t;
}

/// Delegates to a simulator adapter but fails one endpoint.
class BrokenEndpoint final : public ChainAdapter {
  public:
    BrokenEndpoint(std::shared_ptr<ChainAdapter> inner, std::string bad) : inner_(std::move(inner)), bad_(std::move(bad)) {}
    std::string chain_id() const override { return inner_->chain_id(); }
    chain::ChainParams params() const override { return inner_->params(); }
    chain::SporkTable spork_table() const override { return inner_->spork_table(); }
    std::vector<chain::ChainEvent> get_events(const std::string& endpoint, Height from, Height to,
                                              const chain::EventFilter* filter) const override {
        if (endpoint == bad_) throw Error(Errc::storage_io, "endpoint down");
        return inner_->get_events(endpoint, from, to, filter);
    }
    std::optional<chain::ChainHead> head() const override { return inner_->head(); }
    std::optional<chain::BlockHeader> header(Height h) const override { return inner_->header(h); }

  private:
    std::shared_ptr<ChainAdapter> inner_;
    std::string bad_;
};

registry::EventRegistration reg_for(const std::string& chain_id, const std::string& contract, const std::string& sig) {
    registry::EventRegistration r;
    r.registration_id = registry::registration_id(chain_id, contract, sig);
    r.chain_id = chain_id;
    r.contract_address = contract;
    r.event_signature = sig;
    return r;
}

}  // namespace

TEST_CASE("split across spork boundaries") {
    auto s = split_by_sporks({"flow", 50, 150, {}}, kThree);
    CHECK(s == std::vector<Subrange>{{{50, 99}, "e0"}, {{100, 150}, "e1"}});
    s = split_by_sporks({"flow", 120, 180, {}}, kThree);
    CHECK(s == std::vector<Subrange>{{{120, 180}, "e1"}});
    s = split_by_sporks({"eth", 0, 500, {}}, {{0, std::nullopt, "eth-archive"}});
    CHECK(s == std::vector<Subrange>{{{0, 500}, "eth-archive"}});
    CHECK_THROWS_AS(split_by_sporks({"flow", 0, 500, {}}, {{0, 99, "e0"}}), Error);
    CHECK_THROWS_AS(split_by_sporks({"flow", 10, 5, {}}, kThree), Error);
}

TEST_CASE("property: subranges partition the request") {
    std::mt19937_64 rng(8);
    for (int i = 0; i < 1000; ++i) {
        const auto table = random_table(rng);
        const Height from = static_cast<Height>(rng() % 400);
        const Height to = from + static_cast<Height>(rng() % 400);
        const auto parts = split_by_sporks({"c", from, to, {}}, table);
        Height next = from;
        for (const auto& p : parts) {
            CHECK(p.range.from == next);
            CHECK(p.range.from <= p.range.to);
            // oracle: the endpoint's spork contains the piece
            const auto it = std::find_if(table.begin(), table.end(), [&](const auto& e) { return e.endpoint_id == p.endpoint_id; });
            REQUIRE(it != table.end());
            CHECK(it->start <= p.range.from);
            if (it->end) CHECK(p.range.to <= *it->end);
            next = p.range.to + 1;
        }
        CHECK(next == to + 1);
    }
}

TEST_CASE("spork-aware fetch merges pieces like the monolithic accessor") {
    auto sim = std::make_shared<chain::Simulator>(2);
    sim->add_chain(testing::flow_params(), kThree);
    for (Height h = 0; h < 260; ++h) {
        std::vector<chain::EventSpec> evs;
        // two events just below the boundary at 200, three just above
        if (h == 198) evs = {testing::ev("A.X", "X.E")};
        if (h == 199) evs = {testing::ev("A.X", "X.E")};
        if (h == 200) evs = {testing::ev("A.X", "X.E"), testing::ev("A.X", "X.E")};
        if (h == 201) evs = {testing::ev("A.X", "X.E"), testing::ev("A.Y", "Y.E")};
        sim->mint_block("flow", evs);
    }
    Fetcher f;
    f.add_adapter(std::make_shared<SimulatorAdapter>(sim, "flow"));
    const auto reg = reg_for("flow", "A.X", "X.E");
    FetchRequest req{"flow", 150, 250, {{"A.X", "X.E"}}};
    const auto got = f.fetch_range(req, std::span(&reg, 1));
    REQUIRE(got.size() == 5);
    for (std::size_t i = 1; i < got.size(); ++i) CHECK(got[i - 1].identity < got[i].identity);
    CHECK(got.front().identity.block_height == 198);
    CHECK(got.back().identity.block_height == 201);

    CHECK(f.fetch_raw({"flow", 0, 259, {}}) == sim->canonical_events("flow", 0, 259));
    CHECK(f.fetch_range({"flow", 0, 100, {{"A.X", "X.E"}}}, std::span(&reg, 1)).empty());
}

TEST_CASE("property: piecewise fetches concatenate to the whole") {
    std::mt19937_64 rng(31);
    auto sim = std::make_shared<chain::Simulator>(3);
    sim->add_chain(testing::flow_params(), kThree);
    chain::BlockGenerator g;
    g.templates = {{"A.X", "X.E", {{.name = "n", .kind = chain::FieldGenerator::Kind::integer}}, 1}};
    g.max_events = 4;
    for (Height h = 0; h < 300; ++h) sim->mint_block("flow", chain::generate_block_events(3, "flow", h, g));
    Fetcher f;
    f.add_adapter(std::make_shared<SimulatorAdapter>(sim, "flow"));
    for (int i = 0; i < 100; ++i) {
        const Height a = static_cast<Height>(rng() % 300);
        const Height b = a + static_cast<Height>(rng() % (300 - a));
        const Height cut = a + static_cast<Height>(rng() % (b - a + 1));
        auto left = f.fetch_raw({"flow", a, cut, {}});
        if (cut < b) {
            const auto right = f.fetch_raw({"flow", cut + 1, b, {}});
            left.insert(left.end(), right.begin(), right.end());
        }
        const auto whole = f.fetch_raw({"flow", a, b, {}});
        CHECK(left == whole);
        for (std::size_t k = 1; k < whole.size(); ++k) CHECK(whole[k - 1].id() < whole[k].id());
    }
}

TEST_CASE("one failing endpoint fails the whole request and names the subrange") {
    auto sim = std::make_shared<chain::Simulator>(2);
    sim->add_chain(testing::flow_params(), kThree);
    testing::mint_empty(*sim, "flow", 300);
    Fetcher f;
    f.add_adapter(std::make_shared<BrokenEndpoint>(std::make_shared<SimulatorAdapter>(sim, "flow"), "e1"));
    try {
        (void)f.fetch_raw({"flow", 50, 250, {}});
        FAIL("expected failure");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("[100,199]") != std::string::npos);
    }
    CHECK_NOTHROW((void)f.fetch_raw({"flow", 0, 99, {}}));
}

TEST_CASE("decode carries payload fields and the block timestamp") {
    chain::ChainEvent raw;
    raw.chain_id = "eth";
    raw.block_height = 4;
    raw.block_timestamp = 1234;
    raw.contract_address = "0xT";
    raw.event_signature = "Transfer(address,address,uint256)";
    raw.payload = {{"from", std::string("0x1")}, {"to", std::string("0x2")}, {"tokenId", std::int64_t{42}}};
    const auto reg = reg_for("eth", "0xT", raw.event_signature);
    const auto d = decode(raw, reg);
    REQUIRE(d.fields.size() == 3);
    CHECK(d.fields[0].name == "from");
    CHECK(d.fields[1].name == "to");
    CHECK(d.fields[2].name == "tokenId");
    CHECK(d.block_timestamp == 1234);
    CHECK(d.event_type == reg.registration_id);

    raw.payload.clear();
    CHECK(decode(raw, reg).fields.empty());

    raw.contract_address = "0xOther";
    try {
        (void)decode(raw, reg);
        FAIL("expected mismatch");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::signature_mismatch);
    }
    raw.contract_address = "0xT";
    raw.payload = {{"a", std::int64_t{1}}, {"a", std::int64_t{2}}};
    CHECK_THROWS_AS(decode(raw, reg), Error);
}
