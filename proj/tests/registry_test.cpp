#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <thread>

#include <msync/common/error.hpp>
#include <msync/fetcher/fetcher.hpp>
#include <msync/registry/registry.hpp>

#include "support.hpp"

using namespace mxsync;
using namespace mxsync::registry;
using testing::TempDir;

namespace {

struct Fixture {
    Fixture(std::int64_t gamma = 5) {
        sim->add_chain(testing::eth_params(100, gamma));
        sim->add_chain(testing::flow_params(50, 3), {{0, std::nullopt, "flow-1"}});
        fetcher.add_adapter(std::make_shared<fetcher::SimulatorAdapter>(sim, "eth"));
        fetcher.add_adapter(std::make_shared<fetcher::SimulatorAdapter>(sim, "flow"));
        open();
    }
    void open(Height partition = 100) {
        registry.reset();
        registry = std::make_unique<Registry>(dir / "registry.log", fetcher, clock,
                                              Registry::Options{.fsync = false, .partition_size = partition});
    }

    TempDir dir;
    VirtualClock clock{1000};
    std::shared_ptr<chain::Simulator> sim = std::make_shared<chain::Simulator>(1);
    fetcher::Fetcher fetcher;
    std::unique_ptr<Registry> registry;
};

EventRegistration reg_at(Fixture& f, const std::string& contract, Height init) {
    return f.registry->register_event("eth", contract, "Transfer(address,address,uint256)", init,
                                      testing::transfer_schema());
}

}  // namespace

TEST_CASE("registration at genesis needs no backfill") {
    Fixture f;
    f.sim->mint_block("eth", {});
    const auto r = reg_at(f, "0xT", 0);
    CHECK(r.synced_start_block_height == 0);
    CHECK(r.synced_latest_block_height == -1);
    CHECK(f.registry->backfill_status(r.registration_id).missing.empty());
    CHECK(f.registry->backfill_status(r.registration_id).complete);
}

TEST_CASE("registration cursors sit at head minus gamma") {
    Fixture f;
    testing::mint_empty(*f.sim, "eth", 1001);
    const auto r = reg_at(f, "0xT", 200);
    CHECK(r.synced_start_block_height == 995);
    CHECK(r.synced_latest_block_height == 994);
    CHECK(r.latest_block_hash == f.sim->block_header("eth", 994).block_hash);
    const auto st = f.registry->backfill_status(r.registration_id);
    REQUIRE(st.missing.size() == 1);
    CHECK(st.missing[0] == BlockRange{200, 994});
    CHECK_FALSE(st.complete);
}

TEST_CASE("duplicate and invalid registrations are rejected") {
    Fixture f;
    testing::mint_empty(*f.sim, "eth", 10);
    reg_at(f, "0xT", 0);
    try {
        reg_at(f, "0xT", 0);
        FAIL("expected duplicate");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::duplicate);
    }
    CHECK_THROWS_AS(f.registry->register_event("nope", "0xT", "X()", 0, testing::transfer_schema()), Error);
    CHECK_THROWS_AS(reg_at(f, "0xU", 50), Error);
    CHECK_THROWS_AS(reg_at(f, "0xV", -1), Error);
}

TEST_CASE("registration ids are stable and sensitive to every field") {
    const auto a = registration_id("eth", "0xA", "T()");
    CHECK(a == registration_id("eth", "0xA", "T()"));
    CHECK(a.size() == 64);
    CHECK(a != registration_id("flow", "0xA", "T()"));
    CHECK(a != registration_id("eth", "0xB", "T()"));
    CHECK(a != registration_id("eth", "0xA", "U()"));
    // length prefixing keeps field boundaries significant
    CHECK(registration_id("e", "th0xA", "T()") != a);
}

TEST_CASE("advance_latest is monotonic") {
    Fixture f;
    testing::mint_empty(*f.sim, "eth", 1101);
    const auto r = reg_at(f, "0xT", 200);
    auto res = f.registry->advance_latest({r.registration_id, 1095, 1099, "h1099", "j1"});
    CHECK(res.applied);
    CHECK(res.registration.synced_latest_block_height == 1099);
    res = f.registry->advance_latest({r.registration_id, 1001, 1000, "h1000", "j2"});
    CHECK_FALSE(res.applied);
    CHECK(f.registry->get(r.registration_id).synced_latest_block_height == 1099);
}

TEST_CASE("property: concurrent advances fold to the maximum") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        Fixture f;
        testing::mint_empty(*f.sim, "eth", 20);
        const auto r = reg_at(f, "0xT", 0);
        std::vector<Height> targets;
        for (int i = 0; i < 40; ++i) targets.push_back(static_cast<Height>(rng() % 5000));
        std::vector<std::thread> threads;
        for (int t = 0; t < 4; ++t) {
            threads.emplace_back([&, t] {
                for (std::size_t i = t; i < targets.size(); i += 4) {
                    f.registry->advance_latest({r.registration_id, 0, targets[i], "h", "j"});
                }
            });
        }
        for (auto& t : threads) t.join();
        const Height oracle = std::max(*std::max_element(targets.begin(), targets.end()), r.synced_latest_block_height);
        CHECK(f.registry->get(r.registration_id).synced_latest_block_height == oracle);
        f.open();
        CHECK(f.registry->get(r.registration_id).synced_latest_block_height == oracle);
    }
}

TEST_CASE("complete_backfill collapses the start cursor once every partition is done") {
    Fixture f;
    testing::mint_empty(*f.sim, "eth", 1001);
    const auto r = reg_at(f, "0xT", 200);
    // eight partitions aligned to init, the last one short
    std::vector<BlockRange> parts;
    for (Height from = 200; from <= 994; from += 100) parts.push_back({from, std::min<Height>(from + 99, 994)});
    REQUIRE(parts.size() == 8);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) f.registry->mark_partition_done(r.registration_id, parts[i], "j");
    try {
        f.registry->complete_backfill(r.registration_id);
        FAIL("expected incomplete backfill");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::incomplete_backfill);
    }
    CHECK(f.registry->get(r.registration_id).synced_start_block_height == 995);
    f.registry->mark_partition_done(r.registration_id, parts.back(), "j");
    const auto done = f.registry->complete_backfill(r.registration_id);
    CHECK(done.synced_start_block_height == 200);
    // idempotent, and permanent across restart
    CHECK(f.registry->complete_backfill(r.registration_id).synced_start_block_height == 200);
    f.open();
    CHECK(f.registry->get(r.registration_id).synced_start_block_height == 200);
    CHECK_THROWS_AS(f.registry->mark_partition_done(r.registration_id, {1000, 1010}, "j"), Error);
}

TEST_CASE("list_registrations filters by chain and survives restart") {
    Fixture f;
    CHECK(f.registry->list_registrations().empty());
    testing::mint_empty(*f.sim, "eth", 10);
    testing::mint_empty(*f.sim, "flow", 10);
    reg_at(f, "0xA", 0);
    reg_at(f, "0xB", 3);
    f.registry->register_event("flow", "A.Lands", "Lands.Transfer", 0, testing::transfer_schema());
    const auto all = f.registry->list_registrations();
    CHECK(all.size() == 3);
    const auto eth = f.registry->list_registrations(std::string("eth"));
    CHECK(eth.size() == 2);
    for (const auto& r : eth) CHECK(r.chain_id == "eth");
    CHECK(f.registry->list_registrations(std::string("flow")).size() == 1);

    std::vector<std::string> before;
    for (const auto& r : all) before.push_back(r.registration_id);
    f.open();
    std::vector<std::string> after;
    for (const auto& r : f.registry->list_registrations()) after.push_back(r.registration_id);
    CHECK(before == after);
}

TEST_CASE("halt is recorded and persisted") {
    Fixture f;
    testing::mint_empty(*f.sim, "eth", 10);
    const auto r = reg_at(f, "0xA", 0);
    f.registry->halt(r.registration_id, "deep reorg");
    f.open();
    const auto got = f.registry->get(r.registration_id);
    CHECK(got.halted);
    CHECK(got.halt_reason == "deep reorg");
}

TEST_CASE("a torn journal tail is ignored on replay") {
    Fixture f;
    testing::mint_empty(*f.sim, "eth", 10);
    const auto r = reg_at(f, "0xA", 0);
    f.registry->advance_latest({r.registration_id, 0, 3, "h", "j"});
    f.registry.reset();
    {
        std::ofstream out(f.dir / "registry.log", std::ios::app | std::ios::binary);
        out << "\x20\x00\x00";
    }
    f.open();
    CHECK(f.registry->get(r.registration_id).synced_latest_block_height == 3);
}
