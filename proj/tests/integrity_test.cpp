#include <doctest.h>

#include <fstream>
#include <numeric>
#include <random>

#include <msync/common/error.hpp>
#include <msync/integrity/integrity.hpp>

#include "support.hpp"

using namespace mxsync;
using namespace mxsync::integrity;
using testing::TempDir;

namespace {

JobReport report(const std::string& id, std::int64_t all, std::int64_t non, std::map<std::string, std::int64_t> per,
                 std::vector<std::string> scope = {"A", "B"}) {
    JobReport r;
    r.job = {id, JobKind::regular, "eth", std::move(scope), {0, 9}, 1};
    r.count_all_events = all;
    r.count_non_persisted = non;
    r.per_type_persisted = std::move(per);
    return r;
}

struct Fixture {
    Fixture() { open(); }
    void open() {
        integrity.reset();
        integrity = std::make_unique<Integrity>(dir.path(), clock, Integrity::Options{.fsync = false});
    }
    TempDir dir;
    VirtualClock clock{10'000};
    std::unique_ptr<Integrity> integrity;
};

}  // namespace

TEST_CASE("fetch identity") {
    Fixture f;
    auto r = f.integrity->verify_fetch_checksum(report("j1", 10, 4, {{"A", 3}, {"B", 3}}));
    CHECK(r.fetch_verdict == Verdict::pass);
    CHECK(f.integrity->alarms().empty());

    r = f.integrity->verify_fetch_checksum(report("j2", 10, 4, {{"A", 3}, {"B", 2}}));
    CHECK(r.fetch_verdict == Verdict::fail);
    const auto alarms = f.integrity->alarms();
    REQUIRE(alarms.size() == 1);
    CHECK(alarms[0].detail.at("jobId") == "j2");
    CHECK(alarms[0].detail.at("countAllEvents") == 10);
    CHECK(alarms[0].detail.at("countNonPersisted") == 4);
    CHECK(alarms[0].detail.at("persistedSum") == 5);

    r = f.integrity->verify_fetch_checksum(report("j3", 0, 0, {}));
    CHECK(r.fetch_verdict == Verdict::pass);
    CHECK_THROWS_AS(f.integrity->verify_fetch_checksum(report("j3", 0, 0, {})), Error);
}

TEST_CASE("property: fetch verdict equals the arithmetic identity") {
    std::mt19937_64 rng(9);
    Fixture f;
    for (int i = 0; i < 500; ++i) {
        std::map<std::string, std::int64_t> per;
        const int types = static_cast<int>(rng() % 4);
        for (int t = 0; t < types; ++t) per["T" + std::to_string(t)] = static_cast<std::int64_t>(rng() % 20);
        const std::int64_t non = static_cast<std::int64_t>(rng() % 20);
        std::int64_t sum = non;
        for (const auto& [_, n] : per) sum += n;
        const std::int64_t all = sum + (rng() % 3 == 0 ? static_cast<std::int64_t>(rng() % 5) - 2 : 0);
        const auto r = f.integrity->verify_fetch_checksum(report("p" + std::to_string(i), all, non, per));
        CHECK((r.fetch_verdict == Verdict::pass) == (all == sum));
    }
}

TEST_CASE("notify identity") {
    Fixture f;
    f.integrity->verify_fetch_checksum(report("j1", 10, 4, {{"A", 3}, {"B", 3}}));
    CHECK(f.integrity->verify_notify_checksum("j1", 6).notify_verdict == Verdict::pass);

    f.integrity->verify_fetch_checksum(report("j2", 10, 4, {{"A", 3}, {"B", 3}}));
    const auto r = f.integrity->verify_notify_checksum("j2", 5);
    CHECK(r.notify_verdict == Verdict::fail);
    const auto alarms = f.integrity->alarms();
    REQUIRE(alarms.size() == 1);
    CHECK(alarms[0].source == "notify_checksum");
    CHECK(alarms[0].detail.at("missing") == 1);

    f.integrity->verify_fetch_checksum(report("j3", 0, 0, {}));
    CHECK(f.integrity->verify_notify_checksum("j3", 0).notify_verdict == Verdict::pass);

    // fan-out: two subscribers on A, none on B
    f.integrity->verify_fetch_checksum(report("j4", 6, 0, {{"A", 3}, {"B", 3}}));
    CHECK(f.integrity->verify_notify_checksum("j4", 6, {{"A", 2}, {"B", 0}}).notify_verdict == Verdict::pass);

    try {
        f.integrity->verify_notify_checksum("missing", 0);
        FAIL("expected unknown job");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::unknown_job);
    }
}

TEST_CASE("records are immutable once both verdicts are set") {
    Fixture f;
    f.integrity->verify_fetch_checksum(report("j1", 6, 0, {{"A", 6}}, {"A"}));
    const auto first = f.integrity->verify_notify_checksum("j1", 6);
    const auto again = f.integrity->verify_notify_checksum("j1", 2);
    CHECK(again.notify_verdict == Verdict::pass);
    CHECK(again.notification_sent == first.notification_sent);
    f.open();
    const auto reloaded = f.integrity->latest("j1");
    REQUIRE(reloaded);
    CHECK(reloaded->notify_verdict == Verdict::pass);
    CHECK(reloaded->notification_sent == 6);
    CHECK(f.integrity->next_attempt("j1") == 2);
}

TEST_CASE("analytics sums persisted counts per type") {
    Fixture f;
    f.clock.set(1000);
    f.integrity->verify_fetch_checksum(report("j1", 3, 0, {{"A", 3}}, {"A"}));
    f.clock.set(1500);
    f.integrity->verify_fetch_checksum(report("j2", 2, 0, {{"A", 2}}, {"A"}));
    f.clock.set(2500);
    f.integrity->verify_fetch_checksum(report("j3", 1, 0, {{"B", 1}}, {"B"}));

    const auto a = f.integrity->checksum_analytics({}, {0, 10'000}, 1000);
    std::map<std::string, std::int64_t> totals;
    for (const auto& t : a.types) totals[t.event_type] = t.total;
    // sum oracle over the stored records
    std::map<std::string, std::int64_t> want;
    for (const auto& r : f.integrity->records()) {
        for (const auto& [type, n] : r.per_type_persisted) want[type] += n;
    }
    CHECK(totals == want);
    CHECK(totals["A"] == 5);
    CHECK(totals["B"] == 1);
    CHECK(a.failures == 0);
    for (const auto& t : a.types) {
        if (t.event_type == "A") CHECK(t.buckets == std::vector<std::pair<std::int64_t, std::int64_t>>{{1000, 5}});
    }

    CHECK(f.integrity->checksum_analytics({}, {0, 999}, 1000).types.empty());

    f.clock.set(3000);
    f.integrity->verify_fetch_checksum(report("j4", 2, 0, {{"A", 1}}, {"A"}));
    const auto b = f.integrity->checksum_analytics({}, {0, 10'000}, 1000);
    CHECK(b.failures == 1);
    for (const auto& t : b.types) {
        if (t.event_type == "A") CHECK(t.failures == 1);
    }
    const auto only_b = f.integrity->checksum_analytics({std::nullopt, std::string("B")}, {0, 10'000}, 1000);
    REQUIRE(only_b.types.size() == 1);
    CHECK(only_b.types[0].event_type == "B");
}

TEST_CASE("alarm log is inspectable and survives restart") {
    Fixture f;
    CHECK(f.integrity->alarms().empty());
    f.integrity->raise_alarm("sync", "deep_reorg", {{"registrationId", "r"}});
    f.integrity->raise_alarm("dispatcher", "notification_dead", {{"id", "n"}});
    f.open();
    const auto alarms = f.integrity->alarms();
    REQUIRE(alarms.size() == 2);
    CHECK(alarms[0].kind == "deep_reorg");
    CHECK(alarms[1].kind == "notification_dead");
    CHECK(f.integrity->counters().alarms_total == 2);
    std::ifstream in(f.dir / "alarms.log");
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) lines += !line.empty();
    CHECK(lines == 2);
}

TEST_CASE("counters") {
    Fixture f;
    f.integrity->verify_fetch_checksum(report("j1", 3, 0, {{"A", 3}}, {"A"}));
    f.integrity->verify_fetch_checksum(report("j2", 3, 0, {{"A", 2}}, {"A"}));
    const auto c = f.integrity->counters();
    CHECK(c.jobs_total == 2);
    CHECK(c.checksum_failures_total == 1);
    CHECK(c.events_persisted_total.at("A") == 3);
}
