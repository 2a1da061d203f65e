#include <msync/service/scenario.hpp>

#include <atomic>
#include <csignal>
#include <fstream>
#include <set>
#include <sstream>

#include <unistd.h>

#include <msync/chain/generator.hpp>
#include <msync/common/error.hpp>
#include <msync/common/hash.hpp>
#include <msync/service/api.hpp>
#include <msync/service/receiver.hpp>
#include <msync/service/service.hpp>

namespace mxsync::service {

using nlohmann::json;

namespace {

constexpr std::int64_t kDefaultStartMs = 1'700'000'000'000;

const std::set<std::string> kActions = {"mint", "reorg", "register", "subscribe", "unsubscribe"};
const std::set<std::string> kAssertions = {"storeCount",       "checksumFailures", "alarms",
                                           "deadLetters",      "receiverCompleteness", "followUps",
                                           "storeMatchesChain", "unifiedQuery",     "backfillComplete",
                                           "halted",           "rangeAccounting"};

[[noreturn]] void invalid(const std::string& what) { throw Error(Errc::invalid_argument, "scenario: " + what); }

std::string receiver_host(const std::string& name) { return name + ".receiver.local"; }
std::string receiver_url(const std::string& name) { return "http://" + receiver_host(name) + "/hook"; }

std::vector<store::MappedRecord> all_records(const store::EventStore& store, const std::string& type) {
    std::vector<store::MappedRecord> out;
    store::QuerySpec spec;
    spec.event_types = std::set<std::string>{type};
    spec.page.limit = 1000;
    for (;;) {
        auto page = store.query(spec);
        for (auto& r : page.records) out.push_back(std::move(r));
        if (!page.next_cursor) break;
        spec.page.cursor = page.next_cursor;
    }
    return out;
}

class Runner {
  public:
    Runner(const json& scenario, const ScenarioOptions& options) : sc_(scenario), opts_(options) {}

    ScenarioReport run();

  private:
    void build();
    void apply(const json& action, bool replay);
    void end_of_tick();
    void write_progress(std::int64_t tick);
    std::int64_t read_progress() const;
    AssertionResult check(std::size_t index, const json& a);
    json state();
    std::string id_of(const std::string& alias) const;

    const json& sc_;
    const ScenarioOptions& opts_;
    VirtualClock clock_;
    dispatch::LocalTransport transport_;
    std::unique_ptr<Service> svc_;
    std::unique_ptr<ApiRouter> api_;
    std::map<std::string, std::unique_ptr<Receiver>> receivers_;
    std::map<std::string, std::string> aliases_;
    std::vector<std::string> transient_;
    std::atomic<std::int64_t> tick_{-1};
    std::atomic<int> kill_hits_{0};
    std::int64_t tick_ms_{1000};
    std::int64_t start_ms_{kDefaultStartMs};
    FaultHooksPtr hooks_;
};

std::string Runner::id_of(const std::string& alias) const {
    auto it = aliases_.find(alias);
    if (it == aliases_.end()) invalid("unknown registration alias " + alias);
    return it->second;
}

void Runner::build() {
    tick_ms_ = sc_.value("tickMs", std::int64_t{1000});
    start_ms_ = sc_.value("startMs", kDefaultStartMs);

    ServiceConfig cfg;
    for (const auto& c : sc_.value("chains", json::array())) cfg.chains.push_back(chain_config_from_json(c));
    const auto service = sc_.value("service", json::object());
    cfg.scheduler.tick_ms = tick_ms_;
    cfg.scheduler.workers = opts_.workers.value_or(service.value("workers", std::size_t{4}));
    cfg.scheduler.partition_size = service.value("partitionSize", Height{0});
    cfg.scheduler.backfill_jobs_per_tick = service.value("backfillJobsPerTick", std::size_t{256});
    if (service.contains("retry")) {
        const auto& r = service["retry"];
        if (r.contains("jobs")) cfg.job_retry = r["jobs"].get<RetryPolicy>();
        if (r.contains("delivery")) cfg.delivery_retry = r["delivery"].get<RetryPolicy>();
    }
    cfg.data_dir = opts_.data_dir;
    cfg.fsync = sc_.value("fsync", true);
    cfg.seed = sc_.value("seed", std::uint64_t{1});

    auto hooks = std::make_shared<FaultHooks>();
    if (opts_.hooks) *hooks = *opts_.hooks;
    const auto inner = hooks->on_stage;
    const auto kill = opts_.kill;
    hooks->on_stage = [this, inner, kill](std::string_view stage) {
        if (inner) inner(stage);
        if (kill && kill->tick == tick_.load() && kill->stage == stage && ++kill_hits_ == kill->occurrence) {
            ::kill(::getpid(), SIGKILL);
        }
    };
    hooks_ = hooks;

    clock_.set(start_ms_);
    svc_ = std::make_unique<Service>(std::move(cfg), clock_, transport_, Service::Options{.hooks = hooks_});
    api_ = std::make_unique<ApiRouter>(*svc_);

    for (const auto& action : sc_.value("script", json::array())) {
        if (action.at("action") == "register") {
            aliases_[action.at("as").get<std::string>()] =
                registry::registration_id(action.at("chain"), action.at("contract"), action.at("signature"));
        }
    }

    std::filesystem::create_directories(opts_.data_dir / "receivers");
    for (const auto& r : sc_.value("receivers", json::array())) {
        Receiver::Options ro;
        ro.name = r.at("name").get<std::string>();
        ro.failure_percent = r.value("failurePercent", 0);
        ro.seed = sc_.value("seed", std::uint64_t{1});
        ro.log_path = opts_.data_dir / "receivers" / (ro.name + ".log");
        for (const auto& f : r.value("followUps", json::array())) {
            ro.follow_ups.push_back({id_of(f.at("registration")), f.at("listField"), id_of(f.at("queryRegistration")),
                                     f.at("matchColumn")});
        }
        auto receiver = std::make_unique<Receiver>(ro, [this](const ApiRequest& req) { return api_->handle(req); });
        auto* raw = receiver.get();
        transport_.route(receiver_host(ro.name),
                         [raw](const std::string& path, const std::string& body, const dispatch::Headers& headers) {
                             return raw->handle(path, body, headers);
                         });
        receivers_[ro.name] = std::move(receiver);
    }
}

void Runner::apply(const json& a, bool replay) {
    const auto type = a.at("action").get<std::string>();
    auto& sim = svc_->simulator();
    if (type == "mint") {
        const auto chain_id = a.at("chain").get<std::string>();
        if (a.contains("events")) {
            sim.mint_block(chain_id, a["events"].get<std::vector<chain::EventSpec>>());
        } else {
            svc_->mint_generated(chain_id, a.value("blocks", Height{1}));
        }
        return;
    }
    if (type == "reorg") {
        const auto chain_id = a.at("chain").get<std::string>();
        sim.reorg(chain_id, a.at("depth").get<Height>(), a.value("extra", Height{0}));
        if (a.value("revert", false)) transient_.push_back(chain_id);
        return;
    }
    if (replay) return;
    if (type == "register") {
        try {
            svc_->register_event(a.at("chain"), a.at("contract"), a.at("signature"), a.value("init", Height{0}),
                                 a.at("schema").get<store::MappingSchema>());
        } catch (const Error& e) {
            if (e.code() != Errc::duplicate) throw;
        }
        return;
    }
    const auto reg = id_of(a.at("registration"));
    const auto url = receiver_url(a.at("receiver"));
    auto existing = svc_->dispatcher().subscriptions(reg);
    auto it = std::find_if(existing.begin(), existing.end(), [&](const auto& s) { return s.url == url; });
    if (type == "subscribe" && it == existing.end()) svc_->dispatcher().subscribe(reg, url);
    if (type == "unsubscribe" && it != existing.end()) svc_->dispatcher().unsubscribe(it->subscription_id);
}

void Runner::end_of_tick() {
    for (auto it = transient_.rbegin(); it != transient_.rend(); ++it) svc_->simulator().revert_reorg(*it);
    transient_.clear();
}

void Runner::write_progress(std::int64_t tick) {
    const auto path = opts_.data_dir / "progress.json";
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << json{{"tick", tick}}.dump() << '\n';
    }
    std::filesystem::rename(tmp, path);
}

std::int64_t Runner::read_progress() const {
    std::ifstream in(opts_.data_dir / "progress.json");
    if (!in) return -1;
    try {
        return json::parse(in).at("tick").get<std::int64_t>();
    } catch (const json::exception& e) {
        throw Error(Errc::corrupt_file, "unreadable " + (opts_.data_dir / "progress.json").string());
    }
}

ScenarioReport Runner::run() {
    ScenarioReport report;
    std::filesystem::create_directories(opts_.data_dir);
    const auto resume = read_progress();
    report.resumed_from = resume;
    build();

    const auto script = sc_.value("script", json::array());
    std::int64_t last_tick = -1;
    for (const auto& a : script) last_tick = std::max(last_tick, a.at("tick").get<std::int64_t>());
    const std::int64_t max_ticks = sc_.value("maxTicks", last_tick + 2000);

    std::size_t next_action = 0;
    const std::int64_t first = std::max<std::int64_t>(0, resume);
    for (std::int64_t t = 0; t < first; ++t) {
        clock_.set(start_ms_ + t * tick_ms_);
        while (next_action < script.size() && script[next_action].at("tick").get<std::int64_t>() == t) {
            apply(script[next_action++], true);
        }
        end_of_tick();
    }

    bool quiesced = false;
    std::int64_t t = first;
    for (; t <= max_ticks; ++t) {
        clock_.set(start_ms_ + t * tick_ms_);
        write_progress(t);
        tick_ = t;
        fire_stage(hooks_, "tick_start");
        while (next_action < script.size() && script[next_action].at("tick").get<std::int64_t>() == t) {
            apply(script[next_action++], false);
        }
        fire_stage(hooks_, "after_chain");
        svc_->tick();
        fire_stage(hooks_, "after_jobs");
        svc_->deliver();
        fire_stage(hooks_, "after_delivery");
        end_of_tick();
        if (t >= last_tick && svc_->engine().caught_up() &&
            svc_->dispatcher().queue().count(dispatch::NotificationState::pending) == 0) {
            quiesced = true;
            break;
        }
    }
    tick_ = -1;
    report.ticks = std::min(t, max_ticks) + 1;

    std::size_t index = 0;
    if (!quiesced) {
        report.assertions.push_back({index++, "quiescence", false,
                                     "work still pending after tick " + std::to_string(max_ticks)});
    }
    for (const auto& a : sc_.value("assertions", json::array())) report.assertions.push_back(check(index++, a));
    for (const auto& r : report.assertions) {
        if (!r.passed && !report.first_failure) report.first_failure = r.index;
    }
    report.passed = !report.first_failure.has_value();
    report.state = state();
    if (opts_.inspect) {
        std::map<std::string, const Receiver*> receivers;
        for (const auto& [name, r] : receivers_) receivers[name] = r.get();
        opts_.inspect(*svc_, receivers);
    }
    return report;
}

AssertionResult Runner::check(std::size_t index, const json& a) {
    AssertionResult res{index, a.at("type").get<std::string>(), false, {}};
    const auto& type = res.type;
    auto& store = svc_->store();
    auto& registry = svc_->registry();
    auto expect_count = [&](std::int64_t actual, const std::string& what) {
        res.detail = what + " = " + std::to_string(actual);
        if (a.contains("equals")) {
            res.passed = actual == a["equals"].get<std::int64_t>();
            res.detail += ", expected " + a["equals"].dump();
        } else if (a.contains("min")) {
            res.passed = actual >= a["min"].get<std::int64_t>();
            res.detail += ", expected at least " + a["min"].dump();
        } else {
            res.passed = true;
        }
    };

    if (type == "storeCount") {
        std::int64_t n = 0;
        if (a.contains("registration")) {
            const auto counts = store.count_by_type();
            auto it = counts.find(id_of(a["registration"]));
            n = it == counts.end() ? 0 : it->second;
        } else {
            n = static_cast<std::int64_t>(store.size());
        }
        expect_count(n, "records");
    } else if (type == "checksumFailures") {
        expect_count(svc_->integrity().counters().checksum_failures_total, "checksum failures");
    } else if (type == "alarms") {
        std::int64_t n = 0;
        for (const auto& al : svc_->integrity().alarms()) {
            if (!a.contains("kind") || al.kind == a["kind"].get<std::string>()) ++n;
        }
        expect_count(n, "alarms" + (a.contains("kind") ? " of kind " + a["kind"].get<std::string>() : ""));
    } else if (type == "deadLetters") {
        expect_count(svc_->dispatcher().queue().count(dispatch::NotificationState::dead), "dead notifications");
    } else if (type == "receiverCompleteness") {
        const auto name = a.at("receiver").get<std::string>();
        const auto url = receiver_url(name);
        std::set<std::string> expected;
        std::set<std::string> active_subs;
        for (const auto& sub : svc_->dispatcher().subscriptions()) {
            if (sub.url != url) continue;
            active_subs.insert(sub.subscription_id);
            for (const auto& r : all_records(store, sub.registration_id)) {
                expected.insert(dispatch::notification_id(r.record_key, sub.subscription_id));
            }
        }
        std::set<std::string> received;
        for (const auto& id : receivers_.at(name)->notification_ids()) {
            auto n = svc_->dispatcher().queue().get(id);
            if (n && active_subs.contains(n->subscription_id)) received.insert(id);
        }
        std::int64_t missing = 0;
        for (const auto& id : expected) missing += !received.contains(id);
        const auto extra = static_cast<std::int64_t>(received.size()) - (static_cast<std::int64_t>(expected.size()) - missing);
        res.passed = missing == 0 && extra == 0;
        res.detail = "expected " + std::to_string(expected.size()) + " notifications, missing " +
                     std::to_string(missing) + ", unexpected " + std::to_string(extra);
    } else if (type == "followUps") {
        const auto name = a.at("receiver").get<std::string>();
        const auto reg = id_of(a.at("registration"));
        const auto min_results = a.value("minResults", std::int64_t{1});
        const auto& receiver = *receivers_.at(name);
        std::map<std::string, std::vector<FollowUpRecord>> by_id;
        for (const auto& f : receiver.follow_ups()) by_id[f.notification_id].push_back(f);
        const auto ids = receiver.ids_by_type();
        auto it = ids.find(reg);
        std::int64_t events = 0;
        std::int64_t lacking = 0;
        if (it != ids.end()) {
            for (const auto& id : it->second) {
                ++events;
                const auto& fs = by_id[id];
                const bool ok = !fs.empty() && std::all_of(fs.begin(), fs.end(), [&](const auto& f) {
                    return f.results >= min_results;
                });
                lacking += !ok;
            }
        }
        res.passed = events > 0 && lacking == 0;
        res.detail = std::to_string(events) + " notifications, " + std::to_string(lacking) +
                     " without satisfied follow-up queries";
    } else if (type == "storeMatchesChain") {
        std::int64_t mismatches = 0;
        std::int64_t compared = 0;
        std::string first;
        for (const auto& reg : registry.list_registrations()) {
            if (reg.halted) continue;
            const auto params = svc_->fetcher().chain_params(reg.chain_id);
            const auto head = svc_->simulator().latest_height(reg.chain_id).latest_height;
            const Height safe = head - params.confirmation_depth;
            if (reg.synced_latest_block_height != safe) {
                ++mismatches;
                if (first.empty()) {
                    first = reg.registration_id + " cursor " + std::to_string(reg.synced_latest_block_height) +
                            " != safe head " + std::to_string(safe);
                }
            }
            std::int64_t expected_count = 0;
            if (safe >= reg.init_block_height) {
                for (const auto& ev : svc_->simulator().canonical_events(reg.chain_id, reg.init_block_height, safe)) {
                    if (ev.contract_address != reg.contract_address || ev.event_signature != reg.event_signature) {
                        continue;
                    }
                    ++expected_count;
                    ++compared;
                    const auto want = store::canonical_line(
                        store::apply_schema(fetcher::decode(ev, reg), reg.mapping_schema));
                    const auto got = store.get(ev.id());
                    if (!got || store::canonical_line(*got) != want) {
                        ++mismatches;
                        if (first.empty()) first = "record " + ev.id().to_string() + (got ? " differs" : " missing");
                    }
                }
            }
            const auto counts = store.count_by_type();
            auto c = counts.find(reg.registration_id);
            const std::int64_t stored = c == counts.end() ? 0 : c->second;
            if (stored != expected_count) {
                ++mismatches;
                if (first.empty()) {
                    first = reg.registration_id + " has " + std::to_string(stored) + " records, chain has " +
                            std::to_string(expected_count);
                }
            }
        }
        res.passed = mismatches == 0;
        res.detail = std::to_string(compared) + " records compared, " + std::to_string(mismatches) + " mismatches" +
                     (first.empty() ? "" : "; first: " + first);
    } else if (type == "unifiedQuery") {
        json spec = a.at("query");
        if (spec.contains("eventTypes")) {
            json types = json::array();
            for (const auto& t : spec["eventTypes"]) types.push_back(id_of(t.get<std::string>()));
            spec["eventTypes"] = types;
        }
        auto res_api = api_->handle({"POST", "/v1/query", {}, spec.dump()});
        if (res_api.status != 200) {
            res.detail = "query failed with status " + std::to_string(res_api.status) + ": " + res_api.body;
        } else {
            const auto body = json::parse(res_api.body);
            std::set<std::string> chains;
            for (const auto& r : body.at("records")) chains.insert(r.at("recordKey").at("chainId").get<std::string>());
            res.passed = true;
            for (const auto& c : a.value("chains", json::array())) res.passed = res.passed && chains.contains(c);
            const auto n = static_cast<std::int64_t>(body.at("records").size());
            if (a.contains("minRecords")) res.passed = res.passed && n >= a["minRecords"].get<std::int64_t>();
            std::string seen;
            for (const auto& c : chains) seen += (seen.empty() ? "" : ",") + c;
            res.detail = std::to_string(n) + " records from chains [" + seen + "]";
        }
    } else if (type == "backfillComplete") {
        std::int64_t open = 0;
        for (const auto& reg : registry.list_registrations()) {
            open += !reg.halted && reg.synced_start_block_height != reg.init_block_height;
        }
        res.passed = open == 0;
        res.detail = std::to_string(open) + " registrations with incomplete backfill";
    } else if (type == "halted") {
        const auto reg = registry.get(id_of(a.at("registration")));
        res.passed = reg.halted == a.value("equals", true);
        res.detail = std::string("halted = ") + (reg.halted ? "true" : "false") +
                     (reg.halt_reason.empty() ? "" : " (" + reg.halt_reason + ")");
    } else if (type == "rangeAccounting") {
        std::int64_t bad = 0;
        std::string first;
        for (const auto& reg : registry.list_registrations()) {
            if (reg.halted) continue;
            auto ranges = registry.sync_history(reg.registration_id);
            std::sort(ranges.begin(), ranges.end(), [](const auto& x, const auto& y) { return x.range < y.range; });
            Height next = reg.init_block_height;
            bool ok = true;
            for (const auto& r : ranges) {
                ok = ok && r.range.from == next;
                next = r.range.to + 1;
            }
            ok = ok && next - 1 == reg.synced_latest_block_height;
            if (!ok) {
                ++bad;
                if (first.empty()) first = reg.registration_id;
            }
        }
        res.passed = bad == 0;
        res.detail = std::to_string(bad) + " registrations with gaps or overlaps" +
                     (first.empty() ? "" : "; first: " + first);
    } else {
        res.detail = "unknown assertion type";
    }
    return res;
}

json Runner::state() {
    json out;
    const auto lines = svc_->store().canonical_dump();
    std::string joined;
    for (const auto& l : lines) joined += l + "\n";
    out["storeRecords"] = lines.size();
    out["storeDigest"] = sha256_hex(joined);
    auto regs = json::array();
    for (const auto& r : svc_->registry().list_registrations()) {
        regs.push_back({{"registrationId", r.registration_id},
                        {"syncedStart", r.synced_start_block_height},
                        {"syncedLatest", r.synced_latest_block_height},
                        {"halted", r.halted}});
    }
    out["registrations"] = std::move(regs);
    json recv = json::object();
    for (const auto& [name, r] : receivers_) {
        std::string ids;
        const auto set = r->notification_ids();
        for (const auto& id : set) ids += id + "\n";
        std::set<std::string> follow;
        for (const auto& f : r->follow_ups()) {
            follow.insert(f.notification_id + "|" + f.value + "|" + std::to_string(f.results));
        }
        recv[name] = {{"notifications", set.size()},
                      {"digest", sha256_hex(ids)},
                      {"followUps", follow.size()}};
    }
    out["receivers"] = std::move(recv);
    out["deadNotifications"] = svc_->dispatcher().queue().count(dispatch::NotificationState::dead);
    return out;
}

}  // namespace

const std::vector<std::string>& scenario_stages() {
    static const std::vector<std::string> stages = {
        "tick_start",          "after_chain",      "job_after_persist", "job_after_checksum",
        "job_after_enqueue",   "job_before_cursor", "job_done",         "backfill_complete",
        "after_jobs",          "delivery_acked",   "after_delivery"};
    return stages;
}

void validate_scenario(const json& sc) {
    if (!sc.is_object()) invalid("must be a JSON object");
    if (sc.value("version", 1) != 1) invalid("unsupported version " + sc["version"].dump());
    std::set<std::string> chains;
    for (const auto& c : sc.value("chains", json::array())) {
        const auto id = c.at("chainId").get<std::string>();
        if (!chains.insert(id).second) invalid("duplicate chain " + id);
    }
    std::set<std::string> receivers;
    for (const auto& r : sc.value("receivers", json::array())) {
        const auto name = r.at("name").get<std::string>();
        if (!receivers.insert(name).second) invalid("duplicate receiver " + name);
        const auto pct = r.value("failurePercent", 0);
        if (pct < 0 || pct > 100) invalid("receiver " + name + " failurePercent must be within 0..100");
    }
    std::set<std::string> aliases;
    std::int64_t prev = 0;
    std::set<std::pair<std::int64_t, std::string>> transient;
    std::size_t i = 0;
    for (const auto& a : sc.value("script", json::array())) {
        const auto where = "script[" + std::to_string(i++) + "]";
        if (!a.contains("tick") || !a["tick"].is_number_integer()) invalid(where + " needs an integer tick");
        const auto tick = a["tick"].get<std::int64_t>();
        if (tick < prev) invalid(where + " tick " + std::to_string(tick) + " is earlier than the previous action");
        prev = tick;
        const auto action = a.value("action", "");
        if (!kActions.contains(action)) invalid(where + " has unknown action '" + action + "'");
        if (action == "mint" || action == "reorg" || action == "register") {
            const auto chain_id = a.value("chain", "");
            if (!chains.contains(chain_id)) invalid(where + " references undefined chain '" + chain_id + "'");
        }
        if (action == "reorg" && a.value("revert", false) && !transient.insert({tick, a["chain"]}).second) {
            invalid(where + " second reverting reorg of one chain in a tick");
        }
        if (action == "register") {
            if (!a.contains("as")) invalid(where + " register needs an alias ('as')");
            aliases.insert(a["as"].get<std::string>());
        }
        if (action == "subscribe" || action == "unsubscribe") {
            const auto reg = a.value("registration", "");
            const auto recv = a.value("receiver", "");
            if (!aliases.contains(reg)) invalid(where + " references unregistered alias '" + reg + "'");
            if (!receivers.contains(recv)) invalid(where + " references undefined receiver '" + recv + "'");
        }
    }
    i = 0;
    for (const auto& a : sc.value("assertions", json::array())) {
        const auto type = a.value("type", "");
        if (!kAssertions.contains(type)) {
            invalid("assertions[" + std::to_string(i) + "] has unknown type '" + type + "'");
        }
        ++i;
    }
}

json load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::invalid_argument, "cannot read scenario " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(Errc::invalid_argument, "scenario " + path.string() + " is not valid JSON: " + e.what());
    }
}

ScenarioReport run_scenario(const json& scenario, const ScenarioOptions& options) {
    validate_scenario(scenario);
    if (options.data_dir.empty()) throw Error(Errc::invalid_argument, "scenario data directory is required");
    Runner runner(scenario, options);
    return runner.run();
}

json report_to_json(const ScenarioReport& report) {
    auto assertions = json::array();
    for (const auto& a : report.assertions) {
        assertions.push_back({{"index", a.index}, {"type", a.type}, {"passed", a.passed}, {"detail", a.detail}});
    }
    return {{"version", 1},
            {"passed", report.passed},
            {"ticks", report.ticks},
            {"resumedFrom", report.resumed_from},
            {"firstFailure", report.first_failure ? json(*report.first_failure) : json(nullptr)},
            {"assertions", assertions},
            {"state", report.state}};
}

std::string format_report(const ScenarioReport& report) {
    std::ostringstream out;
    out << (report.passed ? "PASS" : "FAIL") << " after " << report.ticks << " ticks";
    if (report.resumed_from >= 0) out << " (resumed at tick " << report.resumed_from << ")";
    out << '\n';
    for (const auto& a : report.assertions) {
        out << "  [" << (a.passed ? "ok" : "FAILED") << "] #" << a.index << ' ' << a.type << ": " << a.detail << '\n';
    }
    if (report.first_failure) out << "first failing assertion: #" << *report.first_failure << '\n';
    return out.str();
}

}  // namespace mxsync::service
