#include <msync/service/service.hpp>

#include <fstream>
#include <sstream>

#include <msync/chain/generator.hpp>
#include <msync/common/error.hpp>

namespace mxsync::service {

using nlohmann::json;

Service::Service(ServiceConfig config, const Clock& clock, dispatch::Transport& transport, Options options)
    : config_(std::move(config)), clock_(clock), options_(std::move(options)) {
    validate(config_);

    simulator_ = std::make_shared<chain::Simulator>(config_.seed);
    fetcher_ = std::make_unique<fetcher::Fetcher>(fetcher::Fetcher::Options{.hooks = options_.hooks});
    for (const auto& c : config_.chains) {
        simulator_->add_chain(c.params, c.sporks);
        fetcher_->add_adapter(std::make_shared<fetcher::SimulatorAdapter>(simulator_, c.params.chain_id, c.params));
    }

    if (options_.wall_clock_chains) {
        const auto epoch_file = config_.data_dir / "simulation.json";
        std::ifstream in(epoch_file);
        if (in) {
            try {
                sim_epoch_ms_ = json::parse(in).at("epochMs").get<std::int64_t>();
            } catch (const json::exception& e) {
                throw Error(Errc::corrupt_file, "unreadable " + epoch_file.string() + ": " + e.what());
            }
        } else {
            sim_epoch_ms_ = clock_.now_ms();
            std::ofstream(epoch_file) << json{{"epochMs", sim_epoch_ms_}}.dump() << '\n';
        }
        advance_wall_clock_chains();
    }

    registry_ = std::make_unique<registry::Registry>(config_.data_dir / "registry.log", *fetcher_, clock_,
                                                     registry::Registry::Options{
                                                         .fsync = config_.fsync,
                                                         .partition_size = config_.scheduler.partition_size});
    store_ = std::make_unique<store::EventStore>(config_.store_path, clock_,
                                                 store::EventStore::Options{.fsync = config_.fsync,
                                                                            .hooks = options_.hooks});
    for (const auto& reg : registry_->list_registrations()) store_->register_schema(reg.mapping_schema);

    const auto integrity_dir = config_.data_dir / "integrity";
    std::filesystem::create_directories(integrity_dir);
    integrity_ = std::make_unique<integrity::Integrity>(integrity_dir, clock_,
                                                        integrity::Integrity::Options{.fsync = config_.fsync});
    dispatcher_ = std::make_unique<dispatch::Dispatcher>(
        config_.queue_path, *registry_, *integrity_, transport, clock_,
        dispatch::Dispatcher::Options{
            .fsync = config_.fsync, .retry = config_.delivery_retry, .hooks = options_.hooks});
    engine_ = std::make_unique<sync::Engine>(
        *fetcher_, *registry_, *store_, *integrity_, *dispatcher_, clock_,
        sync::Engine::Options{.workers = config_.scheduler.workers,
                              .retry = config_.job_retry,
                              .backfill_jobs_per_tick = config_.scheduler.backfill_jobs_per_tick,
                              .hooks = options_.hooks,
                              .batch_policy = {}});
    delivery_pool_ = std::make_unique<WorkerPool>(config_.scheduler.workers);
}

Service::~Service() = default;

registry::EventRegistration Service::register_event(const std::string& chain_id, const std::string& contract_address,
                                                    const std::string& event_signature, Height init_block_height,
                                                    store::MappingSchema schema) {
    auto reg = registry_->register_event(chain_id, contract_address, event_signature, init_block_height,
                                         std::move(schema));
    store_->register_schema(reg.mapping_schema);
    return reg;
}

chain::BlockHeader Service::mint_generated(const std::string& chain_id, Height blocks) {
    const auto it = std::find_if(config_.chains.begin(), config_.chains.end(),
                                 [&](const auto& c) { return c.params.chain_id == chain_id; });
    if (it == config_.chains.end()) throw Error(Errc::unknown_chain, "unknown chain: " + chain_id);
    if (blocks < 1) throw Error(Errc::invalid_argument, "blocks must be positive");
    chain::BlockHeader last;
    for (Height i = 0; i < blocks; ++i) {
        const Height next = simulator_->has_blocks(chain_id) ? simulator_->latest_height(chain_id).latest_height + 1 : 0;
        std::vector<chain::EventSpec> events;
        if (it->generator) events = chain::generate_block_events(config_.seed, chain_id, next, *it->generator);
        last = simulator_->mint_block(chain_id, std::move(events));
    }
    return last;
}

Height Service::wall_clock_height(const ChainConfig& chain) const {
    const auto elapsed = std::max<std::int64_t>(0, clock_.now_ms() - sim_epoch_ms_);
    return config_.simulation.initial_height + elapsed / (chain.params.block_interval_s * 1000);
}

void Service::advance_wall_clock_chains() {
    if (!options_.wall_clock_chains) return;
    for (const auto& c : config_.chains) {
        if (!c.generator) continue;
        const auto& id = c.params.chain_id;
        const Height target = wall_clock_height(c);
        const Height head = simulator_->has_blocks(id) ? simulator_->latest_height(id).latest_height : -1;
        if (target > head) mint_generated(id, target - head);
    }
}

sync::TickReport Service::tick() {
    advance_wall_clock_chains();
    return engine_->tick();
}

dispatch::DeliveryStats Service::deliver() { return dispatcher_->deliver_due(delivery_pool_.get()); }

namespace {

std::string label(const std::string& v) {
    std::string out;
    for (char c : v) {
        if (c == '"' || c == '\\') out += '\\';
        if (c == '\n') {
            out += "\\n";
            continue;
        }
        out += c;
    }
    return out;
}

}  // namespace

std::string Service::metrics_text() const {
    const auto counters = integrity_->counters();
    std::ostringstream out;
    out << "# HELP msync_jobs_total Sync jobs with a recorded checksum verdict.\n"
        << "# TYPE msync_jobs_total counter\n"
        << "msync_jobs_total " << counters.jobs_total << '\n'
        << "# HELP msync_checksum_failures_total Jobs whose fetch or notify checksum failed.\n"
        << "# TYPE msync_checksum_failures_total counter\n"
        << "msync_checksum_failures_total " << counters.checksum_failures_total << '\n'
        << "# HELP msync_alarms_total Alarms raised.\n"
        << "# TYPE msync_alarms_total counter\n"
        << "msync_alarms_total " << counters.alarms_total << '\n'
        << "# HELP msync_events_persisted_total Events persisted by passing jobs, by event type.\n"
        << "# TYPE msync_events_persisted_total counter\n";
    for (const auto& [type, n] : counters.events_persisted_total) {
        out << "msync_events_persisted_total{event_type=\"" << label(type) << "\"} " << n << '\n';
    }
    out << "# HELP msync_store_records Records in the event store.\n"
        << "# TYPE msync_store_records gauge\n"
        << "msync_store_records " << store_->size() << '\n'
        << "# HELP msync_notifications Notifications in the queue by state.\n"
        << "# TYPE msync_notifications gauge\n";
    for (auto state : {dispatch::NotificationState::pending, dispatch::NotificationState::delivered,
                       dispatch::NotificationState::dead}) {
        out << "msync_notifications{state=\"" << dispatch::to_string(state) << "\"} "
            << dispatcher_->queue().count(state) << '\n';
    }
    out << "# HELP msync_sync_lag_blocks Blocks between the safe head and the registration cursor.\n"
        << "# TYPE msync_sync_lag_blocks gauge\n";
    for (const auto& reg : registry_->list_registrations()) {
        const auto head = fetcher_->chain_head(reg.chain_id);
        if (!head) continue;
        const auto params = fetcher_->chain_params(reg.chain_id);
        const auto lag = std::max<std::int64_t>(
            0, head->latest_height - params.confirmation_depth - reg.synced_latest_block_height);
        out << "msync_sync_lag_blocks{registration=\"" << label(reg.registration_id) << "\",chain=\""
            << label(reg.chain_id) << "\"} " << lag << '\n';
    }
    out << "# HELP msync_registrations_halted Registrations halted by a deep reorg.\n"
        << "# TYPE msync_registrations_halted gauge\n";
    std::int64_t halted = 0;
    for (const auto& reg : registry_->list_registrations()) halted += reg.halted;
    out << "msync_registrations_halted " << halted << '\n';
    return out.str();
}

json Service::health() const {
    auto chains = json::array();
    for (const auto& id : fetcher_->chains()) {
        const auto head = fetcher_->chain_head(id);
        chains.push_back({{"chainId", id}, {"head", head ? json(head->latest_height) : json(nullptr)}});
    }
    return {{"version", 1},
            {"status", "ok"},
            {"registrations", registry_->list_registrations().size()},
            {"records", store_->size()},
            {"chains", std::move(chains)}};
}

}  // namespace mxsync::service
