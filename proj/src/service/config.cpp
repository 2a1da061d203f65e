#include <msync/service/config.hpp>

#include <fstream>
#include <set>

#include <msync/common/error.hpp>

namespace mxsync::service {

using nlohmann::json;

namespace {

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
    throw Error(Errc::invalid_argument, "config field " + field + " " + why);
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) bad_field(where.empty() ? "<root>" : where, "must be an object");
    for (const auto& [k, _] : j.items()) {
        if (!known.contains(k)) bad_field(where.empty() ? k : where + "." + k, "is not recognised");
    }
}

template <typename T>
T field(const json& j, const char* key, T fallback, const std::string& path) {
    if (!j.contains(key) || j[key].is_null()) return fallback;
    try {
        return j[key].get<T>();
    } catch (const json::exception&) {
        bad_field(path, "has the wrong type");
    }
}

}  // namespace

ChainConfig chain_config_from_json(const json& j) {
    reject_unknown(j,
                   {"chainId", "maxBatch", "confirmationDepth", "sporked", "blockInterval", "genesisTime", "sporks",
                    "generator"},
                   "chains[]");
    ChainConfig c;
    c.params.chain_id = field<std::string>(j, "chainId", "", "chains[].chainId");
    const std::string p = "chains[" + c.params.chain_id + "].";
    c.params.max_batch = field<std::int64_t>(j, "maxBatch", c.params.max_batch, p + "maxBatch");
    c.params.confirmation_depth = field<std::int64_t>(j, "confirmationDepth", c.params.confirmation_depth,
                                                      p + "confirmationDepth");
    c.params.sporked = field<bool>(j, "sporked", false, p + "sporked");
    c.params.block_interval_s = field<std::int64_t>(j, "blockInterval", c.params.block_interval_s, p + "blockInterval");
    c.params.genesis_time = field<std::int64_t>(j, "genesisTime", c.params.genesis_time, p + "genesisTime");
    if (j.contains("sporks")) {
        for (const auto& s : j["sporks"]) {
            chain::SporkEntry e;
            e.start = field<Height>(s, "start", 0, p + "sporks[].start");
            if (s.contains("end") && !s["end"].is_null()) e.end = s["end"].get<Height>();
            e.endpoint_id = field<std::string>(s, "endpoint", "", p + "sporks[].endpoint");
            c.sporks.push_back(std::move(e));
        }
    }
    if (j.contains("generator") && !j["generator"].is_null()) c.generator = j["generator"].get<chain::BlockGenerator>();
    return c;
}

json chain_config_to_json(const ChainConfig& c) {
    json j = {{"chainId", c.params.chain_id},
              {"maxBatch", c.params.max_batch},
              {"confirmationDepth", c.params.confirmation_depth},
              {"sporked", c.params.sporked},
              {"blockInterval", c.params.block_interval_s},
              {"genesisTime", c.params.genesis_time}};
    if (!c.sporks.empty()) {
        auto sporks = json::array();
        for (const auto& s : c.sporks) {
            sporks.push_back({{"start", s.start},
                              {"end", s.end ? json(*s.end) : json(nullptr)},
                              {"endpoint", s.endpoint_id}});
        }
        j["sporks"] = std::move(sporks);
    }
    if (c.generator) j["generator"] = *c.generator;
    return j;
}

ServiceConfig config_from_json(const json& j) {
    reject_unknown(j,
                   {"chains", "scheduler", "dataDir", "storePath", "queuePath", "retry", "http", "metrics", "fsync",
                    "seed", "simulation"},
                   "");
    ServiceConfig c;
    if (j.contains("chains")) {
        if (!j["chains"].is_array()) bad_field("chains", "must be an array");
        for (const auto& cj : j["chains"]) c.chains.push_back(chain_config_from_json(cj));
    }
    if (j.contains("scheduler")) {
        const auto& s = j["scheduler"];
        reject_unknown(s, {"tickMs", "workers", "partitionSize", "backfillJobsPerTick"}, "scheduler");
        c.scheduler.tick_ms = field<std::int64_t>(s, "tickMs", c.scheduler.tick_ms, "scheduler.tickMs");
        const auto workers = field<std::int64_t>(s, "workers", 4, "scheduler.workers");
        if (workers <= 0) bad_field("scheduler.workers", "must be positive");
        c.scheduler.workers = static_cast<std::size_t>(workers);
        c.scheduler.partition_size = field<Height>(s, "partitionSize", 0, "scheduler.partitionSize");
        const auto per_tick = field<std::int64_t>(s, "backfillJobsPerTick", 256, "scheduler.backfillJobsPerTick");
        if (per_tick < 0) bad_field("scheduler.backfillJobsPerTick", "must be non-negative");
        c.scheduler.backfill_jobs_per_tick = static_cast<std::size_t>(per_tick);
    }
    c.data_dir = field<std::string>(j, "dataDir", c.data_dir.string(), "dataDir");
    c.store_path = field<std::string>(j, "storePath", "", "storePath");
    c.queue_path = field<std::string>(j, "queuePath", "", "queuePath");
    if (j.contains("retry")) {
        const auto& r = j["retry"];
        reject_unknown(r, {"jobs", "delivery"}, "retry");
        try {
            if (r.contains("jobs")) c.job_retry = r["jobs"].get<RetryPolicy>();
            if (r.contains("delivery")) c.delivery_retry = r["delivery"].get<RetryPolicy>();
        } catch (const Error& e) {
            bad_field("retry", e.what());
        }
    }
    if (j.contains("http")) {
        reject_unknown(j["http"], {"bind"}, "http");
        c.http_bind = field<std::string>(j["http"], "bind", c.http_bind, "http.bind");
    }
    if (j.contains("metrics")) {
        reject_unknown(j["metrics"], {"bind"}, "metrics");
        c.metrics_bind = field<std::string>(j["metrics"], "bind", "", "metrics.bind");
    }
    c.fsync = field<bool>(j, "fsync", c.fsync, "fsync");
    c.seed = field<std::uint64_t>(j, "seed", c.seed, "seed");
    if (j.contains("simulation")) {
        reject_unknown(j["simulation"], {"initialHeight"}, "simulation");
        c.simulation.initial_height = field<Height>(j["simulation"], "initialHeight", 0, "simulation.initialHeight");
    }
    return c;
}

json config_to_json(const ServiceConfig& c) {
    auto chains = json::array();
    for (const auto& ch : c.chains) chains.push_back(chain_config_to_json(ch));
    return {{"chains", chains},
            {"scheduler",
             {{"tickMs", c.scheduler.tick_ms},
              {"workers", c.scheduler.workers},
              {"partitionSize", c.scheduler.partition_size},
              {"backfillJobsPerTick", c.scheduler.backfill_jobs_per_tick}}},
            {"dataDir", c.data_dir.string()},
            {"storePath", c.store_path.string()},
            {"queuePath", c.queue_path.string()},
            {"retry", {{"jobs", c.job_retry}, {"delivery", c.delivery_retry}}},
            {"http", {{"bind", c.http_bind}}},
            {"metrics", {{"bind", c.metrics_bind}}},
            {"fsync", c.fsync},
            {"seed", c.seed},
            {"simulation", {{"initialHeight", c.simulation.initial_height}}}};
}

ServiceConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::invalid_argument, "cannot read config file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(Errc::invalid_argument, "config file " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

std::pair<std::string, int> parse_bind(const std::string& bind, const std::string& name) {
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos || colon == 0) bad_field(name, "must be host:port");
    int port = 0;
    try {
        port = std::stoi(bind.substr(colon + 1));
    } catch (const std::exception&) {
        bad_field(name, "has a non-numeric port");
    }
    if (port < 0 || port > 65535) bad_field(name, "port out of range");
    return {bind.substr(0, colon), port};
}

void validate(ServiceConfig& c) {
    std::set<std::string> ids;
    for (const auto& ch : c.chains) {
        const auto& id = ch.params.chain_id;
        if (id.empty()) bad_field("chains[].chainId", "must not be empty");
        if (!ids.insert(id).second) bad_field("chains[" + id + "].chainId", "is duplicated");
        if (ch.params.max_batch <= 0) bad_field("chains[" + id + "].maxBatch", "must be positive");
        if (ch.params.confirmation_depth < 0) bad_field("chains[" + id + "].confirmationDepth", "must be non-negative");
        if (ch.params.block_interval_s <= 0) bad_field("chains[" + id + "].blockInterval", "must be positive");
        if (ch.params.sporked) {
            try {
                chain::validate(ch.sporks);
            } catch (const Error& e) {
                bad_field("chains[" + id + "].sporks", e.what());
            }
        } else if (!ch.sporks.empty()) {
            bad_field("chains[" + id + "].sporks", "given for a chain that is not sporked");
        }
    }
    if (c.scheduler.tick_ms <= 0) bad_field("scheduler.tickMs", "must be positive");
    if (c.scheduler.workers == 0) bad_field("scheduler.workers", "must be positive");
    if (c.scheduler.partition_size < 0) bad_field("scheduler.partitionSize", "must be non-negative");
    if (c.simulation.initial_height < 0) bad_field("simulation.initialHeight", "must be non-negative");
    parse_bind(c.http_bind, "http.bind");
    if (!c.metrics_bind.empty()) parse_bind(c.metrics_bind, "metrics.bind");

    if (c.data_dir.empty()) bad_field("dataDir", "must not be empty");
    if (c.store_path.empty()) c.store_path = c.data_dir / "store";
    if (c.queue_path.empty()) c.queue_path = c.data_dir / "queue";
    const std::pair<const char*, std::filesystem::path*> dirs[] = {
        {"dataDir", &c.data_dir}, {"storePath", &c.store_path}, {"queuePath", &c.queue_path}};
    for (const auto& [name, dir] : dirs) {
        std::error_code ec;
        std::filesystem::create_directories(*dir, ec);
        if (ec) bad_field(name, "cannot be created: " + ec.message());
        const auto probe = *dir / ".write-probe";
        std::ofstream out(probe);
        if (!(out << "ok")) bad_field(name, "is not writable: " + dir->string());
        out.close();
        std::filesystem::remove(probe, ec);
    }
}

}  // namespace mxsync::service
