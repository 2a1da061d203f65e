#include <atomic>
#include <chrono>
#include <condition_variable>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <mutex>
#include <sstream>
#include <thread>

#include <pthread.h>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <msync/common/error.hpp>
#include <msync/dispatch/transport.hpp>
#include <msync/service/api.hpp>
#include <msync/service/config.hpp>
#include <msync/service/receiver.hpp>
#include <msync/service/scenario.hpp>
#include <msync/service/service.hpp>

using nlohmann::json;
namespace svc = mxsync::service;

namespace {

std::string read_input(const std::string& arg) {
    if (arg == "-") return {std::istreambuf_iterator<char>(std::cin), {}};
    if (!arg.empty() && (arg.front() == '{' || arg.front() == '[')) return arg;
    std::ifstream in(arg);
    if (!in) throw mxsync::Error(mxsync::Errc::invalid_argument, "cannot read " + arg);
    return {std::istreambuf_iterator<char>(in), {}};
}

int print_response(const svc::ApiResponse& res) {
    if (res.content_type.rfind("application/json", 0) == 0) {
        try {
            std::cout << json::parse(res.body).dump(2) << '\n';
        } catch (const json::exception&) {
            std::cout << res.body << '\n';
        }
    } else {
        std::cout << res.body;
    }
    return res.status >= 200 && res.status < 300 ? 0 : 1;
}

sigset_t termination_signals() {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    return set;
}

struct ServeFlags {
    std::string config;
    std::string data_dir;
    std::string bind;
    std::string metrics_bind;
    std::int64_t workers{0};
    std::int64_t tick_ms{0};
    bool no_fsync{false};
};

int serve(const ServeFlags& f) {
    std::string path = f.config;
    if (path.empty()) {
        if (const char* env = std::getenv(svc::kConfigEnv)) path = env;
    }
    svc::ServiceConfig cfg = path.empty() ? svc::ServiceConfig{} : svc::load_config(path);
    if (!f.data_dir.empty()) {
        cfg.data_dir = f.data_dir;
        cfg.store_path.clear();
        cfg.queue_path.clear();
    }
    if (!f.bind.empty()) cfg.http_bind = f.bind;
    if (!f.metrics_bind.empty()) cfg.metrics_bind = f.metrics_bind;
    if (f.workers != 0) {
        if (f.workers < 0) throw mxsync::Error(mxsync::Errc::invalid_argument, "config field scheduler.workers must be positive");
        cfg.scheduler.workers = static_cast<std::size_t>(f.workers);
    }
    if (f.tick_ms != 0) cfg.scheduler.tick_ms = f.tick_ms;
    if (f.no_fsync) cfg.fsync = false;

    // Signals are taken synchronously by the main thread; every thread
    // created below inherits the mask.
    const auto signals = termination_signals();
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    mxsync::SystemClock clock;
    mxsync::dispatch::HttpTransport transport;
    svc::Service service(cfg, clock, transport, {.hooks = nullptr, .wall_clock_chains = true});
    svc::ApiRouter router(service);
    const auto handler = [&router](const svc::ApiRequest& r) { return router.handle(r); };

    svc::HttpServer api(handler);
    const auto [host, port] = svc::parse_bind(service.config().http_bind, "http.bind");
    api.start(host, port);
    spdlog::info("API listening on {}:{}", host, api.port());
    std::unique_ptr<svc::HttpServer> metrics;
    if (!service.config().metrics_bind.empty()) {
        metrics = std::make_unique<svc::HttpServer>([&router](const svc::ApiRequest& r) {
            if (r.path != "/metrics") return svc::ApiResponse{404, "not found\n", "text/plain"};
            return router.handle(r);
        });
        const auto [mhost, mport] = svc::parse_bind(service.config().metrics_bind, "metrics.bind");
        metrics->start(mhost, mport);
        spdlog::info("metrics listening on {}:{}", mhost, metrics->port());
    }

    std::atomic<bool> stopping{false};
    std::mutex m;
    std::condition_variable cv;
    auto wait_for = [&](std::chrono::milliseconds d) {
        std::unique_lock lock(m);
        cv.wait_for(lock, d, [&] { return stopping.load(); });
    };
    std::thread ticker([&] {
        while (!stopping) {
            try {
                const auto report = service.tick();
                if (!report.reports.empty()) {
                    spdlog::debug("tick ran {} jobs, {} failed", report.reports.size(), report.failed);
                }
            } catch (const std::exception& e) {
                spdlog::error("tick failed: {}", e.what());
            }
            wait_for(std::chrono::milliseconds(service.config().scheduler.tick_ms));
        }
    });
    std::thread deliverer([&] {
        while (!stopping) {
            try {
                service.deliver();
            } catch (const std::exception& e) {
                spdlog::error("delivery failed: {}", e.what());
            }
            wait_for(std::chrono::milliseconds(200));
        }
    });

    int sig = 0;
    sigwait(&signals, &sig);
    spdlog::info("received signal {}, shutting down", sig);
    stopping = true;
    cv.notify_all();
    ticker.join();
    deliverer.join();
    api.stop();
    if (metrics) metrics->stop();
    spdlog::info("stopped");
    return 0;
}

svc::KillPoint parse_kill(const std::string& s) {
    svc::KillPoint k;
    const auto a = s.find(':');
    if (a == std::string::npos) throw mxsync::Error(mxsync::Errc::invalid_argument, "--kill-at expects tick:stage[:n]");
    const auto b = s.find(':', a + 1);
    k.tick = std::stoll(s.substr(0, a));
    k.stage = s.substr(a + 1, b == std::string::npos ? std::string::npos : b - a - 1);
    if (b != std::string::npos) k.occurrence = std::stoi(s.substr(b + 1));
    return k;
}

int run_receiver(const std::string& bind, const std::string& api_url, const std::string& name, int failure_percent,
                 const std::vector<std::string>& follow_ups, const std::string& log_path) {
    svc::Receiver::Options ro;
    ro.name = name;
    ro.failure_percent = failure_percent;
    ro.log_path = log_path;
    for (const auto& f : follow_ups) {
        // eventType:listField:queryEventType:matchColumn
        std::vector<std::string> parts;
        std::stringstream ss(f);
        std::string p;
        while (std::getline(ss, p, ':')) parts.push_back(p);
        if (parts.size() != 4) {
            throw mxsync::Error(mxsync::Errc::invalid_argument,
                                "--follow-up expects eventType:listField:queryEventType:matchColumn");
        }
        ro.follow_ups.push_back({parts[0], parts[1], parts[2], parts[3]});
    }
    const auto signals = termination_signals();
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    svc::Receiver receiver(ro, [api_url](const svc::ApiRequest& r) { return svc::http_call(api_url, r); });
    svc::HttpServer server([&receiver](const svc::ApiRequest& r) {
        if (r.method == "GET" && r.path == "/received") {
            const auto ids = receiver.notification_ids();
            return svc::ApiResponse{200,
                                    json{{"version", 1},
                                         {"notifications", ids},
                                         {"requests", receiver.requests()},
                                         {"rejected", receiver.rejected()},
                                         {"followUps", receiver.follow_ups().size()}}
                                        .dump(),
                                    "application/json"};
        }
        if (r.method != "POST") return svc::ApiResponse{404, "{}", "application/json"};
        const auto res = receiver.handle(r.path, r.body, {});
        return svc::ApiResponse{res.status, "{}", "application/json"};
    });
    const auto [host, port] = svc::parse_bind(bind, "--bind");
    server.start(host, port);
    spdlog::info("receiver {} listening on {}:{}", name, host, server.port());
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"msync: multi-chain event syncer"};
    app.require_subcommand(1);
    std::string api_url = "http://127.0.0.1:8787";
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error");

    ServeFlags serve_flags;
    auto* serve_cmd = app.add_subcommand("serve", "run the syncer with its HTTP API");
    serve_cmd->add_option("-c,--config", serve_flags.config, "config file (default: $MSYNC_CONFIG)");
    serve_cmd->add_option("--data-dir", serve_flags.data_dir, "overrides dataDir");
    serve_cmd->add_option("--bind", serve_flags.bind, "overrides http.bind (host:port)");
    serve_cmd->add_option("--metrics-bind", serve_flags.metrics_bind, "overrides metrics.bind");
    serve_cmd->add_option("--workers", serve_flags.workers, "overrides scheduler.workers");
    serve_cmd->add_option("--tick-ms", serve_flags.tick_ms, "overrides scheduler.tickMs");
    serve_cmd->add_flag("--no-fsync", serve_flags.no_fsync, "skip fsync on journal appends");

    std::string chain_id, contract, signature, schema_file, registration, hook_url, spec, scenario_file, data_dir,
        kill_at, bind = "127.0.0.1:9797", name = "receiver", receiver_log;
    std::int64_t init = 0, from = 0, to = 0;
    int failure_percent = 0;
    bool json_out = false;
    std::vector<std::string> follow_ups;

    auto* reg_cmd = app.add_subcommand("register", "register an event of interest");
    reg_cmd->add_option("--url", api_url, "service API base url");
    reg_cmd->add_option("--chain", chain_id)->required();
    reg_cmd->add_option("--contract", contract)->required();
    reg_cmd->add_option("--signature", signature)->required();
    reg_cmd->add_option("--init", init, "initBlockHeight")->required();
    reg_cmd->add_option("--schema", schema_file, "mapping schema JSON file, '-' or inline JSON")->required();

    auto* sub_cmd = app.add_subcommand("subscribe", "subscribe a webhook to a registration");
    sub_cmd->add_option("--url", api_url, "service API base url");
    sub_cmd->add_option("--registration", registration)->required();
    sub_cmd->add_option("--hook", hook_url, "webhook URL")->required();

    auto* query_cmd = app.add_subcommand("query", "run a QuerySpec against the event store");
    query_cmd->add_option("--url", api_url, "service API base url");
    query_cmd->add_option("spec", spec, "QuerySpec JSON file, '-' or inline JSON")->required();

    auto* bf_cmd = app.add_subcommand("backfill-status", "show backfill progress of a registration");
    bf_cmd->add_option("--url", api_url, "service API base url");
    bf_cmd->add_option("registration", registration)->required();

    auto* fetch_cmd = app.add_subcommand("fetch", "one-shot spork-aware range fetch");
    fetch_cmd->add_option("--url", api_url, "service API base url");
    fetch_cmd->add_option("--chain", chain_id)->required();
    fetch_cmd->add_option("--from", from)->required();
    fetch_cmd->add_option("--to", to)->required();

    auto* sc_cmd = app.add_subcommand("scenario", "run a deterministic scenario on a virtual clock");
    sc_cmd->add_option("file", scenario_file)->required();
    sc_cmd->add_option("--data-dir", data_dir, "state directory; an interrupted run there is resumed")->required();
    sc_cmd->add_option("--kill-at", kill_at, "SIGKILL at tick:stage[:occurrence]");
    sc_cmd->add_flag("--json", json_out, "print the report as JSON");

    auto* recv_cmd = app.add_subcommand("receiver", "test webhook receiver");
    recv_cmd->add_option("--bind", bind, "listen address host:port");
    recv_cmd->add_option("--api", api_url, "service API base url for follow-up queries");
    recv_cmd->add_option("--name", name);
    recv_cmd->add_option("--failure-percent", failure_percent)->check(CLI::Range(0, 100));
    recv_cmd->add_option("--follow-up", follow_ups, "eventType:listField:queryEventType:matchColumn");
    recv_cmd->add_option("--log", receiver_log, "append accepted ids to this file");

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(spdlog::level::from_str(log_level));

    try {
        if (*serve_cmd) return serve(serve_flags);
        if (*reg_cmd) {
            json body = {{"chainId", chain_id},
                         {"contractAddress", contract},
                         {"eventSignature", signature},
                         {"initBlockHeight", init},
                         {"mappingSchema", json::parse(read_input(schema_file))}};
            return print_response(svc::http_call(api_url, {"POST", "/v1/registrations", {}, body.dump()}));
        }
        if (*sub_cmd) {
            json body = {{"registrationId", registration}, {"url", hook_url}};
            return print_response(svc::http_call(api_url, {"POST", "/v1/subscriptions", {}, body.dump()}));
        }
        if (*query_cmd) return print_response(svc::http_call(api_url, {"POST", "/v1/query", {}, read_input(spec)}));
        if (*bf_cmd) {
            return print_response(
                svc::http_call(api_url, {"GET", "/v1/registrations/" + registration + "/backfill", {}, {}}));
        }
        if (*fetch_cmd) {
            json body = {{"chainId", chain_id}, {"from", from}, {"to", to}};
            return print_response(svc::http_call(api_url, {"POST", "/v1/fetch", {}, body.dump()}));
        }
        if (*sc_cmd) {
            svc::ScenarioOptions opts;
            opts.data_dir = data_dir;
            if (!kill_at.empty()) opts.kill = parse_kill(kill_at);
            const auto report = svc::run_scenario(svc::load_scenario(scenario_file), opts);
            if (json_out) {
                std::cout << svc::report_to_json(report).dump(2) << '\n';
            } else {
                std::cout << svc::format_report(report);
            }
            return report.passed ? 0 : 1;
        }
        if (*recv_cmd) return run_receiver(bind, api_url, name, failure_percent, follow_ups, receiver_log);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
