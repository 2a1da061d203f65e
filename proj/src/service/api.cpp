#include <msync/service/api.hpp>

#include <limits>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <msync/chain/generator.hpp>
#include <msync/common/error.hpp>
#include <msync/dispatch/transport.hpp>

namespace mxsync::service {

using nlohmann::json;

namespace {

ApiResponse json_response(int status, const json& body) { return {status, body.dump(), "application/json"}; }

int status_for(Errc code) {
    switch (code) {
        case Errc::invalid_argument:
        case Errc::unknown_column:
        case Errc::malformed_cursor:
        case Errc::schema_error:
        case Errc::coercion_error:
        case Errc::malformed_payload:
        case Errc::spork_range:
        case Errc::signature_mismatch:
        case Errc::empty_chain: return 400;
        case Errc::unknown_chain:
        case Errc::unknown_endpoint:
        case Errc::unknown_registration:
        case Errc::unknown_subscription:
        case Errc::unknown_job: return 404;
        case Errc::duplicate:
        case Errc::incomplete_backfill: return 409;
        case Errc::queue_unavailable: return 503;
        case Errc::storage_io:
        case Errc::corrupt_file: return 500;
    }
    return 500;
}

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < path.size()) {
        while (i < path.size() && path[i] == '/') ++i;
        const auto j = path.find('/', i);
        if (i < path.size()) out.push_back(path.substr(i, j == std::string::npos ? std::string::npos : j - i));
        if (j == std::string::npos) break;
        i = j;
    }
    return out;
}

json parse_body(const ApiRequest& req) {
    if (req.body.empty()) return json::object();
    try {
        return json::parse(req.body);
    } catch (const json::exception& e) {
        throw Error(Errc::invalid_argument, std::string("request body is not valid JSON: ") + e.what());
    }
}

template <typename T>
T required(const json& j, const char* key) {
    if (!j.contains(key)) throw Error(Errc::invalid_argument, std::string("missing field ") + key);
    try {
        return j[key].get<T>();
    } catch (const json::exception&) {
        throw Error(Errc::invalid_argument, std::string("field ") + key + " has the wrong type");
    }
}

std::optional<std::string> param(const ApiRequest& req, const std::string& key) {
    auto it = req.params.find(key);
    if (it == req.params.end() || it->second.empty()) return std::nullopt;
    return it->second;
}

std::int64_t int_param(const ApiRequest& req, const std::string& key, std::int64_t fallback) {
    auto v = param(req, key);
    if (!v) return fallback;
    try {
        std::size_t used = 0;
        const auto n = std::stoll(*v, &used);
        if (used != v->size()) throw std::invalid_argument(key);
        return n;
    } catch (const std::exception&) {
        throw Error(Errc::invalid_argument, "query parameter " + key + " must be an integer");
    }
}

ApiResponse not_found(const ApiRequest& req) {
    return json_response(404, {{"error", {{"code", "not_found"}, {"message", req.method + " " + req.path}}}});
}

}  // namespace

ApiResponse error_response(const std::exception& e) {
    if (const auto* err = dynamic_cast<const Error*>(&e)) {
        return json_response(status_for(err->code()),
                             {{"error", {{"code", to_string(err->code())}, {"message", err->what()}}}});
    }
    if (dynamic_cast<const json::exception*>(&e) != nullptr) {
        return json_response(400, {{"error", {{"code", "invalid_argument"}, {"message", e.what()}}}});
    }
    return json_response(500, {{"error", {{"code", "internal"}, {"message", e.what()}}}});
}

ApiResponse ApiRouter::handle(const ApiRequest& request) {
    try {
        return route(request);
    } catch (const std::exception& e) {
        auto res = error_response(e);
        if (res.status >= 500) spdlog::error("{} {}: {}", request.method, request.path, e.what());
        return res;
    }
}

ApiResponse ApiRouter::route(const ApiRequest& req) {
    const auto parts = split_path(req.path);
    const auto& m = req.method;
    auto& svc = service_;

    if (parts.size() == 1 && parts[0] == "health" && m == "GET") return json_response(200, svc.health());
    if (parts.size() == 1 && parts[0] == "metrics" && m == "GET") {
        return {200, svc.metrics_text(), "text/plain; version=0.0.4"};
    }
    if (parts.size() < 2 || parts[0] != "v1") return not_found(req);
    const auto& res = parts[1];

    if (res == "registrations") {
        if (parts.size() == 2 && m == "POST") {
            const auto body = parse_body(req);
            store::MappingSchema schema;
            try {
                schema = required<json>(body, "mappingSchema").get<store::MappingSchema>();
            } catch (const json::exception& e) {
                throw Error(Errc::schema_error, std::string("mappingSchema: ") + e.what());
            }
            auto reg = svc.register_event(required<std::string>(body, "chainId"),
                                          required<std::string>(body, "contractAddress"),
                                          required<std::string>(body, "eventSignature"),
                                          required<Height>(body, "initBlockHeight"), std::move(schema));
            return json_response(201, reg);
        }
        if (parts.size() == 2 && m == "GET") {
            return json_response(200, {{"version", 1}, {"registrations", svc.registry().list_registrations(
                                                                             param(req, "chainId"))}});
        }
        if (parts.size() == 3 && m == "GET") {
            auto reg = svc.registry().find(parts[2]);
            if (!reg) throw Error(Errc::unknown_registration, "unknown registration " + parts[2]);
            return json_response(200, *reg);
        }
        if (parts.size() == 4 && parts[3] == "backfill" && m == "GET") {
            if (!svc.registry().contains(parts[2])) {
                throw Error(Errc::unknown_registration, "unknown registration " + parts[2]);
            }
            return json_response(200, svc.registry().backfill_status(parts[2]));
        }
        if (parts.size() == 4 && parts[3] == "history" && m == "GET") {
            auto out = json::array();
            for (const auto& h : svc.registry().sync_history(parts[2])) {
                out.push_back({{"range", h.range}, {"jobId", h.job_id}, {"backfill", h.backfill}});
            }
            return json_response(200, {{"version", 1}, {"history", out}});
        }
        return not_found(req);
    }

    if (res == "subscriptions") {
        if (parts.size() == 2 && m == "POST") {
            const auto body = parse_body(req);
            auto sub = svc.dispatcher().subscribe(required<std::string>(body, "registrationId"),
                                                  required<std::string>(body, "url"));
            json out = sub;
            out["secret"] = sub.secret;
            return json_response(201, out);
        }
        if (parts.size() == 2 && m == "GET") {
            return json_response(200, {{"version", 1},
                                       {"subscriptions", svc.dispatcher().subscriptions(param(req, "registrationId"))}});
        }
        if (parts.size() == 3 && m == "DELETE") {
            svc.dispatcher().unsubscribe(parts[2]);
            return json_response(200, {{"version", 1}, {"deleted", parts[2]}});
        }
        return not_found(req);
    }

    if (res == "query" && parts.size() == 2 && m == "POST") {
        store::QuerySpec spec;
        try {
            spec = parse_body(req).get<store::QuerySpec>();
        } catch (const json::exception& e) {
            throw Error(Errc::invalid_argument, std::string("malformed query spec: ") + e.what());
        }
        return json_response(200, store::query_result_to_json(svc.store().query(spec)));
    }

    if (res == "checksums") {
        if (parts.size() == 3 && parts[2] == "analytics" && m == "GET") {
            integrity::AnalyticsScope scope{param(req, "chainId"), param(req, "registrationId")};
            integrity::TimeWindow window{int_param(req, "from", 0),
                                         int_param(req, "to", std::numeric_limits<std::int64_t>::max())};
            const auto bucket = int_param(req, "bucketMs", 60'000);
            return json_response(200, svc.integrity().checksum_analytics(scope, window, bucket));
        }
        if (parts.size() == 2 && m == "GET") {
            const auto job = param(req, "jobId");
            auto out = json::array();
            for (const auto& r : svc.integrity().records()) {
                if (!job || r.job_id == *job) out.push_back(r);
            }
            return json_response(200, {{"version", 1}, {"checksums", out}});
        }
        return not_found(req);
    }

    if (res == "alarms" && parts.size() == 2 && m == "GET") {
        return json_response(200, {{"version", 1}, {"alarms", svc.integrity().alarms()}});
    }

    if (res == "fetch" && parts.size() == 2 && m == "POST") {
        const auto body = parse_body(req);
        fetcher::FetchRequest fr{required<std::string>(body, "chainId"), required<Height>(body, "from"),
                                 required<Height>(body, "to"), {}};
        if (body.contains("filter")) {
            for (const auto& f : body["filter"]) {
                fr.eoi_filter.insert({required<std::string>(f, "contractAddress"),
                                      required<std::string>(f, "eventSignature")});
            }
        }
        if (!svc.fetcher().has_chain(fr.chain_id)) throw Error(Errc::unknown_chain, "unknown chain: " + fr.chain_id);
        auto pieces = json::array();
        for (const auto& s : fetcher::split_by_sporks(fr, svc.fetcher().adapter(fr.chain_id).spork_table())) {
            pieces.push_back({{"from", s.range.from}, {"to", s.range.to}, {"endpoint", s.endpoint_id}});
        }
        return json_response(200, {{"version", 1}, {"subranges", pieces}, {"events", svc.fetcher().fetch_raw(fr)}});
    }

    if (res == "sim" && parts.size() == 4 && m == "POST") {
        const auto& chain_id = parts[2];
        const auto body = parse_body(req);
        if (!svc.simulator().has_chain(chain_id)) throw Error(Errc::unknown_chain, "unknown chain: " + chain_id);
        if (parts[3] == "mint") {
            chain::BlockHeader last;
            if (body.contains("events")) {
                last = svc.simulator().mint_block(chain_id, body["events"].get<std::vector<chain::EventSpec>>());
            } else {
                last = svc.mint_generated(chain_id, body.value("blocks", Height{1}));
            }
            return json_response(200, {{"version", 1}, {"height", last.height}, {"hash", last.block_hash}});
        }
        if (parts[3] == "reorg") {
            auto head = svc.simulator().reorg(chain_id, required<Height>(body, "depth"), body.value("extra", Height{0}));
            return json_response(200, {{"version", 1}, {"height", head.latest_height}, {"hash", head.head_hash}});
        }
    }
    return not_found(req);
}

HttpServer::HttpServer(ApiHandler handler) : handler_(std::move(handler)), server_(std::make_unique<httplib::Server>()) {
    auto forward = [this](const httplib::Request& req, httplib::Response& res) {
        ApiRequest r{req.method, req.path, {}, req.body};
        for (const auto& [k, v] : req.params) r.params[k] = v;
        auto out = handler_(r);
        res.status = out.status;
        res.set_content(out.body, out.content_type);
    };
    server_->Get(".*", forward);
    server_->Post(".*", forward);
    server_->Delete(".*", forward);
    server_->Put(".*", forward);
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::start(const std::string& host, int port) {
    if (port == 0) {
        port_ = server_->bind_to_any_port(host);
    } else {
        port_ = server_->bind_to_port(host, port) ? port : -1;
    }
    if (port_ < 0) {
        throw Error(Errc::invalid_argument, "cannot bind " + host + ":" + std::to_string(port));
    }
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
}

void HttpServer::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

ApiResponse http_call(const std::string& base_url, const ApiRequest& request) {
    auto url = dispatch::parse_url(base_url);
    if (!url) throw Error(Errc::invalid_argument, "malformed url " + base_url);
    httplib::Client client(url->scheme + "://" + url->host + ":" + std::to_string(url->port));
    client.set_connection_timeout(std::chrono::seconds(5));
    client.set_read_timeout(std::chrono::seconds(30));
    std::string path = url->path == "/" ? request.path : url->path + request.path;
    if (!request.params.empty()) {
        httplib::Params params(request.params.begin(), request.params.end());
        path = httplib::append_query_params(path, params);
    }
    httplib::Result res;
    if (request.method == "GET") {
        res = client.Get(path);
    } else if (request.method == "DELETE") {
        res = client.Delete(path);
    } else {
        res = client.Post(path, request.body, "application/json");
    }
    if (!res) {
        throw Error(Errc::invalid_argument, "request to " + base_url + " failed: " + httplib::to_string(res.error()));
    }
    return {res->status, res->body, res->get_header_value("Content-Type")};
}

}  // namespace mxsync::service
