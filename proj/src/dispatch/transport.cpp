#include <msync/dispatch/transport.hpp>

#include <regex>

#include <httplib.h>

namespace mxsync::dispatch {

std::optional<ParsedUrl> parse_url(const std::string& url) {
    static const std::regex re(R"(^(https?)://([A-Za-z0-9._\-]+)(?::([0-9]{1,5}))?(/[^\s#]*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) return std::nullopt;
    ParsedUrl out;
    out.scheme = m[1];
    out.host = m[2];
    out.port = m[3].matched ? std::stoi(m[3]) : (out.scheme == "https" ? 443 : 80);
    if (out.port <= 0 || out.port > 65535) return std::nullopt;
    out.path = m[4].matched ? std::string(m[4]) : "/";
    return out;
}

DeliveryResponse HttpTransport::post(const std::string& url, const std::string& body, const Headers& headers) {
    auto parsed = parse_url(url);
    if (!parsed) return {0, "malformed url " + url};
    httplib::Client client(parsed->scheme + "://" + parsed->host + ":" + std::to_string(parsed->port));
    client.set_connection_timeout(std::chrono::milliseconds(timeout_ms_));
    client.set_read_timeout(std::chrono::milliseconds(timeout_ms_));
    client.set_write_timeout(std::chrono::milliseconds(timeout_ms_));
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(parsed->path, h, body, "application/json");
    if (!res) return {0, httplib::to_string(res.error())};
    return {res->status, {}};
}

void LocalTransport::route(const std::string& host, Handler handler) {
    std::lock_guard lock(mutex_);
    routes_[host] = std::move(handler);
}

DeliveryResponse LocalTransport::post(const std::string& url, const std::string& body, const Headers& headers) {
    auto parsed = parse_url(url);
    if (!parsed) return {0, "malformed url " + url};
    Handler handler;
    {
        std::lock_guard lock(mutex_);
        auto it = routes_.find(parsed->host);
        if (it == routes_.end()) return {0, "connection refused: " + parsed->host};
        handler = it->second;
    }
    return handler(parsed->path, body, headers);
}

}  // namespace mxsync::dispatch
