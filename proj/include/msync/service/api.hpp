#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <thread>

#include <json.hpp>

#include <msync/service/service.hpp>

namespace httplib {
class Server;
}

namespace mxsync::service {

struct ApiRequest {
    std::string method;
    std::string path;
    std::map<std::string, std::string> params;
    std::string body;
};

struct ApiResponse {
    int status{200};
    std::string body;
    std::string content_type{"application/json"};
};

using ApiHandler = std::function<ApiResponse(const ApiRequest&)>;

/// Maps an exception to a status code and a JSON error body.
ApiResponse error_response(const std::exception& e);

/// Transport-independent HTTP API; served by HttpServer and called directly
/// by in-process receivers.
class ApiRouter {
  public:
    explicit ApiRouter(Service& service) : service_(service) {}

    ApiResponse handle(const ApiRequest& request);

  private:
    ApiResponse route(const ApiRequest& request);

    Service& service_;
};

/// httplib listener forwarding every request to a handler.
class HttpServer {
  public:
    explicit HttpServer(ApiHandler handler);
    ~HttpServer();

    /// Binds and starts serving on a background thread. Throws
    /// Error(invalid_argument) when the address cannot be bound.
    void start(const std::string& host, int port);
    void stop();
    [[nodiscard]] int port() const noexcept { return port_; }

  private:
    ApiHandler handler_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_{0};
};

/// Calls a remote API over HTTP; used by the CLI and the standalone receiver.
ApiResponse http_call(const std::string& base_url, const ApiRequest& request);

}  // namespace mxsync::service
