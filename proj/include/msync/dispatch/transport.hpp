#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mxsync::dispatch {

using Headers = std::vector<std::pair<std::string, std::string>>;

struct DeliveryResponse {
    int status{0};      ///< HTTP status; 0 when no response was received
    std::string error;  ///< transport error text when status is 0

    [[nodiscard]] bool ok() const noexcept { return status >= 200 && status < 300; }
};

class Transport {
  public:
    virtual ~Transport() = default;
    virtual DeliveryResponse post(const std::string& url, const std::string& body, const Headers& headers) = 0;
};

struct ParsedUrl {
    std::string scheme;
    std::string host;
    int port{0};
    std::string path;
};

/// http(s)://host[:port][/path]; nullopt when malformed.
std::optional<ParsedUrl> parse_url(const std::string& url);
inline bool valid_url(const std::string& url) { return parse_url(url).has_value(); }

/// Outbound webhook calls over HTTP(S).
class HttpTransport final : public Transport {
  public:
    explicit HttpTransport(int timeout_ms = 5000) : timeout_ms_(timeout_ms) {}
    DeliveryResponse post(const std::string& url, const std::string& body, const Headers& headers) override;

  private:
    int timeout_ms_;
};

/// Routes POSTs by host name to in-process handlers; unknown hosts look
/// unreachable. Used by scenarios and tests so receivers need no sockets.
class LocalTransport final : public Transport {
  public:
    using Handler = std::function<DeliveryResponse(const std::string& path, const std::string& body,
                                                   const Headers& headers)>;

    void route(const std::string& host, Handler handler);
    DeliveryResponse post(const std::string& url, const std::string& body, const Headers& headers) override;

  private:
    std::mutex mutex_;
    std::map<std::string, Handler> routes_;
};

}  // namespace mxsync::dispatch
