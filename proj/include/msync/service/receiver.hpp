#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include <msync/dispatch/transport.hpp>
#include <msync/service/api.hpp>

namespace mxsync::service {

/// On a notification of `event_type`, split the string column `list_field`
/// on commas and query `query_event_type` records whose `match_column`
/// equals each element (as an integer when the element is an integer literal).
struct FollowUp {
    std::string event_type;
    std::string list_field;
    std::string query_event_type;
    std::string match_column;
};

struct FollowUpRecord {
    std::string notification_id;
    std::string value;
    std::int64_t results{0};
};

/// Test webhook receiver: deduplicates by notification id, optionally fails
/// a deterministic share of requests, and can issue follow-up queries back to
/// the API (the reflective loop). Accepted ids and follow-ups are appended to
/// a log so the receiver survives restarts.
class Receiver {
  public:
    struct Options {
        std::string name;
        int failure_percent{0};
        std::uint64_t seed{1};
        std::vector<FollowUp> follow_ups;
        std::filesystem::path log_path;  ///< empty = in memory only
    };

    Receiver(Options options, ApiHandler api);

    dispatch::DeliveryResponse handle(const std::string& path, const std::string& body,
                                      const dispatch::Headers& headers);

    [[nodiscard]] std::set<std::string> notification_ids() const;
    /// Accepted notifications by event type.
    [[nodiscard]] std::map<std::string, std::set<std::string>> ids_by_type() const;
    [[nodiscard]] std::vector<FollowUpRecord> follow_ups() const;
    [[nodiscard]] std::int64_t requests() const;
    [[nodiscard]] std::int64_t rejected() const;
    /// Accepted deliveries including repeats of known ids.
    [[nodiscard]] std::int64_t deliveries() const;
    [[nodiscard]] const std::string& name() const noexcept { return options_.name; }

  private:
    bool should_fail(const std::string& notification_id);
    void log(const nlohmann::json& line);

    Options options_;
    ApiHandler api_;
    mutable std::mutex mutex_;
    std::ofstream log_;
    std::map<std::string, std::string> accepted_;  ///< id -> event type
    std::map<std::string, int> seen_;
    std::vector<FollowUpRecord> follow_ups_;
    std::int64_t requests_{0};
    std::int64_t rejected_{0};
    std::int64_t deliveries_{0};
};

}  // namespace mxsync::service
