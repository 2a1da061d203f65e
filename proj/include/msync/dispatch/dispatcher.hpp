#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include <msync/common/append_log.hpp>
#include <msync/common/clock.hpp>
#include <msync/common/faults.hpp>
#include <msync/common/retry.hpp>
#include <msync/common/worker_pool.hpp>
#include <msync/dispatch/queue.hpp>
#include <msync/dispatch/transport.hpp>
#include <msync/integrity/integrity.hpp>
#include <msync/registry/registry.hpp>
#include <msync/store/schema.hpp>

namespace mxsync::dispatch {

struct WebhookSubscription {
    std::string subscription_id;
    std::string registration_id;
    std::string url;
    std::string secret;
    bool active{true};
    std::int64_t created_at{0};
};

void to_json(nlohmann::json& j, const WebhookSubscription& s);

struct EnqueueResult {
    std::int64_t sent_count{0};
    /// Active subscriptions per event type at hand-off time.
    std::map<std::string, std::int64_t> fanout;
};

struct DeliveryStats {
    std::int64_t attempted{0};
    std::int64_t delivered{0};
    std::int64_t failed{0};
    std::int64_t dead{0};
};

/// Versioned webhook body for one record and subscription. Throws
/// nlohmann::json::exception when a column cannot be serialized.
std::string notification_payload(const std::string& notification_id, const std::string& subscription_id,
                                  const store::MappedRecord& record);
std::string notification_id(const EventId& record_key, const std::string& subscription_id);

inline constexpr const char* kSignatureHeader = "X-Msync-Signature";
inline constexpr const char* kNotificationHeader = "X-Msync-Notification-Id";

/// Webhook subscriptions, the durable notification queue, and delivery.
///
/// Files under `dir`: subscriptions.log (framed journal), queue.log (see
/// NotificationQueue) and dead_letters.log (one JSON object per line).
class Dispatcher {
  public:
    struct Options {
        bool fsync{true};
        RetryPolicy retry;
        FaultHooksPtr hooks;
    };

    Dispatcher(const std::filesystem::path& dir, const registry::Registry& registry, integrity::Integrity& integrity,
               Transport& transport, const Clock& clock, Options options);

    WebhookSubscription subscribe(const std::string& registration_id, const std::string& url);
    void unsubscribe(const std::string& subscription_id);

    [[nodiscard]] std::vector<WebhookSubscription> subscriptions(
        const std::optional<std::string>& registration_id = std::nullopt, bool include_inactive = false) const;
    [[nodiscard]] std::optional<WebhookSubscription> find_subscription(const std::string& subscription_id) const;
    [[nodiscard]] std::map<std::string, std::int64_t> fanout() const;

    /// One notification per (record, active subscription of its event type).
    /// Records of types without subscribers contribute nothing.
    EnqueueResult enqueue_notifications(const std::string& job_id, std::span<const store::MappedRecord> records);

    /// Attempts every pending notification due now, one worker per
    /// subscription. Runs inline when pool is null.
    DeliveryStats deliver_due(WorkerPool* pool = nullptr);

    [[nodiscard]] const NotificationQueue& queue() const noexcept { return queue_; }
    [[nodiscard]] const RetryPolicy& retry_policy() const noexcept { return options_.retry; }
    [[nodiscard]] std::vector<nlohmann::json> dead_letters() const;

  private:
    DeliveryStats deliver_stream(const WebhookSubscription& sub, const std::vector<Notification>& batch);
    void bury(const Notification& n, int attempts, const std::string& error);

    const registry::Registry& registry_;
    integrity::Integrity& integrity_;
    Transport& transport_;
    const Clock& clock_;
    Options options_;
    AppendLog journal_;
    NotificationQueue queue_;
    std::filesystem::path dead_path_;
    mutable std::mutex mutex_;
    mutable std::mutex dead_mutex_;
    std::map<std::string, WebhookSubscription> subs_;
};

}  // namespace mxsync::dispatch
