#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <msync/common/append_log.hpp>
#include <msync/common/types.hpp>

namespace mxsync::dispatch {

enum class NotificationState { pending, delivered, dead };

std::string to_string(NotificationState s);

struct Notification {
    std::string notification_id;
    std::string topic;  ///< registration id
    std::string subscription_id;
    EventId record_key;
    std::string payload;
    int attempts{0};
    NotificationState state{NotificationState::pending};
    std::int64_t next_due_ms{0};
    std::uint64_t seq{0};
    std::string last_error;
};

/// Durable notification queue on a single append log.
///
/// Frames are JSON objects tagged by "op": enq (new entry), attempt (failed
/// delivery, new attempt count and due time), ack (delivered), dead. Entry ids
/// stay known after acknowledgment so a replayed enqueue is ignored.
class NotificationQueue {
  public:
    struct Options {
        bool fsync{true};
        /// Compact on open once at least this many entries are final.
        std::size_t compact_threshold{4096};
    };

    NotificationQueue(const std::filesystem::path& path, Options options);

    /// Appends entries whose ids are unknown. Returns how many of the given
    /// ids are present afterwards (new and previously enqueued).
    std::int64_t enqueue(std::span<const Notification> entries);

    /// Pending entries due at `now`, grouped by subscription, each group in
    /// enqueue order.
    [[nodiscard]] std::map<std::string, std::vector<Notification>> due(std::int64_t now) const;

    void ack(const std::string& notification_id);
    void record_failure(const std::string& notification_id, int attempts, std::int64_t next_due_ms,
                        const std::string& error);
    void mark_dead(const std::string& notification_id, int attempts, const std::string& error);

    [[nodiscard]] bool contains(const std::string& notification_id) const;
    [[nodiscard]] std::optional<Notification> get(const std::string& notification_id) const;
    [[nodiscard]] std::int64_t count(NotificationState state) const;
    /// Earliest due time among pending entries.
    [[nodiscard]] std::optional<std::int64_t> next_due() const;

    /// Rewrites the log keeping pending entries in full and final entries as
    /// id-only tombstones.
    void compact();

  private:
    void apply(std::string_view frame);

    Options options_;
    AppendLog log_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, Notification> entries_;
    std::map<std::uint64_t, std::string> pending_by_seq_;
    std::uint64_t next_seq_{1};
};

}  // namespace mxsync::dispatch
