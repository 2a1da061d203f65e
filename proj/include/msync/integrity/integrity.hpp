#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include <msync/common/append_log.hpp>
#include <msync/common/clock.hpp>
#include <msync/common/job.hpp>

namespace mxsync::integrity {

enum class Verdict { pass, fail, pending };

std::string to_string(Verdict v);

struct ChecksumRecord {
    std::string job_id;
    int attempt{1};
    JobKind kind{JobKind::regular};
    std::string chain_id;
    std::vector<std::string> scope;
    BlockRange range;
    std::int64_t count_all_events{0};
    std::int64_t count_non_persisted{0};
    std::map<std::string, std::int64_t> per_type_persisted;
    std::optional<std::int64_t> notification_sent;
    /// Notifications expected per persisted event, by type (active
    /// subscriptions at hand-off time).
    std::map<std::string, std::int64_t> fanout;
    Verdict fetch_verdict{Verdict::pending};
    Verdict notify_verdict{Verdict::pending};
    std::int64_t recorded_at{0};

    [[nodiscard]] std::int64_t persisted_total() const;
    [[nodiscard]] std::int64_t expected_notifications() const;
};

struct AlarmEvent {
    std::uint64_t id{0};
    std::string source;
    std::string kind;
    nlohmann::json detail;
    std::int64_t at{0};
};

struct AnalyticsScope {
    std::optional<std::string> chain_id;
    std::optional<std::string> registration_id;
};

/// Half-open [from_ms, to_ms) over checksum record times.
struct TimeWindow {
    std::int64_t from_ms{0};
    std::int64_t to_ms{0};
};

struct TypeSeries {
    std::string event_type;
    std::int64_t total{0};
    std::int64_t failures{0};
    std::int64_t jobs{0};
    /// (bucket start, events persisted in bucket), ascending, non-empty buckets only.
    std::vector<std::pair<std::int64_t, std::int64_t>> buckets;
};

struct Analytics {
    std::vector<TypeSeries> types;
    std::int64_t jobs{0};
    std::int64_t failures{0};
};

struct Counters {
    std::int64_t jobs_total{0};
    std::int64_t checksum_failures_total{0};
    std::int64_t alarms_total{0};
    std::map<std::string, std::int64_t> events_persisted_total;
};

void to_json(nlohmann::json& j, const ChecksumRecord& r);
void from_json(const nlohmann::json& j, ChecksumRecord& r);
void to_json(nlohmann::json& j, const AlarmEvent& a);
void to_json(nlohmann::json& j, const Analytics& a);

/// Checksum verification, persisted checksum records, and the alarm log.
///
/// Files: `<dir>/checksums.log` (framed JSON records) and `<dir>/alarms.log`
/// (one JSON object per line).
class Integrity {
  public:
    struct Options {
        bool fsync{true};
    };

    Integrity(const std::filesystem::path& dir, const Clock& clock, Options options);

    /// Fetch identity: all = nonPersisted + sum over types of persisted.
    ChecksumRecord verify_fetch_checksum(const JobReport& report);

    /// Notify identity against the latest attempt of job_id:
    /// sent = sum over types of persisted[type] * fanout[type]. Types absent
    /// from `fanout` count once each, which is the plain one-notification-per-
    /// event identity.
    ChecksumRecord verify_notify_checksum(const std::string& job_id, std::int64_t sent_count,
                                          const std::map<std::string, std::int64_t>& fanout = {});

    [[nodiscard]] Analytics checksum_analytics(const AnalyticsScope& scope, TimeWindow window,
                                               std::int64_t bucket_ms) const;

    AlarmEvent raise_alarm(const std::string& source, const std::string& kind, nlohmann::json detail);

    [[nodiscard]] std::vector<AlarmEvent> alarms() const;
    [[nodiscard]] std::vector<ChecksumRecord> records() const;
    [[nodiscard]] std::optional<ChecksumRecord> find(const std::string& job_id, int attempt) const;
    [[nodiscard]] std::optional<ChecksumRecord> latest(const std::string& job_id) const;
    /// First unused attempt number for a job id.
    [[nodiscard]] int next_attempt(const std::string& job_id) const;
    [[nodiscard]] Counters counters() const;

  private:
    using Key = std::pair<std::string, int>;

    void persist(const ChecksumRecord& record);

    const Clock& clock_;
    Options options_;
    AppendLog checksums_;
    std::filesystem::path alarm_path_;
    mutable std::shared_mutex mutex_;
    std::map<Key, ChecksumRecord> records_;
    std::map<std::string, int> latest_attempt_;
    std::vector<AlarmEvent> alarms_;
    std::uint64_t next_alarm_id_{1};
};

}  // namespace mxsync::integrity
