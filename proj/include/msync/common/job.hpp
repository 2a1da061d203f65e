#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include <msync/common/types.hpp>

namespace mxsync {

enum class JobKind { regular, backfill };

/// A block-range work unit. Job ids are deterministic per (kind, scope,
/// range) so retries and restarts refer to the same job.
struct SyncJob {
    std::string job_id;
    JobKind kind{JobKind::regular};
    std::string chain_id;
    /// Registrations scanned by this job (one for planned jobs).
    std::vector<std::string> scope;
    BlockRange range;
    int attempt{1};
};

enum class JobStatus { success, failed };

enum class JobErrorKind { none, fetch, schema, persistence, checksum_mismatch, notify_mismatch, queue, cursor };

struct JobReport {
    SyncJob job;
    std::int64_t count_all_events{0};
    std::int64_t count_non_persisted{0};
    /// Registered events confirmed present in the store after the persist
    /// step, by event type. Includes records already stored by an earlier
    /// attempt, which keeps the fetch identity exact under retries.
    std::map<std::string, std::int64_t> per_type_persisted;
    std::int64_t inserted{0};
    std::int64_t duplicates{0};
    std::int64_t sent_count{0};
    JobStatus status{JobStatus::success};
    JobErrorKind error_kind{JobErrorKind::none};
    std::string error;
};

std::string to_string(JobKind k);
std::string to_string(JobStatus s);
std::string to_string(JobErrorKind k);

void to_json(nlohmann::json& j, const SyncJob& job);
void to_json(nlohmann::json& j, const JobReport& report);

}  // namespace mxsync
