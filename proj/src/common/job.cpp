#include <msync/common/job.hpp>

namespace mxsync {

std::string to_string(JobKind k) { return k == JobKind::regular ? "regular" : "backfill"; }

std::string to_string(JobStatus s) { return s == JobStatus::success ? "success" : "failed"; }

std::string to_string(JobErrorKind k) {
    switch (k) {
        case JobErrorKind::none: return "none";
        case JobErrorKind::fetch: return "fetch";
        case JobErrorKind::schema: return "schema";
        case JobErrorKind::persistence: return "persistence";
        case JobErrorKind::checksum_mismatch: return "checksum_mismatch";
        case JobErrorKind::notify_mismatch: return "notify_mismatch";
        case JobErrorKind::queue: return "queue";
        case JobErrorKind::cursor: return "cursor";
    }
    return "none";
}

void to_json(nlohmann::json& j, const SyncJob& job) {
    j = {{"jobId", job.job_id}, {"kind", to_string(job.kind)}, {"chainId", job.chain_id},
         {"scope", job.scope},  {"range", job.range},          {"attempt", job.attempt}};
}

void to_json(nlohmann::json& j, const JobReport& r) {
    j = {{"job", r.job},
         {"countAllEvents", r.count_all_events},
         {"countNonPersisted", r.count_non_persisted},
         {"perTypePersisted", r.per_type_persisted},
         {"inserted", r.inserted},
         {"duplicates", r.duplicates},
         {"sentCount", r.sent_count},
         {"status", to_string(r.status)},
         {"errorKind", to_string(r.error_kind)},
         {"error", r.error}};
}

}  // namespace mxsync
