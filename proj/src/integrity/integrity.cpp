#include <msync/integrity/integrity.hpp>

#include <fstream>
#include <mutex>
#include <set>

#include <spdlog/spdlog.h>

#include <msync/common/error.hpp>

namespace mxsync::integrity {

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::pass: return "pass";
        case Verdict::fail: return "fail";
        case Verdict::pending: return "pending";
    }
    return "pending";
}

namespace {

Verdict verdict_from_string(const std::string& s) {
    if (s == "pass") return Verdict::pass;
    if (s == "fail") return Verdict::fail;
    return Verdict::pending;
}

}  // namespace

std::int64_t ChecksumRecord::persisted_total() const {
    std::int64_t sum = 0;
    for (const auto& [_, n] : per_type_persisted) sum += n;
    return sum;
}

std::int64_t ChecksumRecord::expected_notifications() const {
    std::int64_t sum = 0;
    for (const auto& [type, n] : per_type_persisted) {
        auto it = fanout.find(type);
        sum += n * (it == fanout.end() ? 1 : it->second);
    }
    return sum;
}

void to_json(nlohmann::json& j, const ChecksumRecord& r) {
    j = {{"jobId", r.job_id},
         {"attempt", r.attempt},
         {"kind", mxsync::to_string(r.kind)},
         {"chainId", r.chain_id},
         {"scope", r.scope},
         {"range", r.range},
         {"countAllEvents", r.count_all_events},
         {"countNonPersisted", r.count_non_persisted},
         {"perTypePersisted", r.per_type_persisted},
         {"notificationSent", r.notification_sent ? nlohmann::json(*r.notification_sent) : nlohmann::json(nullptr)},
         {"fanout", r.fanout},
         {"fetchVerdict", to_string(r.fetch_verdict)},
         {"notifyVerdict", to_string(r.notify_verdict)},
         {"recordedAt", r.recorded_at}};
}

void from_json(const nlohmann::json& j, ChecksumRecord& r) {
    j.at("jobId").get_to(r.job_id);
    j.at("attempt").get_to(r.attempt);
    r.kind = j.at("kind").get<std::string>() == "backfill" ? JobKind::backfill : JobKind::regular;
    j.at("chainId").get_to(r.chain_id);
    j.at("scope").get_to(r.scope);
    j.at("range").get_to(r.range);
    j.at("countAllEvents").get_to(r.count_all_events);
    j.at("countNonPersisted").get_to(r.count_non_persisted);
    j.at("perTypePersisted").get_to(r.per_type_persisted);
    if (!j.at("notificationSent").is_null()) r.notification_sent = j["notificationSent"].get<std::int64_t>();
    j.at("fanout").get_to(r.fanout);
    r.fetch_verdict = verdict_from_string(j.at("fetchVerdict").get<std::string>());
    r.notify_verdict = verdict_from_string(j.at("notifyVerdict").get<std::string>());
    j.at("recordedAt").get_to(r.recorded_at);
}

void to_json(nlohmann::json& j, const AlarmEvent& a) {
    j = {{"id", a.id}, {"source", a.source}, {"kind", a.kind}, {"detail", a.detail}, {"at", a.at}};
}

void to_json(nlohmann::json& j, const Analytics& a) {
    auto types = nlohmann::json::array();
    for (const auto& t : a.types) {
        auto buckets = nlohmann::json::array();
        for (const auto& [start, n] : t.buckets) buckets.push_back({{"start", start}, {"events", n}});
        types.push_back({{"eventType", t.event_type},
                         {"total", t.total},
                         {"failures", t.failures},
                         {"jobs", t.jobs},
                         {"buckets", std::move(buckets)}});
    }
    j = {{"version", 1}, {"jobs", a.jobs}, {"failures", a.failures}, {"types", std::move(types)}};
}

Integrity::Integrity(const std::filesystem::path& dir, const Clock& clock, Options options)
    : clock_(clock), options_(options), checksums_(dir / "checksums.log", {options.fsync}),
      alarm_path_(dir / "alarms.log") {
    checksums_.replay([this](std::string_view frame) {
        ChecksumRecord r;
        try {
            r = nlohmann::json::parse(frame).get<ChecksumRecord>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::corrupt_file, "unreadable checksum record in " + checksums_.path().string() + ": " +
                                                e.what());
        }
        auto& latest = latest_attempt_[r.job_id];
        latest = std::max(latest, r.attempt);
        records_[{r.job_id, r.attempt}] = std::move(r);
    });

    std::ifstream in(alarm_path_);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            AlarmEvent a{j.at("id").get<std::uint64_t>(), j.at("source").get<std::string>(),
                         j.at("kind").get<std::string>(), j.at("detail"), j.at("at").get<std::int64_t>()};
            next_alarm_id_ = std::max(next_alarm_id_, a.id + 1);
            alarms_.push_back(std::move(a));
        } catch (const nlohmann::json::exception&) {
            // torn final line from an interrupted write
            break;
        }
    }
}

void Integrity::persist(const ChecksumRecord& record) { checksums_.append(nlohmann::json(record).dump()); }

ChecksumRecord Integrity::verify_fetch_checksum(const JobReport& report) {
    ChecksumRecord r;
    r.job_id = report.job.job_id;
    r.attempt = report.job.attempt;
    r.kind = report.job.kind;
    r.chain_id = report.job.chain_id;
    r.scope = report.job.scope;
    r.range = report.job.range;
    r.count_all_events = report.count_all_events;
    r.count_non_persisted = report.count_non_persisted;
    r.per_type_persisted = report.per_type_persisted;
    r.recorded_at = clock_.now_ms();
    const bool ok = report.count_all_events == report.count_non_persisted + r.persisted_total();
    r.fetch_verdict = ok ? Verdict::pass : Verdict::fail;
    if (!ok) r.notify_verdict = Verdict::fail;

    {
        std::unique_lock lock(mutex_);
        if (records_.contains({r.job_id, r.attempt})) {
            throw Error(Errc::duplicate, "checksum already recorded for " + r.job_id + " attempt " +
                                             std::to_string(r.attempt));
        }
        persist(r);
        records_[{r.job_id, r.attempt}] = r;
        auto& latest = latest_attempt_[r.job_id];
        latest = std::max(latest, r.attempt);
    }
    if (!ok) {
        raise_alarm("fetch_checksum", "checksum_mismatch",
                    {{"jobId", r.job_id},
                     {"attempt", r.attempt},
                     {"countAllEvents", r.count_all_events},
                     {"countNonPersisted", r.count_non_persisted},
                     {"persistedSum", r.persisted_total()},
                     {"perTypePersisted", r.per_type_persisted}});
    }
    return r;
}

ChecksumRecord Integrity::verify_notify_checksum(const std::string& job_id, std::int64_t sent_count,
                                                 const std::map<std::string, std::int64_t>& fanout) {
    ChecksumRecord r;
    bool ok = false;
    {
        std::unique_lock lock(mutex_);
        auto latest = latest_attempt_.find(job_id);
        if (latest == latest_attempt_.end()) throw Error(Errc::unknown_job, "no checksum record for job " + job_id);
        auto& rec = records_.at({job_id, latest->second});
        if (rec.fetch_verdict == Verdict::pending) {
            throw Error(Errc::invalid_argument, "fetch verdict not recorded for job " + job_id);
        }
        if (rec.notify_verdict != Verdict::pending) return rec;
        rec.fanout = fanout;
        rec.notification_sent = sent_count;
        ok = sent_count == rec.expected_notifications();
        rec.notify_verdict = ok ? Verdict::pass : Verdict::fail;
        persist(rec);
        r = rec;
    }
    if (!ok) {
        raise_alarm("notify_checksum", "checksum_mismatch",
                    {{"jobId", r.job_id},
                     {"attempt", r.attempt},
                     {"notificationSent", sent_count},
                     {"expected", r.expected_notifications()},
                     {"missing", r.expected_notifications() - sent_count}});
    }
    return r;
}

Analytics Integrity::checksum_analytics(const AnalyticsScope& scope, TimeWindow window, std::int64_t bucket_ms) const {
    Analytics out;
    std::map<std::string, TypeSeries> series;
    std::map<std::string, std::map<std::int64_t, std::int64_t>> buckets;

    std::shared_lock lock(mutex_);
    for (const auto& [_, r] : records_) {
        if (r.recorded_at < window.from_ms || r.recorded_at >= window.to_ms) continue;
        if (scope.chain_id && r.chain_id != *scope.chain_id) continue;
        if (scope.registration_id &&
            std::find(r.scope.begin(), r.scope.end(), *scope.registration_id) == r.scope.end()) {
            continue;
        }
        const bool failed = r.fetch_verdict == Verdict::fail || r.notify_verdict == Verdict::fail;
        ++out.jobs;
        if (failed) ++out.failures;
        const std::int64_t bucket =
            bucket_ms > 0 ? window.from_ms + (r.recorded_at - window.from_ms) / bucket_ms * bucket_ms : window.from_ms;
        for (const auto& type : r.scope) {
            if (scope.registration_id && type != *scope.registration_id) continue;
            auto& s = series[type];
            s.event_type = type;
            ++s.jobs;
            if (failed) {
                ++s.failures;
                continue;
            }
            auto it = r.per_type_persisted.find(type);
            const std::int64_t n = it == r.per_type_persisted.end() ? 0 : it->second;
            s.total += n;
            if (n > 0) buckets[type][bucket] += n;
        }
    }
    for (auto& [type, s] : series) {
        for (const auto& [start, n] : buckets[type]) s.buckets.emplace_back(start, n);
        out.types.push_back(std::move(s));
    }
    return out;
}

AlarmEvent Integrity::raise_alarm(const std::string& source, const std::string& kind, nlohmann::json detail) {
    std::unique_lock lock(mutex_);
    AlarmEvent a{next_alarm_id_++, source, kind, std::move(detail), clock_.now_ms()};
    {
        std::ofstream out(alarm_path_, std::ios::app);
        out << nlohmann::json(a).dump() << '\n';
        out.flush();
        if (!out) throw Error(Errc::storage_io, "cannot append to " + alarm_path_.string());
    }
    alarms_.push_back(a);
    spdlog::warn("alarm {} from {}: {}", a.kind, a.source, a.detail.dump());
    return a;
}

std::vector<AlarmEvent> Integrity::alarms() const {
    std::shared_lock lock(mutex_);
    return alarms_;
}

std::vector<ChecksumRecord> Integrity::records() const {
    std::shared_lock lock(mutex_);
    std::vector<ChecksumRecord> out;
    out.reserve(records_.size());
    for (const auto& [_, r] : records_) out.push_back(r);
    return out;
}

std::optional<ChecksumRecord> Integrity::find(const std::string& job_id, int attempt) const {
    std::shared_lock lock(mutex_);
    auto it = records_.find({job_id, attempt});
    if (it == records_.end()) return std::nullopt;
    return it->second;
}

std::optional<ChecksumRecord> Integrity::latest(const std::string& job_id) const {
    std::shared_lock lock(mutex_);
    auto it = latest_attempt_.find(job_id);
    if (it == latest_attempt_.end()) return std::nullopt;
    return records_.at({job_id, it->second});
}

int Integrity::next_attempt(const std::string& job_id) const {
    std::shared_lock lock(mutex_);
    auto it = latest_attempt_.find(job_id);
    return it == latest_attempt_.end() ? 1 : it->second + 1;
}

Counters Integrity::counters() const {
    std::shared_lock lock(mutex_);
    Counters c;
    for (const auto& [_, r] : records_) {
        ++c.jobs_total;
        if (r.fetch_verdict == Verdict::fail || r.notify_verdict == Verdict::fail) ++c.checksum_failures_total;
        if (r.fetch_verdict == Verdict::pass) {
            for (const auto& [type, n] : r.per_type_persisted) c.events_persisted_total[type] += n;
        }
    }
    c.alarms_total = static_cast<std::int64_t>(alarms_.size());
    return c;
}

}  // namespace mxsync::integrity
