#include <msync/sync/engine.hpp>

#include <algorithm>
#include <set>

#include <spdlog/spdlog.h>

#include <msync/common/error.hpp>

namespace mxsync::sync {

std::int64_t compute_batch(Height synced_latest, Height chain_head, const chain::ChainParams& params) {
    return std::min<std::int64_t>(params.max_batch, chain_head - params.confirmation_depth - synced_latest);
}

std::string job_id(JobKind kind, const std::string& registration_id, BlockRange range) {
    return std::string(kind == JobKind::regular ? "r:" : "b:") + registration_id + ":" + std::to_string(range.from) +
           "-" + std::to_string(range.to);
}

std::vector<SyncJob> plan_regular_jobs(std::span<const registry::EventRegistration> registrations,
                                       const std::map<std::string, chain::ChainHead>& heads,
                                       const std::map<std::string, chain::ChainParams>& params) {
    std::vector<SyncJob> jobs;
    for (const auto& reg : registrations) {
        auto h = heads.find(reg.chain_id);
        auto p = params.find(reg.chain_id);
        if (h == heads.end() || p == params.end()) continue;
        const auto k = compute_batch(reg.synced_latest_block_height, h->second.latest_height, p->second);
        if (k <= 0) continue;
        const BlockRange range{reg.synced_latest_block_height + 1, reg.synced_latest_block_height + k};
        jobs.push_back({job_id(JobKind::regular, reg.registration_id, range), JobKind::regular, reg.chain_id,
                        {reg.registration_id}, range, 1});
    }
    return jobs;
}

std::vector<SyncJob> plan_backfill_jobs(const registry::EventRegistration& registration, Height partition_size) {
    if (partition_size <= 0) throw Error(Errc::invalid_argument, "partitionSize must be positive");
    std::vector<SyncJob> jobs;
    const Height last = registration.synced_start_block_height - 1;
    for (Height from = registration.init_block_height; from <= last; from += partition_size) {
        const BlockRange range{from, std::min(last, from + partition_size - 1)};
        jobs.push_back({job_id(JobKind::backfill, registration.registration_id, range), JobKind::backfill,
                        registration.chain_id, {registration.registration_id}, range, 1});
    }
    return jobs;
}

Engine::Engine(fetcher::Fetcher& fetcher, registry::Registry& registry, store::EventStore& store,
               integrity::Integrity& integrity, dispatch::Dispatcher& dispatcher, const Clock& clock, Options options)
    : fetcher_(fetcher), registry_(registry), store_(store), integrity_(integrity), dispatcher_(dispatcher),
      clock_(clock), options_(std::move(options)), pool_(std::max<std::size_t>(1, options_.workers)) {}

std::string Engine::retry_key(const SyncJob& job) {
    // A failed regular job may be replanned with a longer range; its retry
    // state follows the start height.
    if (job.kind == JobKind::regular) return "r:" + job.scope.front() + ":" + std::to_string(job.range.from);
    return job.job_id;
}

JobReport Engine::execute_job(SyncJob job) {
    JobReport rep;
    job.attempt = integrity_.next_attempt(job.job_id);
    rep.job = job;
    auto fail = [&rep](JobErrorKind kind, const std::string& what) {
        rep.status = JobStatus::failed;
        rep.error_kind = kind;
        rep.error = what;
        return rep;
    };

    std::vector<registry::EventRegistration> scope;
    try {
        for (const auto& id : job.scope) scope.push_back(registry_.get(id));
    } catch (const Error& e) {
        return fail(JobErrorKind::cursor, e.what());
    }
    for (const auto& r : scope) {
        if (r.halted) return fail(JobErrorKind::cursor, "registration " + r.registration_id + " is halted");
        rep.per_type_persisted[r.registration_id] = 0;
    }

    fetcher::ScopedFetch fetched;
    try {
        fetched = fetcher_.fetch_scope(job.chain_id, job.range, scope);
    } catch (const std::exception& e) {
        return fail(JobErrorKind::fetch, e.what());
    }
    rep.count_all_events = fetched.total_events;
    rep.count_non_persisted = fetched.unmatched;

    std::vector<store::MappedRecord> records;
    records.reserve(fetched.matched.size());
    try {
        for (const auto& ev : fetched.matched) {
            auto it = std::find_if(scope.begin(), scope.end(),
                                   [&](const auto& r) { return r.registration_id == ev.event_type; });
            records.push_back(store::apply_schema(ev, it->mapping_schema));
        }
    } catch (const std::exception& e) {
        return fail(JobErrorKind::schema, e.what());
    }

    try {
        const auto persisted = store_.persist(records);
        rep.inserted = persisted.inserted;
        rep.duplicates = persisted.duplicates;
    } catch (const std::exception& e) {
        return fail(JobErrorKind::persistence, e.what());
    }
    fire_stage(options_.hooks, "job_after_persist");

    for (const auto& r : records) {
        if (store_.contains(r.record_key)) ++rep.per_type_persisted[r.event_type];
    }
    integrity::ChecksumRecord check;
    try {
        check = integrity_.verify_fetch_checksum(rep);
    } catch (const std::exception& e) {
        return fail(JobErrorKind::persistence, e.what());
    }
    if (check.fetch_verdict != integrity::Verdict::pass) {
        return fail(JobErrorKind::checksum_mismatch,
                    "fetch checksum mismatch: " + std::to_string(rep.count_all_events) + " fetched, " +
                        std::to_string(rep.count_non_persisted) + " unregistered, " +
                        std::to_string(check.persisted_total()) + " persisted");
    }
    fire_stage(options_.hooks, "job_after_checksum");

    dispatch::EnqueueResult enq;
    try {
        enq = dispatcher_.enqueue_notifications(job.job_id, records);
    } catch (const std::exception& e) {
        return fail(JobErrorKind::queue, e.what());
    }
    rep.sent_count = enq.sent_count;
    fire_stage(options_.hooks, "job_after_enqueue");

    check = integrity_.verify_notify_checksum(job.job_id, enq.sent_count, enq.fanout);
    if (check.notify_verdict != integrity::Verdict::pass) {
        return fail(JobErrorKind::notify_mismatch, "notify checksum mismatch: " + std::to_string(enq.sent_count) +
                                                       " enqueued, " + std::to_string(check.expected_notifications()) +
                                                       " expected");
    }
    fire_stage(options_.hooks, "job_before_cursor");

    try {
        if (job.kind == JobKind::regular) {
            const auto hash = fetcher_.block_hash(job.chain_id, job.range.to);
            if (!hash) return fail(JobErrorKind::cursor, "block " + std::to_string(job.range.to) + " vanished");
            for (const auto& r : scope) {
                registry_.advance_latest({r.registration_id, job.range.from, job.range.to, *hash, job.job_id});
            }
        } else {
            for (const auto& r : scope) registry_.mark_partition_done(r.registration_id, job.range, job.job_id);
        }
    } catch (const std::exception& e) {
        return fail(JobErrorKind::cursor, e.what());
    }
    fire_stage(options_.hooks, "job_done");
    return rep;
}

std::map<std::string, chain::ChainParams> Engine::effective_params() const {
    std::map<std::string, chain::ChainParams> out;
    for (const auto& id : fetcher_.chains()) {
        auto p = fetcher_.chain_params(id);
        if (options_.batch_policy) p.max_batch = std::max<std::int64_t>(1, options_.batch_policy(id, p.max_batch));
        out[id] = p;
    }
    return out;
}

std::vector<std::string> Engine::probe_deep_reorgs() {
    std::vector<std::string> halted;
    for (const auto& reg : registry_.list_registrations()) {
        if (reg.halted || reg.synced_latest_block_height < 0 || reg.latest_block_hash.empty()) continue;
        std::optional<std::string> now_hash;
        try {
            now_hash = fetcher_.block_hash(reg.chain_id, reg.synced_latest_block_height);
        } catch (const Error&) {
            continue;
        }
        if (now_hash == reg.latest_block_hash) continue;
        const std::string reason = "block " + std::to_string(reg.synced_latest_block_height) + " on " + reg.chain_id +
                                   " changed after sync: stored " + reg.latest_block_hash + ", chain " +
                                   now_hash.value_or("<missing>");
        registry_.halt(reg.registration_id, reason);
        integrity_.raise_alarm("sync", "deep_reorg",
                               {{"registrationId", reg.registration_id},
                                {"chainId", reg.chain_id},
                                {"height", reg.synced_latest_block_height},
                                {"storedHash", reg.latest_block_hash},
                                {"chainHash", now_hash ? nlohmann::json(*now_hash) : nlohmann::json(nullptr)}});
        halted.push_back(reg.registration_id);
    }
    return halted;
}

std::vector<SyncJob> Engine::plan_at(std::int64_t now, bool respect_backoff) const {
    const auto params = effective_params();
    std::map<std::string, chain::ChainHead> heads;
    for (const auto& [id, _] : params) {
        if (auto h = fetcher_.chain_head(id)) heads[id] = *h;
    }
    std::vector<registry::EventRegistration> active;
    for (auto& r : registry_.list_registrations()) {
        if (!r.halted) active.push_back(std::move(r));
    }

    std::vector<SyncJob> candidates = plan_regular_jobs(active, heads, params);
    std::size_t backfills = 0;
    for (const auto& reg : active) {
        if (reg.synced_start_block_height <= reg.init_block_height) continue;
        const auto status = registry_.backfill_status(reg.registration_id);
        for (auto& job : plan_backfill_jobs(reg, reg.partition_size)) {
            const bool pending = std::any_of(status.missing.begin(), status.missing.end(), [&](const BlockRange& m) {
                return m.from <= job.range.to && job.range.from <= m.to;
            });
            if (!pending) continue;
            if (options_.backfill_jobs_per_tick > 0 && backfills >= options_.backfill_jobs_per_tick) break;
            ++backfills;
            candidates.push_back(std::move(job));
        }
    }

    std::lock_guard lock(mutex_);
    std::vector<SyncJob> jobs;
    for (auto& job : candidates) {
        const auto key = retry_key(job);
        if (parked_.contains(key)) continue;
        if (respect_backoff) {
            auto it = retries_.find(key);
            if (it != retries_.end() && it->second.next_due_ms > now) continue;
        }
        jobs.push_back(std::move(job));
    }
    return jobs;
}

std::vector<SyncJob> Engine::plan() const { return plan_at(clock_.now_ms(), false); }

void Engine::note_result(const JobReport& report) {
    const auto key = retry_key(report.job);
    bool park = false;
    int failures = 0;
    {
        std::lock_guard lock(mutex_);
        if (report.status == JobStatus::success) {
            retries_.erase(key);
            return;
        }
        auto& st = retries_[key];
        failures = ++st.failures;
        if (failures >= options_.retry.max_attempts) {
            park = true;
            retries_.erase(key);
            parked_[key] = {key, report.job, report.error};
        } else {
            st.next_due_ms = clock_.now_ms() + options_.retry.backoff_ms(failures);
        }
    }
    spdlog::debug("job {} failed ({}): {}", report.job.job_id, to_string(report.error_kind), report.error);
    if (park) {
        integrity_.raise_alarm("sync", "job_parked",
                               {{"jobId", report.job.job_id},
                                {"attempts", failures},
                                {"errorKind", to_string(report.error_kind)},
                                {"error", report.error}});
    }
}

TickReport Engine::tick() {
    TickReport out;
    out.halted = probe_deep_reorgs();
    auto jobs = plan_at(clock_.now_ms(), true);

    out.reports.resize(jobs.size());
    std::vector<std::function<void()>> tasks;
    tasks.reserve(jobs.size());
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        tasks.emplace_back([this, &jobs, &out, i] { out.reports[i] = execute_job(std::move(jobs[i])); });
    }
    pool_.run_all(std::move(tasks));

    for (const auto& r : out.reports) {
        note_result(r);
        if (r.status == JobStatus::failed) ++out.failed;
    }

    for (const auto& reg : registry_.list_registrations()) {
        if (reg.halted || reg.synced_start_block_height <= reg.init_block_height) continue;
        if (!registry_.backfill_status(reg.registration_id).missing.empty()) continue;
        registry_.complete_backfill(reg.registration_id);
        out.backfills_completed.push_back(reg.registration_id);
        fire_stage(options_.hooks, "backfill_complete");
    }
    return out;
}

bool Engine::caught_up() const {
    {
        std::lock_guard lock(mutex_);
        if (!retries_.empty()) return false;
    }
    return plan_at(clock_.now_ms(), false).empty();
}

std::vector<ParkedJob> Engine::parked() const {
    std::lock_guard lock(mutex_);
    std::vector<ParkedJob> out;
    for (const auto& [_, p] : parked_) out.push_back(p);
    return out;
}

}  // namespace mxsync::sync
