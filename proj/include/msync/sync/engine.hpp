#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <msync/chain/simulator.hpp>
#include <msync/common/clock.hpp>
#include <msync/common/faults.hpp>
#include <msync/common/job.hpp>
#include <msync/common/retry.hpp>
#include <msync/common/worker_pool.hpp>
#include <msync/dispatch/dispatcher.hpp>
#include <msync/fetcher/fetcher.hpp>
#include <msync/integrity/integrity.hpp>
#include <msync/registry/registry.hpp>
#include <msync/store/event_store.hpp>

namespace mxsync::sync {

/// K = min(mB, cL - gamma - synced). K <= 0 means no job this cycle.
std::int64_t compute_batch(Height synced_latest, Height chain_head, const chain::ChainParams& params);

std::string job_id(JobKind kind, const std::string& registration_id, BlockRange range);

/// One job per registration with K >= 1 over [synced + 1, synced + K].
/// Chains missing from `heads` or `params` produce no jobs.
std::vector<SyncJob> plan_regular_jobs(std::span<const registry::EventRegistration> registrations,
                                       const std::map<std::string, chain::ChainHead>& heads,
                                       const std::map<std::string, chain::ChainParams>& params);

/// Contiguous partitions of [init, start - 1], each at most partition_size
/// blocks, aligned to init.
std::vector<SyncJob> plan_backfill_jobs(const registry::EventRegistration& registration, Height partition_size);

/// Optional override of a chain's max batch (e.g. adapting to observed TPS).
using BatchPolicy = std::function<std::int64_t(const std::string& chain_id, std::int64_t configured_max_batch)>;

struct ParkedJob {
    std::string retry_key;
    SyncJob job;
    std::string error;
};

struct TickReport {
    std::vector<JobReport> reports;
    std::int64_t failed{0};
    std::vector<std::string> halted;
    std::vector<std::string> backfills_completed;
};

/// Plans and runs sync jobs: regular jobs at the chain tip, backfill
/// partitions below the registration point, deep-reorg probes, retries.
class Engine {
  public:
    struct Options {
        std::size_t workers{4};
        RetryPolicy retry{.base_ms = 1000, .factor = 2.0, .max_attempts = 5};
        /// Upper bound on backfill partitions started per tick; 0 = no bound.
        std::size_t backfill_jobs_per_tick{256};
        FaultHooksPtr hooks;
        BatchPolicy batch_policy;
    };

    Engine(fetcher::Fetcher& fetcher, registry::Registry& registry, store::EventStore& store,
           integrity::Integrity& integrity, dispatch::Dispatcher& dispatcher, const Clock& clock, Options options);

    /// Runs the full job pipeline once. Never throws for pipeline failures;
    /// they are reported in the JobReport.
    JobReport execute_job(SyncJob job);

    /// One scheduler cycle: probe, plan, execute in parallel, book-keep.
    TickReport tick();

    /// Jobs the next tick would run (ignoring backoff), for inspection.
    [[nodiscard]] std::vector<SyncJob> plan() const;

    /// True when no registration has work left at the current heads.
    [[nodiscard]] bool caught_up() const;
    [[nodiscard]] std::vector<ParkedJob> parked() const;
    [[nodiscard]] std::size_t workers() const noexcept { return pool_.size(); }

  private:
    struct RetryState {
        int failures{0};
        std::int64_t next_due_ms{0};
    };

    std::vector<std::string> probe_deep_reorgs();
    std::vector<SyncJob> plan_at(std::int64_t now, bool respect_backoff) const;
    std::map<std::string, chain::ChainParams> effective_params() const;
    static std::string retry_key(const SyncJob& job);
    void note_result(const JobReport& report);

    fetcher::Fetcher& fetcher_;
    registry::Registry& registry_;
    store::EventStore& store_;
    integrity::Integrity& integrity_;
    dispatch::Dispatcher& dispatcher_;
    const Clock& clock_;
    Options options_;
    WorkerPool pool_;
    mutable std::mutex mutex_;
    std::map<std::string, RetryState> retries_;
    std::map<std::string, ParkedJob> parked_;
};

}  // namespace mxsync::sync
