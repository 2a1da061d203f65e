#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace mxsync {

/// Fixed-size thread pool. run_all blocks until every task has finished and
/// rethrows the first exception raised by a task.
class WorkerPool {
  public:
    explicit WorkerPool(std::size_t workers);
    ~WorkerPool();

    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

    void run_all(std::vector<std::function<void()>> tasks);
    [[nodiscard]] std::size_t size() const noexcept { return threads_.size(); }

  private:
    void worker_main();

    std::vector<std::jthread> threads_;
    std::deque<std::function<void()>> queue_;
    std::mutex mutex_;
    std::condition_variable cv_;
    bool stopping_{false};
};

}  // namespace mxsync
