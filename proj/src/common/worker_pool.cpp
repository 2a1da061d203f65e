#include <msync/common/worker_pool.hpp>

#include <exception>
#include <latch>

namespace mxsync {

WorkerPool::WorkerPool(std::size_t workers) {
    if (workers == 0) workers = 1;
    threads_.reserve(workers);
    for (std::size_t i = 0; i < workers; ++i) threads_.emplace_back([this] { worker_main(); });
}

WorkerPool::~WorkerPool() {
    {
        std::lock_guard lock(mutex_);
        stopping_ = true;
    }
    cv_.notify_all();
}

void WorkerPool::worker_main() {
    for (;;) {
        std::function<void()> task;
        {
            std::unique_lock lock(mutex_);
            cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
            if (queue_.empty()) return;
            task = std::move(queue_.front());
            queue_.pop_front();
        }
        task();
    }
}

void WorkerPool::run_all(std::vector<std::function<void()>> tasks) {
    if (tasks.empty()) return;
    std::latch done(static_cast<std::ptrdiff_t>(tasks.size()));
    std::mutex error_mutex;
    std::exception_ptr first_error;
    {
        std::lock_guard lock(mutex_);
        for (auto& t : tasks) {
            queue_.emplace_back([&, task = std::move(t)] {
                try {
                    task();
                } catch (...) {
                    std::lock_guard elock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
                done.count_down();
            });
        }
    }
    cv_.notify_all();
    done.wait();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace mxsync
