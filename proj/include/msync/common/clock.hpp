#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>

namespace mxsync {

/// Milliseconds since the Unix epoch (or since scenario start for virtual clocks).
class Clock {
  public:
    virtual ~Clock() = default;
    [[nodiscard]] virtual std::int64_t now_ms() const = 0;
};

class SystemClock final : public Clock {
  public:
    [[nodiscard]] std::int64_t now_ms() const override {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::system_clock::now().time_since_epoch())
            .count();
    }
};

/// Tick-driven clock used by scenarios and tests.
class VirtualClock final : public Clock {
  public:
    explicit VirtualClock(std::int64_t start_ms = 0) : now_(start_ms) {}

    [[nodiscard]] std::int64_t now_ms() const override { return now_.load(); }
    void set(std::int64_t ms) { now_.store(ms); }
    void advance(std::int64_t ms) { now_.fetch_add(ms); }

  private:
    std::atomic<std::int64_t> now_;
};

}  // namespace mxsync
