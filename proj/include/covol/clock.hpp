#pragma once

#include <atomic>
#include <cstdint>

namespace covol {

/// Monotonic milliseconds. Everything time-dependent takes a Clock so tests
/// can run on simulated time.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::int64_t now_ms() const = 0;
  virtual void sleep_for_ms(std::int64_t ms) = 0;
};

class SteadyClock final : public Clock {
 public:
  std::int64_t now_ms() const override;
  void sleep_for_ms(std::int64_t ms) override;
};

/// Simulated time: sleeping advances the clock instantly.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(std::int64_t start_ms = 0) : now_(start_ms) {}

  std::int64_t now_ms() const override { return now_.load(); }
  void sleep_for_ms(std::int64_t ms) override {
    if (ms > 0) now_.fetch_add(ms);
  }
  void advance(std::int64_t ms) { sleep_for_ms(ms); }
  void set(std::int64_t ms) { now_.store(ms); }

 private:
  std::atomic<std::int64_t> now_;
};

}  // namespace covol
