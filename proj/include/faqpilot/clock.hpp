#pragma once

#include <chrono>
#include <cstdint>
#include <memory>

namespace faqpilot {

using Duration = std::chrono::nanoseconds;
/// Time elapsed since the owning clock's origin.
using Instant = std::chrono::nanoseconds;

using std::chrono::milliseconds;

inline double to_ms(Duration d) { return std::chrono::duration<double, std::milli>(d).count(); }

/// Time source for everything that waits or measures latency.
///
/// Scripted providers sleep through the clock, and the engine measures stage
/// and round latency through it, so swapping in a VirtualClock turns a replay
/// into a deterministic latency model without changing any orchestration code.
class Clock {
 public:
  virtual ~Clock() = default;

  [[nodiscard]] virtual Instant now() const = 0;
  virtual void sleep_for(Duration d) const = 0;

  /// Marks the calling thread as continuing work that started at `t`.
  /// Fan-out tasks call this first so time is inherited across threads.
  virtual void enter(Instant t) const { (void)t; }

  void sleep_until(Instant t) const {
    const auto current = now();
    if (t > current) sleep_for(t - current);
  }
};

/// Monotonic wall clock. Shared instance; origin is process start.
std::shared_ptr<const Clock> steady_clock();

/// Per-thread simulated time. sleep_for advances only the calling thread's
/// time; enter() rebases a thread onto a parent's timeline. Joining parallel
/// work is modelled by sleep_until(max child end).
class VirtualClock final : public Clock {
 public:
  VirtualClock();

  [[nodiscard]] Instant now() const override;
  void sleep_for(Duration d) const override;
  void enter(Instant t) const override;

 private:
  std::uint64_t id_;
};

}  // namespace faqpilot
