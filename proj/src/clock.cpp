#include "faqpilot/clock.hpp"

#include <atomic>
#include <thread>
#include <unordered_map>

namespace faqpilot {
namespace {

class SteadyClock final : public Clock {
 public:
  SteadyClock() : origin_(std::chrono::steady_clock::now()) {}

  Instant now() const override {
    return std::chrono::duration_cast<Instant>(std::chrono::steady_clock::now() - origin_);
  }

  void sleep_for(Duration d) const override {
    if (d > Duration::zero()) std::this_thread::sleep_for(d);
  }

 private:
  std::chrono::steady_clock::time_point origin_;
};

std::atomic<std::uint64_t> next_virtual_id{1};

std::unordered_map<std::uint64_t, Instant>& thread_times() {
  thread_local std::unordered_map<std::uint64_t, Instant> times;
  return times;
}

}  // namespace

std::shared_ptr<const Clock> steady_clock() {
  static const auto clock = std::make_shared<SteadyClock>();
  return clock;
}

VirtualClock::VirtualClock() : id_(next_virtual_id.fetch_add(1)) {}

Instant VirtualClock::now() const {
  auto& times = thread_times();
  auto it = times.find(id_);
  return it == times.end() ? Instant::zero() : it->second;
}

void VirtualClock::sleep_for(Duration d) const {
  if (d > Duration::zero()) thread_times()[id_] += d;
}

void VirtualClock::enter(Instant t) const { thread_times()[id_] = t; }

}  // namespace faqpilot
