#pragma once

#include <chrono>
#include <cstdint>
#include <mutex>

namespace petastore {

// Simulated time. Microsecond resolution, epoch at simulation start.
struct SimClockTag {
  using rep = std::int64_t;
  using period = std::micro;
  using duration = std::chrono::microseconds;
  using time_point = std::chrono::time_point<SimClockTag>;
  static constexpr bool is_steady = true;
};

using SimDuration = std::chrono::microseconds;
using SimTime = SimClockTag::time_point;

constexpr SimTime sim_time_from_us(std::int64_t us) { return SimTime(SimDuration(us)); }
constexpr std::int64_t to_us(SimTime t) { return t.time_since_epoch().count(); }
constexpr std::int64_t to_us(SimDuration d) { return d.count(); }
constexpr SimTime kSimEpoch{};

inline constexpr SimDuration seconds(double s) {
  return SimDuration(static_cast<std::int64_t>(s * 1e6));
}
inline constexpr double to_seconds(SimDuration d) { return static_cast<double>(d.count()) / 1e6; }

class Clock {
 public:
  virtual ~Clock() = default;
  virtual SimTime now() const = 0;
};

// Clock advanced explicitly by its owner; the harness event loop and tests use it.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(SimTime start = kSimEpoch) : now_(start) {}

  SimTime now() const override {
    std::lock_guard lock(mu_);
    return now_;
  }
  void set(SimTime t) {
    std::lock_guard lock(mu_);
    now_ = t;
  }
  void advance(SimDuration d) {
    std::lock_guard lock(mu_);
    now_ += d;
  }

 private:
  mutable std::mutex mu_;
  SimTime now_;
};

// Real elapsed time since construction, for the socket server mode.
class WallClock final : public Clock {
 public:
  WallClock() : start_(std::chrono::steady_clock::now()) {}

  SimTime now() const override {
    return SimTime(std::chrono::duration_cast<SimDuration>(std::chrono::steady_clock::now() - start_));
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace petastore
