// Copyright 2026 The CMA Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CMA_COMMON_CLOCK_HPP_
#define CMA_COMMON_CLOCK_HPP_

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <mutex>
#include <thread>
#include <unordered_set>

namespace cma {

/// Time source for everything that sleeps or timestamps: module loops,
/// supervisor backoff, gateway retries, the scenario injector.
///
/// Tasks that sleep on a clock must register with it so a virtual clock
/// knows when the system is quiescent. Registration is a no-op on real
/// clocks.
class Clock {
 public:
  virtual ~Clock() = default;

  /// Milliseconds since the UNIX epoch (virtual or real).
  virtual std::int64_t now_ms() = 0;

  /// Blocks until now_ms() >= wake_at_ms, or until the clock is stopped.
  /// Returns false when woken by a stop instead of by time.
  virtual bool sleep_until(std::int64_t wake_at_ms) = 0;

  virtual void register_task() {}
  virtual void unregister_task() {}

  /// Wakes every sleeper; subsequent sleeps return immediately.
  virtual void stop() = 0;
};

/// Wall-clock time, optionally accelerated: a factor of 60 makes one real
/// second count as one minute. Factor 1 is plain real time.
class RealClock final : public Clock {
 public:
  explicit RealClock(double factor = 1.0);

  std::int64_t now_ms() override;
  bool sleep_until(std::int64_t wake_at_ms) override;
  void stop() override;

 private:
  double factor_;
  std::int64_t epoch_base_ms_;
  std::chrono::steady_clock::time_point start_;
  std::mutex mutex_;
  std::condition_variable cv_;
  bool stopped_ = false;
};

/// Discrete-event virtual clock. Time advances only when every registered
/// task is blocked in sleep_until(); it then jumps to the earliest pending
/// deadline. A fixed set of per-task schedules therefore yields the same
/// sequence of virtual instants on every run, independent of OS scheduling.
class VirtualClock final : public Clock {
 public:
  /// All runs start from the same fixed epoch so that virtual timestamps
  /// are reproducible byte-for-byte across runs.
  static constexpr std::int64_t kDefaultEpochMs = 1700000000000;

  explicit VirtualClock(std::int64_t epoch_ms = kDefaultEpochMs);

  std::int64_t now_ms() override;
  bool sleep_until(std::int64_t wake_at_ms) override;
  void register_task() override;
  void unregister_task() override;
  void stop() override;

  int registered_tasks() const;

 private:
  // Advances now_ to the earliest deadline if everyone is asleep.
  // Caller holds mutex_.
  void advance_if_quiescent();

  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::int64_t now_;
  int tasks_ = 0;
  int sleeping_ = 0;
  bool stopped_ = false;
  std::multimap<std::int64_t, int> deadlines_;
  // Threads that called register_task(). A sleeper outside this set is
  // treated as a transient task for the duration of its sleep, so that
  // e.g. a test's main thread can wait for virtual time without skewing
  // the quiescence count of the module threads.
  std::unordered_set<std::thread::id> registered_;
};

}  // namespace cma

#endif  // CMA_COMMON_CLOCK_HPP_
