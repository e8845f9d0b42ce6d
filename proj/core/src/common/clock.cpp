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

#include "cma/common/clock.hpp"

#include <algorithm>
#include <chrono>

namespace cma {

RealClock::RealClock(double factor)
    : factor_(factor <= 0 ? 1.0 : factor),
      epoch_base_ms_(std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count()),
      start_(std::chrono::steady_clock::now()) {}

std::int64_t RealClock::now_ms() {
  auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                     std::chrono::steady_clock::now() - start_)
                     .count();
  return epoch_base_ms_ + static_cast<std::int64_t>(elapsed * factor_);
}

bool RealClock::sleep_until(std::int64_t wake_at_ms) {
  std::unique_lock lock(mutex_);
  for (;;) {
    if (stopped_) return false;
    std::int64_t now = now_ms();
    if (now >= wake_at_ms) return true;
    auto real_wait = std::chrono::milliseconds(
        std::max<std::int64_t>(1, static_cast<std::int64_t>(
                                      (wake_at_ms - now) / factor_)));
    cv_.wait_for(lock, real_wait);
  }
}

void RealClock::stop() {
  std::lock_guard lock(mutex_);
  stopped_ = true;
  cv_.notify_all();
}

VirtualClock::VirtualClock(std::int64_t epoch_ms) : now_(epoch_ms) {}

std::int64_t VirtualClock::now_ms() {
  std::lock_guard lock(mutex_);
  return now_;
}

void VirtualClock::register_task() {
  std::lock_guard lock(mutex_);
  registered_.insert(std::this_thread::get_id());
  ++tasks_;
}

void VirtualClock::unregister_task() {
  std::lock_guard lock(mutex_);
  registered_.erase(std::this_thread::get_id());
  --tasks_;
  advance_if_quiescent();
}

int VirtualClock::registered_tasks() const {
  std::lock_guard lock(mutex_);
  return tasks_;
}

bool VirtualClock::sleep_until(std::int64_t wake_at_ms) {
  std::unique_lock lock(mutex_);
  if (stopped_) return false;
  if (wake_at_ms <= now_) return true;
  const bool transient = registered_.count(std::this_thread::get_id()) == 0;
  if (transient) ++tasks_;
  auto entry = deadlines_.emplace(wake_at_ms, 0);
  ++sleeping_;
  advance_if_quiescent();
  cv_.wait(lock, [&] { return stopped_ || now_ >= wake_at_ms; });
  deadlines_.erase(entry);
  --sleeping_;
  if (transient) --tasks_;
  return !stopped_;
}

void VirtualClock::advance_if_quiescent() {
  if (stopped_ || sleeping_ < tasks_ || deadlines_.empty()) return;
  std::int64_t next = deadlines_.begin()->first;
  if (next > now_) {
    now_ = next;
    cv_.notify_all();
  }
}

void VirtualClock::stop() {
  std::lock_guard lock(mutex_);
  stopped_ = true;
  cv_.notify_all();
}

}  // namespace cma
