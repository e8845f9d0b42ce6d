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

#ifndef CMA_RUNTIME_TIMELINE_HPP_
#define CMA_RUNTIME_TIMELINE_HPP_

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace cma::runtime {

enum class EventKind { kStep, kOutput, kFail, kRestart, kActivate, kDeactivate };

const char* event_kind_name(EventKind kind);
std::optional<EventKind> event_kind_from_name(const std::string& name);

/// One dot on the activity plot: a module did something at some instant.
struct TimelineEvent {
  std::int64_t ts_ms = 0;
  std::string module;
  EventKind kind = EventKind::kStep;

  bool operator==(const TimelineEvent&) const = default;
};

/// Append-only, thread-safe event record for one run.
class TimelineRecorder {
 public:
  void append(std::int64_t ts_ms, const std::string& module, EventKind kind);
  std::vector<TimelineEvent> snapshot() const;
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::vector<TimelineEvent> events_;
};

}  // namespace cma::runtime

#endif  // CMA_RUNTIME_TIMELINE_HPP_
