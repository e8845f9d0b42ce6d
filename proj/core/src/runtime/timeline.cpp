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

#include "cma/runtime/timeline.hpp"

namespace cma::runtime {

const char* event_kind_name(EventKind kind) {
  switch (kind) {
    case EventKind::kStep:
      return "step";
    case EventKind::kOutput:
      return "output";
    case EventKind::kFail:
      return "fail";
    case EventKind::kRestart:
      return "restart";
    case EventKind::kActivate:
      return "activate";
    case EventKind::kDeactivate:
      return "deactivate";
  }
  return "unknown";
}

std::optional<EventKind> event_kind_from_name(const std::string& name) {
  if (name == "step") return EventKind::kStep;
  if (name == "output") return EventKind::kOutput;
  if (name == "fail") return EventKind::kFail;
  if (name == "restart") return EventKind::kRestart;
  if (name == "activate") return EventKind::kActivate;
  if (name == "deactivate") return EventKind::kDeactivate;
  return std::nullopt;
}

void TimelineRecorder::append(std::int64_t ts_ms, const std::string& module,
                              EventKind kind) {
  std::lock_guard<std::mutex> lock(mutex_);
  events_.push_back(TimelineEvent{ts_ms, module, kind});
}

std::vector<TimelineEvent> TimelineRecorder::snapshot() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return events_;
}

std::size_t TimelineRecorder::size() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return events_.size();
}

}  // namespace cma::runtime
