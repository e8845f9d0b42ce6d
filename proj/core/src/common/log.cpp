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

#include "cma/common/log.hpp"

#include <cstdio>

namespace cma {

namespace {
const char* level_name(LogLevel level) {
  switch (level) {
    case LogLevel::kDebug:
      return "DEBUG";
    case LogLevel::kInfo:
      return "INFO";
    case LogLevel::kWarn:
      return "WARN";
    case LogLevel::kError:
      return "ERROR";
  }
  return "?";
}
}  // namespace

void DiagnosticLog::log(LogLevel level, const std::string& key,
                        const std::string& text, std::int64_t ts_ms) {
  std::lock_guard lock(mutex_);
  entries_.push_back(LogEntry{ts_ms, level, key, text});
  if (level == LogLevel::kWarn || level == LogLevel::kError) {
    ++counts_[key];
  }
  if (mirror_) {
    std::fprintf(stderr, "[%s] %s: %s\n", level_name(level), key.c_str(),
                 text.c_str());
  }
}

std::size_t DiagnosticLog::count(const std::string& key) const {
  std::lock_guard lock(mutex_);
  auto it = counts_.find(key);
  return it == counts_.end() ? 0 : it->second;
}

std::vector<LogEntry> DiagnosticLog::entries() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

std::vector<LogEntry> DiagnosticLog::entries_for(const std::string& key) const {
  std::lock_guard lock(mutex_);
  std::vector<LogEntry> out;
  for (const auto& e : entries_) {
    if (e.key == key) out.push_back(e);
  }
  return out;
}

void DiagnosticLog::clear() {
  std::lock_guard lock(mutex_);
  entries_.clear();
  counts_.clear();
}

}  // namespace cma
