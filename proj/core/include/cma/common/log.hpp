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

#ifndef CMA_COMMON_LOG_HPP_
#define CMA_COMMON_LOG_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace cma {

enum class LogLevel { kDebug, kInfo, kWarn, kError };

struct LogEntry {
  std::int64_t ts_ms;
  LogLevel level;
  std::string key;   // stable machine key, e.g. "activation.nonconforming"
  std::string text;  // human-readable message
};

/// Process-local diagnostic log. Warnings and errors are counted per key so
/// tests can assert "exactly one warning per nonconforming input" without
/// scraping stderr. Optionally mirrors to stderr.
class DiagnosticLog {
 public:
  explicit DiagnosticLog(bool mirror_to_stderr = false)
      : mirror_(mirror_to_stderr) {}

  void log(LogLevel level, const std::string& key, const std::string& text,
           std::int64_t ts_ms = 0);

  void warn(const std::string& key, const std::string& text,
            std::int64_t ts_ms = 0) {
    log(LogLevel::kWarn, key, text, ts_ms);
  }

  std::size_t count(const std::string& key) const;
  std::vector<LogEntry> entries() const;
  std::vector<LogEntry> entries_for(const std::string& key) const;
  void clear();

 private:
  mutable std::mutex mutex_;
  bool mirror_;
  std::vector<LogEntry> entries_;
  std::map<std::string, std::size_t> counts_;
};

}  // namespace cma

#endif  // CMA_COMMON_LOG_HPP_
