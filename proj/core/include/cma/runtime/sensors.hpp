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

#ifndef CMA_RUNTIME_SENSORS_HPP_
#define CMA_RUNTIME_SENSORS_HPP_

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace cma::runtime {

/// Latest-value sensor channels: the interface between the environment
/// (hardware proxies, scenario injections, operators) and module inputs.
/// Each write bumps a per-channel sequence number so consumers can ask for
/// only values they have not seen yet.
class SensorBoard {
 public:
  struct Value {
    std::string text;
    std::uint64_t seq = 0;
    std::int64_t ts_ms = 0;
  };

  void write(const std::string& channel, const std::string& text,
             std::int64_t ts_ms);

  std::optional<Value> read(const std::string& channel) const;

  /// The value only if its seq is newer than `after_seq`.
  std::optional<Value> read_fresh(const std::string& channel,
                                  std::uint64_t after_seq) const;

  std::vector<std::string> channels() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, Value> values_;
};

}  // namespace cma::runtime

#endif  // CMA_RUNTIME_SENSORS_HPP_
