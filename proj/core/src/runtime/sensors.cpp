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

#include "cma/runtime/sensors.hpp"

namespace cma::runtime {

void SensorBoard::write(const std::string& channel, const std::string& text,
                        std::int64_t ts_ms) {
  std::lock_guard<std::mutex> lock(mutex_);
  Value& value = values_[channel];
  value.text = text;
  value.seq += 1;
  value.ts_ms = ts_ms;
}

std::optional<SensorBoard::Value> SensorBoard::read(
    const std::string& channel) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = values_.find(channel);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::optional<SensorBoard::Value> SensorBoard::read_fresh(
    const std::string& channel, std::uint64_t after_seq) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = values_.find(channel);
  if (it == values_.end() || it->second.seq <= after_seq) return std::nullopt;
  return it->second;
}

std::vector<std::string> SensorBoard::channels() const {
  std::lock_guard<std::mutex> lock(mutex_);
  std::vector<std::string> names;
  names.reserve(values_.size());
  for (const auto& [name, value] : values_) names.push_back(name);
  return names;
}

}  // namespace cma::runtime
