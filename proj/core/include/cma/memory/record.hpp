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

#ifndef CMA_MEMORY_RECORD_HPP_
#define CMA_MEMORY_RECORD_HPP_

#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace cma::memory {

/// One entry of the shared global state.
struct MemoryRecord {
  std::string id;  // Zero-padded decimal; lexicographic == numeric order.
  std::string text;
  std::vector<double> embedding;  // L2-normalized, or all-zero for no tokens.
  std::string source_module;
  std::int64_t created_at_ms = 0;
  std::set<std::string> tags;

  bool operator==(const MemoryRecord&) const = default;
};

/// A similarity-query result.
struct QueryHit {
  MemoryRecord record;
  double score = 0.0;  // Cosine similarity, clamped to [-1, 1].
};

}  // namespace cma::memory

#endif  // CMA_MEMORY_RECORD_HPP_
