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

#ifndef CMA_HARNESS_PREDICATES_HPP_
#define CMA_HARNESS_PREDICATES_HPP_

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cma/bus/bus.hpp"
#include "cma/config/agent_config.hpp"
#include "cma/harness/scenario.hpp"
#include "cma/memory/store.hpp"
#include "cma/runtime/runtime.hpp"
#include "cma/runtime/timeline.hpp"

namespace cma::harness {

/// Forwarding store decorator that remembers which ids were stored with
/// which tags and which ids were actually removed, so scripted runs can
/// assert deletion safety without reaching into module state.
class TrackingMemory final : public cma::memory::Memory {
 public:
  explicit TrackingMemory(cma::memory::Memory& inner) : inner_(inner) {}

  std::vector<double> embed(const std::string& text) override;
  std::string store(const std::string& text, const std::string& source_module,
                    const std::set<std::string>& tags = {}) override;
  std::vector<cma::memory::QueryHit> query(const std::string& text,
                                           std::size_t k) override;
  std::vector<cma::memory::MemoryRecord> recent(std::size_t n) override;
  std::size_t remove(const std::vector<std::string>& ids) override;
  std::size_t count() override;
  std::optional<cma::memory::MemoryRecord> latest_from(
      const std::string& source_module) override;
  std::optional<cma::memory::MemoryRecord> latest_tagged(
      const std::string& tag) override;

  std::map<std::string, std::set<std::string>> stored_tags() const;
  std::set<std::string> removed_ids() const;

 private:
  cma::memory::Memory& inner_;
  mutable std::mutex mutex_;
  std::map<std::string, std::set<std::string>> stored_tags_;
  std::set<std::string> removed_ids_;
};

/// Outcome of one in-script assertion.
struct AssertionResult {
  std::string predicate_id;
  std::int64_t at_ms = 0;
  bool pass = false;
  std::string detail;
};

/// Read-only view of the running agent handed to predicate evaluation.
struct PredicateContext {
  const config::AgentConfig* config = nullptr;
  cma::runtime::Runtime* runtime = nullptr;
  cma::memory::Memory* memory = nullptr;
  bus::Bus* bus = nullptr;
  cma::runtime::TimelineRecorder* timeline = nullptr;
  const TrackingMemory* tracking = nullptr;
  std::int64_t start_ms = 0;
  std::int64_t now_ms = 0;
};

/// Evaluates one assertion event. Known predicate ids:
///   tick_liveness    params: window_intervals (default 10), exclude
///                    (comma-separated names) — every always-on periodic
///                    module has >=1 step in every full window.
///   fail_restart     params: module, min (default 1) — fail events and
///                    restart events each >= min, first fail precedes
///                    first restart.
///   toggle_pairs     params: module, min (default 2) — complete
///                    activate/deactivate pairs (the smaller of the two
///                    event counts) >= min.
///   toggle_spread    params: min_toggles (default 2), min_modules
///                    (default 3) — at least min_modules controlled
///                    modules have >= min_toggles toggle events
///                    (activations plus deactivations).
///   min_step_events  params: module, min — step+output events >= min.
///   min_output_events params: module, min — output events >= min.
///   live_count_max   params: max — memory count <= max.
///   memory_min_count params: min — memory count >= min.
///   tag_never_deleted params: tag — no removed id was stored with tag.
///   counters_conserved — published == delivered + dropped (the runner
///                    defers this one to after shutdown).
/// Unknown ids fail with an explanatory detail.
AssertionResult evaluate_predicate(const Event& event,
                                   const PredicateContext& ctx);

}  // namespace cma::harness

#endif  // CMA_HARNESS_PREDICATES_HPP_
