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

#ifndef CMA_HARNESS_RUNNER_HPP_
#define CMA_HARNESS_RUNNER_HPP_

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cma/bus/bus.hpp"
#include "cma/bus/envelope.hpp"
#include "cma/common/log.hpp"
#include "cma/config/agent_config.hpp"
#include "cma/gateway/gateway.hpp"
#include "cma/harness/predicates.hpp"
#include "cma/harness/scenario.hpp"
#include "cma/runtime/spec.hpp"
#include "cma/runtime/timeline.hpp"

namespace cma::harness {

struct RunOptions {
  /// Virtual (discrete-event) time makes runs deterministic and instant;
  /// set false to run against the wall clock.
  bool use_virtual_clock = true;

  /// Wall-clock acceleration when use_virtual_clock is false.
  double real_clock_factor = 1.0;

  /// Where per-module JSONL logs go. Empty: the config's logging directory,
  /// or a fresh directory under the system temp path when that is empty too.
  std::string log_dir;

  /// When non-empty, this scripted-rules file trumps both the scenario's
  /// gateway_rules and the config's gateway settings.
  std::string gateway_rules_override;

  /// Honor a config bus mode of "external" by bridging to its broker.
  /// Off by default: scenario runs are self-contained.
  bool connect_external = false;

  /// Mirror diagnostics to stderr as they happen.
  bool verbose = false;
};

/// Everything observable about one finished scenario run.
struct RunReport {
  std::vector<cma::runtime::TimelineEvent> timeline;
  std::vector<AssertionResult> assertions;
  cma::bus::BusCounters counters;
  std::map<std::string, cma::runtime::ModuleStatus> final_statuses;
  std::vector<cma::bus::Envelope> operator_inbox;  // replies sent to "operator"
  std::vector<LogEntry> diagnostics;
  std::string log_dir;
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;

  bool all_assertions_passed() const;
};

/// Builds the gateway a run will talk to. `rules_override`, when non-empty,
/// names a scripted-rules file that wins over settings.rules_path. `seed`
/// fixes the http backend's retry jitter (0 draws from entropy). The
/// result is already wrapped with the configured concurrency limit.
std::unique_ptr<cma::gateway::Gateway> build_gateway(
    const cma::config::GatewaySettings& settings,
    const std::string& rules_override = {}, std::uint64_t seed = 0);

/// The script's events plus synthesized "interaction_mode" sensor writes:
/// "interactive" at each user utterance, "self-improvement" once per silent
/// gap longer than script.silence_timeout_ms (gaps measured between
/// utterances and against the run's start and end). Returns events sorted
/// by time, stably. A non-positive timeout disables synthesis.
std::vector<Event> with_silence_windows(const ScenarioScript& script);

/// Runs one scenario against one agent configuration and reports what
/// happened. Assertion events are evaluated at their scheduled instants
/// (counter-conservation ones after shutdown, where the invariant holds).
RunReport run_scenario(const ScenarioScript& script,
                       const cma::config::AgentConfig& config,
                       const RunOptions& options = {});

}  // namespace cma::harness

#endif  // CMA_HARNESS_RUNNER_HPP_
