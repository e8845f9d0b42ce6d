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

#ifndef CMA_HARNESS_SCENARIO_HPP_
#define CMA_HARNESS_SCENARIO_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace cma::harness {

/// One scripted environment action, applied at its virtual time.
struct Event {
  enum class Kind {
    kSensorWrite,         // channel + text
    kUserUtterance,       // text (+ optional target module)
    kKillModule,          // module
    kNetworkDropAdapter,  // no fields
    kAssertion,           // predicate_id + params
  };

  Kind kind = Kind::kSensorWrite;
  std::int64_t at_ms = 0;
  std::string channel;
  std::string text;
  std::string module;
  std::string predicate_id;
  std::map<std::string, std::string> params;
};

/// A deterministic desk-scale deployment: scripted inputs, faults, and
/// in-script assertions against one agent definition.
struct ScenarioScript {
  std::int64_t duration_ms = 0;
  std::uint64_t seed = 0;
  /// Rule file for the scripted gateway; empty defers to the agent
  /// definition's gateway settings. Relative to the scenario file.
  std::string gateway_rules;
  /// A gap without user utterances longer than this flips the
  /// "interaction_mode" channel to self-improvement (0 disables).
  std::int64_t silence_timeout_ms = 60000;
  std::vector<Event> events;  // Non-decreasing at_ms, all <= duration_ms.
};

/// Parses scenario JSON. `origin` names the source in errors. Throws
/// ParseError; for malformed JSON the error carries the 1-based line of
/// the syntax error, for semantic problems it names the JSON path.
ScenarioScript parse_scenario(const std::string& json_text,
                              const std::string& origin);

/// Reads and parses a scenario file; resolves gateway_rules against the
/// file's directory. Throws ConfigError when unreadable, ParseError as
/// parse_scenario.
ScenarioScript load_scenario(const std::string& path);

const char* event_kind_name(Event::Kind kind);

}  // namespace cma::harness

#endif  // CMA_HARNESS_SCENARIO_HPP_
