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

#ifndef CMA_RUNTIME_SPEC_HPP_
#define CMA_RUNTIME_SPEC_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cma::runtime {

/// How a module's loop initiates steps. Periodic modules step every
/// interval; message-driven modules poll their inbox on the same cadence
/// and step only when mail arrived; Both does each tick with whatever
/// mail is pending.
struct Trigger {
  enum class Kind { kTick, kOnMessage, kBoth };

  static constexpr std::int64_t kMinIntervalMs = 10;
  static constexpr std::int64_t kDefaultPollMs = 1000;

  Kind kind = Kind::kTick;
  std::int64_t interval_ms = kDefaultPollMs;

  static Trigger Tick(std::int64_t interval_ms) {
    return Trigger{Kind::kTick, interval_ms};
  }
  static Trigger OnMessage(std::int64_t poll_ms = kDefaultPollMs) {
    return Trigger{Kind::kOnMessage, poll_ms};
  }
  static Trigger Both(std::int64_t interval_ms) {
    return Trigger{Kind::kBoth, interval_ms};
  }
};

/// Declarative input source gathered before each behavior step.
struct InputSource {
  enum class Kind {
    kRecentMemories,   // n most recent global-state records
    kQueryMemories,    // top-k similarity hits for query_template
    kInboxMessages,    // drained envelopes (bounded per step)
    kSensorChannel,    // latest value of a named sensor channel
    kPeerOutput,       // latest global-state record from a named module
  };

  Kind kind = Kind::kRecentMemories;
  std::size_t count = 0;        // n / k
  std::string text;             // query_template / channel / module name
  bool fresh_only = false;      // Sensor channels: only unseen values.

  static InputSource RecentMemories(std::size_t n) {
    return InputSource{Kind::kRecentMemories, n, "", false};
  }
  /// The template is the query text; an "{inbox}" placeholder is replaced
  /// with the bodies drained this step, so message-driven modules can
  /// ground retrieval on what they were just told.
  static InputSource QueryMemories(std::string query_template, std::size_t k) {
    return InputSource{Kind::kQueryMemories, k, std::move(query_template),
                       false};
  }
  static InputSource InboxMessages() {
    return InputSource{Kind::kInboxMessages, 0, "", false};
  }
  static InputSource SensorChannel(std::string name, bool fresh_only = false) {
    return InputSource{Kind::kSensorChannel, 0, std::move(name), fresh_only};
  }
  static InputSource PeerOutput(std::string module_name) {
    return InputSource{Kind::kPeerOutput, 0, std::move(module_name), false};
  }
};

/// Declarative output sink a behavior may write through.
struct OutputSink {
  enum class Kind { kStoreMemory, kSendTo, kSensorChannel };

  Kind kind = Kind::kStoreMemory;
  std::string target;  // SendTo: module name or "*" (dynamic); channel name.

  static OutputSink StoreMemory() {
    return OutputSink{Kind::kStoreMemory, ""};
  }
  static OutputSink SendTo(std::string module_name) {
    return OutputSink{Kind::kSendTo, std::move(module_name)};
  }
  static OutputSink SensorChannel(std::string name) {
    return OutputSink{Kind::kSensorChannel, std::move(name)};
  }
};

enum class ActivationPolicy { kAlwaysOn, kControlled };

/// Static description of one module.
struct ModuleSpec {
  std::string name;  // Topic-safe, unique within an agent.
  std::string system_prompt;
  Trigger trigger;
  std::vector<InputSource> inputs;
  std::vector<OutputSink> outputs;
  ActivationPolicy activation_policy = ActivationPolicy::kAlwaysOn;
  std::string model_id;
  /// Controlled modules may begin life suspended.
  bool start_deactivated = false;
  /// Offset of this module's wake grid from the run start. Distinct
  /// offsets keep concurrent modules' wake instants disjoint under the
  /// virtual clock, which is what makes scenario runs replayable.
  std::int64_t phase_offset_ms = 0;
};

enum class ModuleState { kCreated, kActive, kDeactivated, kFailed, kStopped };

const char* module_state_name(ModuleState state);

/// Legal edges: Created→Active; Active↔Deactivated; Active→Failed→Active
/// (via restart); any→Stopped.
bool transition_legal(ModuleState from, ModuleState to);

struct ModuleStatus {
  ModuleState state = ModuleState::kCreated;
  int restarts = 0;
  std::optional<std::int64_t> last_output_at_ms;
  std::optional<std::string> last_error;
};

enum class ActivationDecision { kActivate, kDeactivate, kNoChange };

/// Restart discipline realizing fault isolation: capped exponential
/// backoff, with a rate limit past which a module stays Failed and an
/// operator alert is raised.
struct SupervisorPolicy {
  bool restart = true;
  std::int64_t backoff_base_ms = 250;
  double backoff_factor = 2.0;
  std::int64_t backoff_cap_ms = 10000;
  int max_restarts_per_hour = 60;
};

}  // namespace cma::runtime

#endif  // CMA_RUNTIME_SPEC_HPP_
