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

#ifndef CMA_STDLIB_BEHAVIORS_HPP_
#define CMA_STDLIB_BEHAVIORS_HPP_

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cma/memory/record.hpp"
#include "cma/runtime/runtime.hpp"
#include "cma/runtime/spec.hpp"

namespace cma::stdlib {

/// Periodic self-assessment produced by the meta system report module:
/// a narrative over module statuses, resource usage, and recent memories.
struct MetaReport {
  std::int64_t generated_at_ms = 0;
  std::map<std::string, cma::runtime::ModuleStatus> module_statuses;
  struct ResourceSample {
    double cpu_percent = 0.0;
    std::uint64_t process_memory_bytes = 0;
    std::size_t live_record_count = 0;
  } resource_sample;
  std::string narrative;
};

/// One applied (or rejected) system-prompt revision. History is
/// append-only inside the prompt modifier behavior.
struct PromptRevision {
  std::string module_name;
  std::string old_prompt;
  std::string new_prompt;
  std::string reason;
  std::int64_t applied_at_ms = 0;
  bool accepted = false;
};

/// Samples this process's CPU share since the previous call (0 on the
/// first call or off-Linux) and its resident set size in bytes.
MetaReport::ResourceSample sample_process_resources();

/// Renders records as one "- <text>" bullet per line;
/// "(no memories yet)" when empty.
std::string join_memory_texts(
    const std::vector<cma::memory::MemoryRecord>& records);

/// Replaces every "{key}" occurrence in `text` for each map entry.
std::string fill_template(std::string text,
                          const std::map<std::string, std::string>& values);

// ---------------------------------------------------------------------------
// Behavior factories. Each returns a fresh stateless-or-restartable
// behavior; catalog entries bind these to their ModuleSpec.
// ---------------------------------------------------------------------------

/// Reads the declared recent memories, summarizes them through the
/// gateway, stores the summary tagged "summary". Empty input skips.
cma::runtime::BehaviorFactory summarizer_behavior();

/// When the live record count exceeds `target_cap`, shows the declared
/// recent records to the gateway and deletes the ids it names (one per
/// line, exact match among those shown). Never deletes a record tagged
/// "autobiography". Below the cap the step is a no-op.
cma::runtime::BehaviorFactory memory_cleaner_behavior(
    std::size_t target_cap = 100);

/// Inner-dialogue participant. `identity` is "a", "b" or "c"; the peer
/// text comes from the newest inbox envelope sent by `previous`, falling
/// back to that module's latest stored record, then "(silence)". The turn
/// is stored tagged "magi_<identity>" and sent to `next`.
cma::runtime::BehaviorFactory magi_behavior(std::string identity,
                                            std::string previous,
                                            std::string next);

/// Scene-driven text module (image description, desire, prediction, task
/// planning, reaction analysis). Reads the latest "vision" channel text;
/// skips when no scene has ever been written; stores output tagged `kind`.
cma::runtime::BehaviorFactory scene_behavior(std::string kind);

/// Rewrites the agent's self-narrative from the declared recent memories
/// plus its own previous output ("(none)" at bootstrap). Stored tagged
/// "autobiography"; the newest such record is the current autobiography.
cma::runtime::BehaviorFactory autobiographical_behavior();

/// Composes module statuses, a resource sample, and the declared recent
/// memories into a narrative stored tagged "meta_report". Structured
/// fields go to the diagnostic log under "meta.report".
cma::runtime::BehaviorFactory meta_report_behavior();

/// For each target module, asks the gateway for a revised system prompt
/// grounded on the latest meta report and applies it through the runtime
/// prompt guard. No meta report yet -> no-op.
cma::runtime::BehaviorFactory prompt_modifier_behavior(
    std::vector<std::string> targets);

/// Replies to each inbox utterance, grounded on a similarity query for
/// the utterance (k=5) and the current autobiography. The reply is
/// stored, sent back to the sender, and written to "speech_out".
cma::runtime::BehaviorFactory conversation_behavior();

/// Free-running reflection over the declared recent memories; output
/// stored tagged "thought".
cma::runtime::BehaviorFactory thinking_behavior();

/// Converts one fresh raw sample from the declared sensor channel into a
/// natural-language description stored tagged `kind`. No fresh sample ->
/// skip, so each sample yields exactly one record.
cma::runtime::BehaviorFactory interpreter_behavior(std::string kind);

/// Two-layer action selection over the declared memory query: first a
/// strict "act"/"wait" decision, then, only on "act", an instruction that
/// is stored and written to the "motor" channel.
cma::runtime::BehaviorFactory action_behavior();

/// Keeps the store lean: prunes like the memory cleaner when over
/// `target_cap`, otherwise summarizes recent records like the summarizer.
cma::runtime::BehaviorFactory memory_manager_behavior(
    std::size_t target_cap = 100);

/// Forwards each fresh value on `in_channel` to `out_channel` unchanged
/// (desk-scale stand-in for a hardware device loop).
cma::runtime::BehaviorFactory passthrough_behavior(std::string in_channel,
                                                   std::string out_channel);

/// Motor control with a language model in the loop: interprets each fresh
/// action instruction on the "motor" channel into a concrete motor
/// command written to "motor_command".
cma::runtime::BehaviorFactory llm_motor_behavior();

/// Publishes a process resource sample ("cpu_percent=<x>
/// process_memory_bytes=<y>") to the "resources" channel every step.
cma::runtime::BehaviorFactory resource_monitor_behavior();

/// Runs one activation decision per Controlled module against the
/// declared recent memories and applies it via the runtime control
/// surface.
cma::runtime::BehaviorFactory activation_controller_behavior();

}  // namespace cma::stdlib

#endif  // CMA_STDLIB_BEHAVIORS_HPP_
