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
//
// Internal: the user-message templates shared between the catalog entries
// (which expose them as data) and the behaviors (which render them).
// Placeholder vocabulary: {memories}, {inbox}, {scene}, {peer_outputs},
// {meta_report} — every placeholder a template uses must be covered by a
// declared input of the matching kind.

#ifndef CMA_SRC_STDLIB_TEMPLATES_HPP_
#define CMA_SRC_STDLIB_TEMPLATES_HPP_

namespace cma::stdlib::detail {

inline constexpr char kSummarizerUser[] =
    "Recent memories:\n{memories}\n\n"
    "Summarize their content in one short paragraph.";

inline constexpr char kCleanerUser[] =
    "Live records, newest first, one per line as id=<id> | <text>:\n"
    "{memories}\n\n"
    "List the ids of unnecessary records to delete, one id per line. "
    "If nothing should be deleted, write \"None\".";

inline constexpr char kMagiUser[] =
    "Latest memory:\n{memories}\n\n"
    "The other agent said:\n{peer_outputs}\n\n"
    "Reply with your opinion on what should be done.";

inline constexpr char kSceneUser[] = "Current scene:\n{scene}";

inline constexpr char kAutobiographyUser[] =
    "Previous autobiography:\n{peer_outputs}\n\n"
    "Recent memories:\n{memories}\n\n"
    "Rewrite the autobiography so it stays current.";

inline constexpr char kMetaReportUser[] =
    "Recent memories:\n{memories}\n\n"
    "Write a short report assessing the overall system state from the "
    "module statuses and resource sample listed above these memories.";

inline constexpr char kPromptModifierUser[] =
    "Latest meta report:\n{meta_report}\n\n"
    "Propose the full revised system prompt for the module named below. "
    "Keep its first line unchanged.";

inline constexpr char kConversationUser[] =
    "Current autobiography:\n{peer_outputs}\n\n"
    "Relevant memories:\n{memories}\n\n"
    "The user said:\n{inbox}\n\n"
    "Reply to the user.";

inline constexpr char kThinkingUser[] =
    "Recent memories:\n{memories}\n\n"
    "Freely write one thought, intention, or reflection.";

inline constexpr char kVisionInterpreterUser[] =
    "Raw camera frame:\n{scene}\n\n"
    "Describe the scene in natural language.";

inline constexpr char kAudioInterpreterUser[] =
    "Raw audio transcription:\n{scene}\n\n"
    "Describe what was heard in natural language.";

inline constexpr char kSoilInterpreterUser[] =
    "Raw soil readings:\n{scene}\n\n"
    "Describe the soil state in one short sentence.";

inline constexpr char kActionDecideUser[] =
    "Context from memory:\n{memories}\n\n"
    "Decide whether the robot should act right now. "
    "Reply with exactly one word: act or wait.";

inline constexpr char kActionInstructUser[] =
    "Context from memory:\n{memories}\n\n"
    "Write one concrete movement instruction for the robot.";

inline constexpr char kMotorUser[] =
    "Action instruction:\n{scene}\n\n"
    "Translate it into one concrete motor command.";

}  // namespace cma::stdlib::detail

#endif  // CMA_SRC_STDLIB_TEMPLATES_HPP_
