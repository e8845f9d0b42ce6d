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

#ifndef CMA_RUNTIME_ACTIVATION_HPP_
#define CMA_RUNTIME_ACTIVATION_HPP_

#include <string>
#include <vector>

#include "cma/common/log.hpp"
#include "cma/gateway/gateway.hpp"
#include "cma/memory/record.hpp"
#include "cma/runtime/spec.hpp"

namespace cma::runtime {

/// The controller's system prompt (protocol text the decision model sees).
extern const char kActivationSystemPrompt[];

/// Builds the controller request for one Controlled target from the
/// target's system prompt and the agent's memories.
gateway::ChatRequest build_activation_request(
    const ModuleSpec& target_spec,
    const std::vector<cma::memory::MemoryRecord>& memories,
    const std::string& model_id);

/// Strict parse of the controller's reply: after trimming whitespace,
/// case-insensitively "activate" → Activate, "deactivate" → Deactivate,
/// "none" → NoChange. Anything else → NoChange with exactly one
/// nonconforming-output warning logged under "activation.nonconforming".
ActivationDecision parse_activation_response(const std::string& response,
                                             DiagnosticLog* diag);

/// Full decision round: build, call the gateway, parse. Gateway errors map
/// to NoChange (controller trouble never kills modules), logged under
/// "activation.gateway_error".
ActivationDecision activation_decide(
    const ModuleSpec& target_spec,
    const std::vector<cma::memory::MemoryRecord>& memories,
    gateway::Gateway& gateway, const std::string& model_id,
    DiagnosticLog* diag);

}  // namespace cma::runtime

#endif  // CMA_RUNTIME_ACTIVATION_HPP_
