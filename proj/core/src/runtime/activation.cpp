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

#include "cma/runtime/activation.hpp"

#include <cctype>

#include "cma/common/errors.hpp"

namespace cma::runtime {

const char kActivationSystemPrompt[] =
    "Your task is to decide activate or deactivate the module. Read the "
    "system_prompt of the target module, memory of the humanoid robot. "
    "According to this information, you have to deactivate or activate the "
    "module.\n"
    "\n"
    "If you determine that this function is not needed right now based on "
    "your memory, please deactivate it. If you determine that this function "
    "is needed right now on your memory, please activate it.\n"
    "\n"
    "Guidelines:\n"
    "\n"
    "1. Output should be only the activate or deactivate.\n"
    "\n"
    "2. Do not use bullet points.\n"
    "\n"
    "3. Do not use any other words.\n"
    "\n"
    "4. If you do not decide anything, just write \"None\".\n"
    "\n"
    "Example: activate\n"
    "\n"
    "Example: deactivate";

namespace {

std::string trim(const std::string& text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end &&
         std::isspace(static_cast<unsigned char>(text[begin])) != 0) {
    ++begin;
  }
  while (end > begin &&
         std::isspace(static_cast<unsigned char>(text[end - 1])) != 0) {
    --end;
  }
  return text.substr(begin, end - begin);
}

std::string lower(std::string text) {
  for (char& c : text) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return text;
}

}  // namespace

gateway::ChatRequest build_activation_request(
    const ModuleSpec& target_spec,
    const std::vector<cma::memory::MemoryRecord>& memories,
    const std::string& model_id) {
  std::string user = "Target module: " + target_spec.name + "\n";
  user += "system_prompt of the target module:\n";
  user += target_spec.system_prompt;
  user += "\n\nMemory of the humanoid robot:\n";
  if (memories.empty()) {
    user += "(no memories yet)\n";
  } else {
    for (const auto& record : memories) {
      user += record.text;
      user += "\n";
    }
  }
  gateway::ChatRequest request;
  request.system_prompt = kActivationSystemPrompt;
  request.messages.push_back({gateway::Role::kUser, std::move(user)});
  request.model_id = model_id;
  return request;
}

ActivationDecision parse_activation_response(const std::string& response,
                                             DiagnosticLog* diag) {
  const std::string normalized = lower(trim(response));
  if (normalized == "activate") return ActivationDecision::kActivate;
  if (normalized == "deactivate") return ActivationDecision::kDeactivate;
  if (normalized == "none") return ActivationDecision::kNoChange;
  if (diag != nullptr) {
    diag->warn("activation.nonconforming",
               "controller reply is not activate/deactivate/None: \"" +
                   response + "\"");
  }
  return ActivationDecision::kNoChange;
}

ActivationDecision activation_decide(
    const ModuleSpec& target_spec,
    const std::vector<cma::memory::MemoryRecord>& memories,
    gateway::Gateway& gateway, const std::string& model_id,
    DiagnosticLog* diag) {
  gateway::ChatRequest request =
      build_activation_request(target_spec, memories, model_id);
  std::string reply;
  try {
    reply = gateway.complete(request).text;
  } catch (const GatewayError& e) {
    if (diag != nullptr) {
      diag->warn("activation.gateway_error",
                 std::string("controller call failed, holding state: ") +
                     e.what());
    }
    return ActivationDecision::kNoChange;
  }
  return parse_activation_response(reply, diag);
}

}  // namespace cma::runtime
