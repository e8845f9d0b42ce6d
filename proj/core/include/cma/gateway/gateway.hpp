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

#ifndef CMA_GATEWAY_GATEWAY_HPP_
#define CMA_GATEWAY_GATEWAY_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace cma::gateway {

enum class Role { kUser, kAssistant };

struct ChatMessage {
  Role role = Role::kUser;
  std::string text;
};

/// One chat-completion call. The language model is a black box behind this
/// shape regardless of backend.
struct ChatRequest {
  std::string system_prompt;
  std::vector<ChatMessage> messages;
  std::string model_id;
  double temperature = 0.0;  // Zero by default: reproducibility first.
  int max_tokens = 512;
};

struct ChatResponse {
  std::string text;
  std::string backend;  // "scripted", "echo", or "http".
  std::int64_t latency_ms = 0;
  int attempts = 1;
};

/// Backend contract. complete() is safe for unbounded concurrent callers;
/// an error returned to one caller never affects another's in-flight call.
class Gateway {
 public:
  virtual ~Gateway() = default;

  /// Pre: system_prompt or messages non-empty (std::invalid_argument
  /// otherwise). Throws GatewayError on backend failure.
  virtual ChatResponse complete(const ChatRequest& request) = 0;
};

/// The text rules match against: system prompt and last user message,
/// newline-joined. Modules differ mainly by system prompt, so rules can
/// target modules individually.
std::string match_text(const ChatRequest& request);

/// Last user message's text, empty when there is none.
std::string last_user_message(const ChatRequest& request);

}  // namespace cma::gateway

#endif  // CMA_GATEWAY_GATEWAY_HPP_
