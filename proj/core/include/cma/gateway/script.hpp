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

#ifndef CMA_GATEWAY_SCRIPT_HPP_
#define CMA_GATEWAY_SCRIPT_HPP_

#include <cstddef>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "cma/gateway/gateway.hpp"

namespace cma::gateway {

/// One deterministic response rule. Rules are ordered; first match wins.
struct ScriptRule {
  std::string match;     // Substring, or ECMAScript regex when `regex`.
  bool regex = false;
  std::string response;  // May splice captured groups via $1..$9; $$ = $.
  bool once = false;     // Consumed after its first match.
};

/// Parses one JSONL rule line: {"match":..., "regex":bool, "response":...,
/// "once":bool} ("regex"/"once" optional, default false). Throws
/// ParseError carrying `line_no` on malformed input.
ScriptRule parse_script_rule_line(const std::string& line,
                                  std::size_t line_no);

/// Loads an ordered rule list from a JSONL file (blank lines skipped).
/// Throws ParseError naming the offending line number.
std::vector<ScriptRule> load_script(const std::string& path);

/// Deterministic backend: first matching rule's response, spliced; when no
/// rule matches, the echo-digest fallback "ECHO(N):<last user message>"
/// where N counts the message's Unicode code points. With an empty rule
/// list this is the pure echo backend.
class ScriptedGateway : public Gateway {
 public:
  explicit ScriptedGateway(std::vector<ScriptRule> rules = {});

  ChatResponse complete(const ChatRequest& request) override;

 private:
  struct Slot {
    ScriptRule rule;
    bool consumed = false;
  };
  std::mutex mutex_;
  std::vector<Slot> slots_;
};

/// Echo-digest text for a request (exposed for tests and the REPL).
std::string echo_digest(const ChatRequest& request);

std::unique_ptr<Gateway> make_scripted_gateway(std::vector<ScriptRule> rules);
std::unique_ptr<Gateway> make_echo_gateway();

}  // namespace cma::gateway

#endif  // CMA_GATEWAY_SCRIPT_HPP_
