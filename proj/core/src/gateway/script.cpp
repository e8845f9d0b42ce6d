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

#include "cma/gateway/script.hpp"

#include <chrono>
#include <fstream>
#include <regex>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "cma/common/errors.hpp"

namespace cma::gateway {

namespace {

std::size_t count_code_points(const std::string& text) {
  std::size_t n = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++n;  // Count non-continuation bytes.
  }
  return n;
}

void require_nonempty(const ChatRequest& request) {
  if (request.system_prompt.empty() && request.messages.empty()) {
    throw std::invalid_argument(
        "chat request needs a system prompt or at least one message");
  }
}

/// Splices $1..$9 captures (and $$ escapes) into a rule's response.
std::string splice(const std::string& tmpl, const std::smatch& groups) {
  std::string out;
  out.reserve(tmpl.size());
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    char c = tmpl[i];
    if (c != '$' || i + 1 >= tmpl.size()) {
      out.push_back(c);
      continue;
    }
    char next = tmpl[i + 1];
    if (next == '$') {
      out.push_back('$');
      ++i;
    } else if (next >= '1' && next <= '9') {
      std::size_t idx = static_cast<std::size_t>(next - '0');
      if (idx < groups.size()) out += groups[idx].str();
      ++i;
    } else {
      out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::string last_user_message(const ChatRequest& request) {
  for (auto it = request.messages.rbegin(); it != request.messages.rend();
       ++it) {
    if (it->role == Role::kUser) return it->text;
  }
  return std::string();
}

std::string match_text(const ChatRequest& request) {
  return request.system_prompt + "\n" + last_user_message(request);
}

std::string echo_digest(const ChatRequest& request) {
  const std::string last = last_user_message(request);
  return "ECHO(" + std::to_string(count_code_points(last)) + "):" + last;
}

ScriptRule parse_script_rule_line(const std::string& line,
                                  std::size_t line_no) {
  nlohmann::json parsed = nlohmann::json::parse(line, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object()) {
    throw ParseError("rule line is not a JSON object", line_no);
  }
  if (!parsed.contains("match") || !parsed["match"].is_string()) {
    throw ParseError("rule needs a string \"match\"", line_no);
  }
  if (!parsed.contains("response") || !parsed["response"].is_string()) {
    throw ParseError("rule needs a string \"response\"", line_no);
  }
  ScriptRule rule;
  rule.match = parsed["match"].get<std::string>();
  rule.response = parsed["response"].get<std::string>();
  if (parsed.contains("regex")) {
    if (!parsed["regex"].is_boolean()) {
      throw ParseError("\"regex\" must be a boolean", line_no);
    }
    rule.regex = parsed["regex"].get<bool>();
  }
  if (parsed.contains("once")) {
    if (!parsed["once"].is_boolean()) {
      throw ParseError("\"once\" must be a boolean", line_no);
    }
    rule.once = parsed["once"].get<bool>();
  }
  if (rule.regex) {
    try {
      std::regex compiled(rule.match);
    } catch (const std::regex_error& e) {
      throw ParseError(std::string("invalid regex: ") + e.what(), line_no);
    }
  }
  return rule;
}

std::vector<ScriptRule> load_script(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.is_open()) {
    throw ConfigError("cannot open rule file: " + path);
  }
  std::vector<ScriptRule> rules;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    rules.push_back(parse_script_rule_line(line, line_no));
  }
  return rules;
}

ScriptedGateway::ScriptedGateway(std::vector<ScriptRule> rules) {
  slots_.reserve(rules.size());
  for (auto& rule : rules) slots_.push_back(Slot{std::move(rule), false});
}

ChatResponse ScriptedGateway::complete(const ChatRequest& request) {
  require_nonempty(request);
  auto start = std::chrono::steady_clock::now();
  const std::string haystack = match_text(request);

  std::string text;
  bool matched = false;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    for (Slot& slot : slots_) {
      if (slot.consumed) continue;
      if (slot.rule.regex) {
        std::smatch groups;
        if (std::regex_search(haystack, groups, std::regex(slot.rule.match))) {
          text = splice(slot.rule.response, groups);
          matched = true;
        }
      } else if (haystack.find(slot.rule.match) != std::string::npos) {
        text = slot.rule.response;
        matched = true;
      }
      if (matched) {
        if (slot.rule.once) slot.consumed = true;
        break;
      }
    }
  }
  if (!matched) text = echo_digest(request);

  ChatResponse response;
  response.text = std::move(text);
  response.backend = matched ? "scripted" : "echo";
  response.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - start)
                            .count();
  response.attempts = 1;
  return response;
}

std::unique_ptr<Gateway> make_scripted_gateway(std::vector<ScriptRule> rules) {
  return std::make_unique<ScriptedGateway>(std::move(rules));
}

std::unique_ptr<Gateway> make_echo_gateway() {
  return std::make_unique<ScriptedGateway>();
}

}  // namespace cma::gateway
