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

#include "cma/bus/envelope.hpp"

#include <nlohmann/json.hpp>

#include "cma/common/errors.hpp"

namespace cma::bus {

using nlohmann::json;
using nlohmann::ordered_json;

bool is_topic_safe(const std::string& name) {
  if (name.empty()) return false;
  return name.find_first_of("/+#") == std::string::npos;
}

void require_topic_safe(const std::string& name, const std::string& what) {
  if (!is_topic_safe(name)) {
    throw InvalidNameError(what + " is not topic-safe: \"" + name + "\"");
  }
}

std::string topic_for(const std::string& agent_id,
                      const std::string& module_name) {
  require_topic_safe(agent_id, "agent_id");
  require_topic_safe(module_name, "module_name");
  return "cma/" + agent_id + "/module/" + module_name + "/inbox";
}

std::string encode(const Envelope& e) {
  ordered_json j;
  j["msg_id"] = e.msg_id;
  j["agent_id"] = e.agent_id;
  j["from"] = e.from_module;
  j["to"] = e.to_module;
  j["sent_at"] = e.sent_at_ms;
  j["body"] = e.body;
  // std::map iterates in key order, so header order is canonical too.
  ordered_json headers = ordered_json::object();
  for (const auto& [k, v] : e.headers) headers[k] = v;
  j["headers"] = std::move(headers);
  return j.dump();
}

namespace {

const json* require_key(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw MalformedPayloadError(std::string("missing required key \"") + key +
                                    "\"",
                                key);
  }
  return &*it;
}

std::string require_string(const json& j, const char* key) {
  const json* v = require_key(j, key);
  if (!v->is_string()) {
    throw MalformedPayloadError(std::string("key \"") + key +
                                    "\" must be a string",
                                key);
  }
  return v->get<std::string>();
}

}  // namespace

Envelope decode(const std::string& bytes) {
  json j = json::parse(bytes, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw MalformedPayloadError("payload is not a JSON object");
  }
  Envelope e;
  // Checked in declared key order so `{}` is reported as missing msg_id.
  e.msg_id = require_string(j, "msg_id");
  e.agent_id = require_string(j, "agent_id");
  e.from_module = require_string(j, "from");
  e.to_module = require_string(j, "to");
  const json* sent_at = require_key(j, "sent_at");
  if (!sent_at->is_number_integer()) {
    throw MalformedPayloadError("key \"sent_at\" must be an integer",
                                "sent_at");
  }
  e.sent_at_ms = sent_at->get<std::int64_t>();
  e.body = require_string(j, "body");
  const json* headers = require_key(j, "headers");
  if (!headers->is_object()) {
    throw MalformedPayloadError("key \"headers\" must be an object",
                                "headers");
  }
  for (auto it = headers->begin(); it != headers->end(); ++it) {
    if (!it.value().is_string()) {
      throw MalformedPayloadError("header values must be strings", "headers");
    }
    e.headers[it.key()] = it.value().get<std::string>();
  }
  return e;
}

}  // namespace cma::bus
