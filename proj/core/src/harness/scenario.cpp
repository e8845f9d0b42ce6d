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

#include "cma/harness/scenario.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>

#include <nlohmann/json.hpp>

#include "cma/common/errors.hpp"

namespace cma::harness {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

[[noreturn]] void fail(const std::string& origin, const std::string& path,
                       const std::string& message) {
  throw ParseError(origin + ": " + path + ": " + message, 0);
}

std::size_t line_of_byte(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  const std::size_t limit = std::min(byte, text.size());
  for (std::size_t i = 0; i < limit; ++i) {
    if (text[i] == '\n') ++line;
  }
  return line;
}

std::optional<Event::Kind> kind_from_name(const std::string& name) {
  if (name == "sensor_write") return Event::Kind::kSensorWrite;
  if (name == "user_utterance") return Event::Kind::kUserUtterance;
  if (name == "kill_module") return Event::Kind::kKillModule;
  if (name == "network_drop_adapter") return Event::Kind::kNetworkDropAdapter;
  if (name == "assertion") return Event::Kind::kAssertion;
  return std::nullopt;
}

std::string require_string(const json& obj, const std::string& key,
                           const std::string& origin,
                           const std::string& path) {
  if (!obj.contains(key) || !obj[key].is_string()) {
    fail(origin, path, "requires string field '" + key + "'");
  }
  return obj[key].get<std::string>();
}

std::string param_to_string(const json& value, const std::string& origin,
                            const std::string& path) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_boolean()) return value.get<bool>() ? "true" : "false";
  if (value.is_number_integer()) {
    return std::to_string(value.get<std::int64_t>());
  }
  if (value.is_number_unsigned()) {
    return std::to_string(value.get<std::uint64_t>());
  }
  if (value.is_number_float()) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", value.get<double>());
    return buf;
  }
  fail(origin, path, "param values must be scalars");
}

Event parse_event(const json& obj, std::size_t index, std::int64_t duration_ms,
                  const std::string& origin) {
  const std::string path = "events[" + std::to_string(index) + "]";
  if (!obj.is_object()) fail(origin, path, "expected an object");

  Event event;
  if (!obj.contains("at_ms") || !obj["at_ms"].is_number_integer()) {
    fail(origin, path, "requires integer field 'at_ms'");
  }
  event.at_ms = obj["at_ms"].get<std::int64_t>();
  if (event.at_ms < 0) fail(origin, path + ".at_ms", "must be >= 0");
  if (event.at_ms > duration_ms) {
    fail(origin, path + ".at_ms", "exceeds duration_ms");
  }

  const std::string kind_name = require_string(obj, "kind", origin, path);
  const auto kind = kind_from_name(kind_name);
  if (!kind) fail(origin, path + ".kind", "unknown kind '" + kind_name + "'");
  event.kind = *kind;

  switch (event.kind) {
    case Event::Kind::kSensorWrite:
      event.channel = require_string(obj, "channel", origin, path);
      event.text = require_string(obj, "text", origin, path);
      break;
    case Event::Kind::kUserUtterance:
      event.text = require_string(obj, "text", origin, path);
      if (obj.contains("module")) {
        event.module = require_string(obj, "module", origin, path);
      }
      break;
    case Event::Kind::kKillModule:
      event.module = require_string(obj, "module", origin, path);
      break;
    case Event::Kind::kNetworkDropAdapter:
      break;
    case Event::Kind::kAssertion: {
      event.predicate_id = require_string(obj, "predicate", origin, path);
      if (obj.contains("params")) {
        const json& params = obj["params"];
        if (!params.is_object()) fail(origin, path + ".params", "must be an object");
        for (auto it = params.begin(); it != params.end(); ++it) {
          event.params[it.key()] =
              param_to_string(it.value(), origin, path + ".params." + it.key());
        }
      }
      break;
    }
  }
  return event;
}

}  // namespace

const char* event_kind_name(Event::Kind kind) {
  switch (kind) {
    case Event::Kind::kSensorWrite: return "sensor_write";
    case Event::Kind::kUserUtterance: return "user_utterance";
    case Event::Kind::kKillModule: return "kill_module";
    case Event::Kind::kNetworkDropAdapter: return "network_drop_adapter";
    case Event::Kind::kAssertion: return "assertion";
  }
  return "unknown";
}

ScenarioScript parse_scenario(const std::string& json_text,
                              const std::string& origin) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& err) {
    throw ParseError(origin + ": " + err.what(),
                     line_of_byte(json_text, err.byte));
  }
  if (!root.is_object()) fail(origin, "$", "expected a JSON object");

  ScenarioScript script;
  if (!root.contains("duration_ms") ||
      !root["duration_ms"].is_number_integer()) {
    fail(origin, "duration_ms", "required integer field");
  }
  script.duration_ms = root["duration_ms"].get<std::int64_t>();
  if (script.duration_ms <= 0) fail(origin, "duration_ms", "must be positive");

  if (root.contains("seed")) {
    if (!root["seed"].is_number_integer() &&
        !root["seed"].is_number_unsigned()) {
      fail(origin, "seed", "must be an integer");
    }
    script.seed = root["seed"].get<std::uint64_t>();
  }

  if (root.contains("gateway_rules")) {
    if (!root["gateway_rules"].is_string()) {
      fail(origin, "gateway_rules", "must be a string path");
    }
    script.gateway_rules = root["gateway_rules"].get<std::string>();
  }

  if (root.contains("silence_timeout_ms")) {
    if (!root["silence_timeout_ms"].is_number_integer()) {
      fail(origin, "silence_timeout_ms", "must be an integer");
    }
    script.silence_timeout_ms = root["silence_timeout_ms"].get<std::int64_t>();
  }

  if (root.contains("events")) {
    if (!root["events"].is_array()) fail(origin, "events", "must be an array");
    const json& events = root["events"];
    std::int64_t prev_at = 0;
    for (std::size_t i = 0; i < events.size(); ++i) {
      Event event = parse_event(events[i], i, script.duration_ms, origin);
      if (event.at_ms < prev_at) {
        fail(origin, "events[" + std::to_string(i) + "].at_ms",
             "events must be sorted by at_ms");
      }
      prev_at = event.at_ms;
      script.events.push_back(std::move(event));
    }
  }
  return script;
}

ScenarioScript load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.is_open()) throw ConfigError("cannot open scenario: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  ScenarioScript script = parse_scenario(text, path);
  if (!script.gateway_rules.empty()) {
    fs::path rules(script.gateway_rules);
    if (!rules.is_absolute()) {
      script.gateway_rules =
          (fs::path(path).parent_path() / rules).lexically_normal().string();
    }
  }
  return script;
}

}  // namespace cma::harness
