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

#include "cma/config/agent_config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include <nlohmann/json.hpp>

#include "cma/common/errors.hpp"

namespace cma::config {

namespace {

namespace fs = std::filesystem;
using cma::runtime::ActivationPolicy;
using cma::runtime::ModuleSpec;
using cma::runtime::Trigger;
using nlohmann::json;

void error(std::vector<Diagnostic>& out, std::string message) {
  out.push_back({Diagnostic::Severity::kError, std::move(message)});
}

void warning(std::vector<Diagnostic>& out, std::string message) {
  out.push_back({Diagnostic::Severity::kWarning, std::move(message)});
}

bool topic_safe(const std::string& name) {
  if (name.empty()) return false;
  return name.find_first_of("/+#") == std::string::npos;
}

/// Resolves `path` against the directory holding the config file.
std::string resolve_path(const std::string& config_path,
                         const std::string& path) {
  if (path.empty()) return path;
  fs::path p(path);
  if (p.is_absolute()) return p.lexically_normal().string();
  return (fs::path(config_path).parent_path() / p).lexically_normal().string();
}

std::optional<json> read_json(const std::string& path,
                              std::vector<Diagnostic>& diags) {
  std::ifstream in(path, std::ios::binary);
  if (!in.is_open()) {
    error(diags, "cannot open agent definition: " + path);
    return std::nullopt;
  }
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  json parsed = json::parse(content, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object()) {
    error(diags, path + ": not a JSON object");
    return std::nullopt;
  }
  return parsed;
}

/// Walks the parsed definition, collecting diagnostics; when `out` is
/// given, also fills it. Returns false as soon as the structure is too
/// broken to continue.
void check_and_build(const std::string& path, const json& root,
                     std::vector<Diagnostic>& diags, AgentConfig* out) {
  // agent_id -------------------------------------------------------------
  std::string agent_id;
  if (!root.contains("agent_id") || !root["agent_id"].is_string()) {
    error(diags, "\"agent_id\" (string) is required");
  } else {
    agent_id = root["agent_id"].get<std::string>();
    if (!topic_safe(agent_id)) {
      error(diags, "agent_id must be non-empty without '/', '+' or '#': \"" +
                       agent_id + "\"");
    }
  }
  if (out) out->agent_id = agent_id;

  // modules ---------------------------------------------------------------
  bool saw_controlled = false;
  bool saw_activation_controller = false;
  std::set<std::string> names;
  if (!root.contains("modules") || !root["modules"].is_array() ||
      root["modules"].empty()) {
    error(diags, "\"modules\" (non-empty array) is required");
  } else {
    std::size_t index = 0;
    for (const json& item : root["modules"]) {
      const std::string where = "modules[" + std::to_string(index) + "]";
      if (!item.is_object()) {
        error(diags, where + ": not a JSON object");
        ++index;
        continue;
      }
      if (!item.contains("catalog") || !item["catalog"].is_string()) {
        error(diags, where + ": \"catalog\" (string) is required");
        ++index;
        continue;
      }
      const std::string catalog_id = item["catalog"].get<std::string>();
      const stdlib::CatalogEntry* entry =
          stdlib::find_catalog_entry(catalog_id);
      if (entry == nullptr) {
        error(diags, where + ": no catalog entry named \"" + catalog_id +
                         "\"");
        ++index;
        continue;
      }
      if (catalog_id == "activation_controller") {
        saw_activation_controller = true;
      }

      ModuleSpec spec = entry->spec;
      if (item.contains("name")) {
        if (!item["name"].is_string()) {
          error(diags, where + ": \"name\" must be a string");
        } else {
          spec.name = item["name"].get<std::string>();
        }
      }
      if (!topic_safe(spec.name)) {
        error(diags, where + ": module name must be non-empty without "
                             "'/', '+' or '#': \"" + spec.name + "\"");
      }
      if (!names.insert(spec.name).second) {
        error(diags, "duplicate module name: \"" + spec.name + "\"");
      }
      if (item.contains("system_prompt")) {
        if (!item["system_prompt"].is_string()) {
          error(diags, where + ": \"system_prompt\" must be a string");
        } else {
          spec.system_prompt = item["system_prompt"].get<std::string>();
        }
      }
      if (item.contains("model_id")) {
        if (!item["model_id"].is_string()) {
          error(diags, where + ": \"model_id\" must be a string");
        } else {
          spec.model_id = item["model_id"].get<std::string>();
        }
      }
      if (item.contains("trigger")) {
        const std::string kind = item["trigger"].is_string()
                                     ? item["trigger"].get<std::string>()
                                     : std::string();
        if (kind == "tick") {
          spec.trigger.kind = Trigger::Kind::kTick;
        } else if (kind == "on_message") {
          spec.trigger.kind = Trigger::Kind::kOnMessage;
        } else if (kind == "both") {
          spec.trigger.kind = Trigger::Kind::kBoth;
        } else {
          error(diags, where + ": \"trigger\" must be \"tick\", "
                               "\"on_message\" or \"both\"");
        }
      }
      if (item.contains("interval_ms")) {
        if (!item["interval_ms"].is_number_integer()) {
          error(diags, where + ": \"interval_ms\" must be an integer");
        } else {
          spec.trigger.interval_ms = item["interval_ms"].get<std::int64_t>();
          if (spec.trigger.interval_ms < Trigger::kMinIntervalMs) {
            error(diags, where + ": interval_ms below the minimum of " +
                             std::to_string(Trigger::kMinIntervalMs));
          }
        }
      }
      if (item.contains("activation")) {
        const std::string policy = item["activation"].is_string()
                                       ? item["activation"].get<std::string>()
                                       : std::string();
        if (policy == "always_on") {
          spec.activation_policy = ActivationPolicy::kAlwaysOn;
        } else if (policy == "controlled") {
          spec.activation_policy = ActivationPolicy::kControlled;
        } else {
          error(diags, where + ": \"activation\" must be \"always_on\" or "
                               "\"controlled\"");
        }
      }
      if (item.contains("start_deactivated")) {
        if (!item["start_deactivated"].is_boolean()) {
          error(diags, where + ": \"start_deactivated\" must be a boolean");
        } else {
          spec.start_deactivated = item["start_deactivated"].get<bool>();
        }
      }
      if (spec.start_deactivated &&
          spec.activation_policy != ActivationPolicy::kControlled) {
        error(diags, where + ": only controlled modules may start "
                             "deactivated");
      }
      // Distinct wake phases keep concurrent modules' virtual-clock wake
      // instants disjoint, which is what makes scenario runs replayable.
      if (item.contains("phase_offset_ms")) {
        if (!item["phase_offset_ms"].is_number_integer()) {
          error(diags, where + ": \"phase_offset_ms\" must be an integer");
        } else {
          spec.phase_offset_ms = item["phase_offset_ms"].get<std::int64_t>();
        }
      } else {
        spec.phase_offset_ms = static_cast<std::int64_t>(10 * index);
      }
      if (spec.activation_policy == ActivationPolicy::kControlled) {
        saw_controlled = true;
      }

      if (out) {
        ResolvedModule resolved;
        resolved.catalog_id = catalog_id;
        resolved.layer = entry->default_layer;
        resolved.spec = std::move(spec);
        resolved.factory = entry->factory;
        out->modules.push_back(std::move(resolved));
      }
      ++index;
    }
  }
  if (saw_controlled && !saw_activation_controller) {
    warning(diags,
            "controlled modules are present but no activation_controller "
            "is; they will never toggle");
  }

  // gateway ---------------------------------------------------------------
  GatewaySettings gw;
  if (root.contains("gateway")) {
    const json& g = root["gateway"];
    if (!g.is_object()) {
      error(diags, "\"gateway\" must be an object");
    } else {
      if (g.contains("backend") && g["backend"].is_string()) {
        gw.backend = g["backend"].get<std::string>();
      }
      if (gw.backend != "scripted" && gw.backend != "echo" &&
          gw.backend != "http") {
        error(diags, "gateway.backend must be \"scripted\", \"echo\" or "
                     "\"http\": \"" + gw.backend + "\"");
      }
      if (g.contains("rules") && g["rules"].is_string()) {
        gw.rules_path = resolve_path(path, g["rules"].get<std::string>());
      }
      if (g.contains("base_url") && g["base_url"].is_string()) {
        gw.base_url = g["base_url"].get<std::string>();
      }
      if (g.contains("api_key_env") && g["api_key_env"].is_string()) {
        gw.api_key_env = g["api_key_env"].get<std::string>();
      }
      if (g.contains("model_id") && g["model_id"].is_string()) {
        gw.model_id = g["model_id"].get<std::string>();
      }
      if (g.contains("max_concurrent")) {
        if (!g["max_concurrent"].is_number_unsigned()) {
          error(diags, "gateway.max_concurrent must be a positive integer");
        } else {
          gw.max_concurrent = g["max_concurrent"].get<std::size_t>();
          if (gw.max_concurrent == 0) {
            error(diags, "gateway.max_concurrent must be a positive integer");
          }
        }
      }
      if (gw.backend == "scripted") {
        if (gw.rules_path.empty()) {
          error(diags, "gateway.rules is required for the scripted backend");
        } else if (!fs::exists(gw.rules_path)) {
          warning(diags, "gateway.rules file not found: " + gw.rules_path);
        }
      }
      if (gw.backend == "http" && gw.base_url.empty()) {
        error(diags, "gateway.base_url is required for the http backend");
      }
    }
  }
  if (out) out->gateway = gw;

  // memory ----------------------------------------------------------------
  MemorySettings mem;
  if (root.contains("memory")) {
    const json& m = root["memory"];
    if (!m.is_object()) {
      error(diags, "\"memory\" must be an object");
    } else {
      if (m.contains("dimension")) {
        if (!m["dimension"].is_number_unsigned() ||
            m["dimension"].get<std::size_t>() == 0) {
          error(diags, "memory.dimension must be a positive integer");
        } else {
          mem.dimension = m["dimension"].get<std::size_t>();
        }
      }
      if (m.contains("capacity")) {
        if (!m["capacity"].is_number_unsigned() ||
            m["capacity"].get<std::size_t>() == 0) {
          error(diags, "memory.capacity must be a positive integer");
        } else {
          mem.capacity = m["capacity"].get<std::size_t>();
        }
      }
      if (m.contains("persist_path") && m["persist_path"].is_string()) {
        mem.persist_path =
            resolve_path(path, m["persist_path"].get<std::string>());
      }
    }
  }
  if (out) out->memory = mem;

  // bus ---------------------------------------------------------------
  BusSettings bus;
  if (root.contains("bus")) {
    const json& b = root["bus"];
    if (!b.is_object()) {
      error(diags, "\"bus\" must be an object");
    } else {
      if (b.contains("mode") && b["mode"].is_string()) {
        bus.mode = b["mode"].get<std::string>();
      }
      if (bus.mode != "in_process" && bus.mode != "external") {
        error(diags, "bus.mode must be \"in_process\" or \"external\": \"" +
                         bus.mode + "\"");
      }
      if (b.contains("broker_address") && b["broker_address"].is_string()) {
        bus.broker_address = b["broker_address"].get<std::string>();
      }
      if (bus.mode == "external" && bus.broker_address.empty()) {
        error(diags, "bus.broker_address is required in external mode");
      }
    }
  }
  if (out) out->bus = bus;

  // logging ---------------------------------------------------------------
  LoggingSettings logging;
  if (root.contains("logging")) {
    const json& l = root["logging"];
    if (!l.is_object()) {
      error(diags, "\"logging\" must be an object");
    } else if (l.contains("directory") && l["directory"].is_string()) {
      logging.directory =
          resolve_path(path, l["directory"].get<std::string>());
    }
  }
  if (out) out->logging = logging;
}

}  // namespace

bool has_errors(const std::vector<Diagnostic>& diagnostics) {
  for (const Diagnostic& d : diagnostics) {
    if (d.severity == Diagnostic::Severity::kError) return true;
  }
  return false;
}

std::vector<Diagnostic> validate_agent_config(const std::string& path) {
  std::vector<Diagnostic> diags;
  auto root = read_json(path, diags);
  if (root) check_and_build(path, *root, diags, nullptr);
  return diags;
}

AgentConfig load_agent_config(const std::string& path) {
  std::vector<Diagnostic> diags;
  auto root = read_json(path, diags);
  AgentConfig config;
  if (root) check_and_build(path, *root, diags, &config);
  for (const Diagnostic& d : diags) {
    if (d.severity == Diagnostic::Severity::kError) {
      throw ConfigError(path + ": " + d.message);
    }
  }
  return config;
}

}  // namespace cma::config
