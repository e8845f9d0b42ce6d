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

#ifndef CMA_CONFIG_AGENT_CONFIG_HPP_
#define CMA_CONFIG_AGENT_CONFIG_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "cma/runtime/runtime.hpp"
#include "cma/runtime/spec.hpp"
#include "cma/stdlib/catalog.hpp"

namespace cma::config {

/// One validation finding. Warnings never block loading; errors do.
struct Diagnostic {
  enum class Severity { kError, kWarning };
  Severity severity = Severity::kError;
  std::string message;
};

bool has_errors(const std::vector<Diagnostic>& diagnostics);

struct GatewaySettings {
  std::string backend = "scripted";  // "scripted" | "echo" | "http"
  std::string rules_path;            // scripted backend rule file
  std::string base_url;              // http backend
  std::string api_key_env = "CMA_API_KEY";
  std::string model_id = "gpt-4o-mini";
  std::size_t max_concurrent = 8;
};

struct MemorySettings {
  std::size_t dimension = 256;
  std::size_t capacity = 100000;
  std::string persist_path;  // empty: in-memory only
};

struct BusSettings {
  std::string mode = "in_process";  // "in_process" | "external"
  std::string broker_address;      // host:port, external mode only
};

struct LoggingSettings {
  std::string directory;  // empty: per-module logs disabled
};

/// A module entry resolved against the built-in catalog, with overrides
/// and its wake phase applied, ready to spawn.
struct ResolvedModule {
  std::string catalog_id;
  stdlib::Layer layer = stdlib::Layer::kBase;
  cma::runtime::ModuleSpec spec;
  cma::runtime::BehaviorFactory factory;
};

/// A full agent definition loaded from one JSON file. Relative paths in
/// the file resolve against the file's own directory.
struct AgentConfig {
  std::string agent_id;
  std::vector<ResolvedModule> modules;
  GatewaySettings gateway;
  MemorySettings memory;
  BusSettings bus;
  LoggingSettings logging;
};

/// Pure check of a definition file: parses, resolves names, and reports
/// everything wrong or suspicious. Reads only; never creates files or
/// connections. A missing/unreadable file is itself a diagnostic.
std::vector<Diagnostic> validate_agent_config(const std::string& path);

/// Loads a definition, applying catalog resolution, per-module overrides,
/// and automatic wake-phase assignment (10 ms x module index unless the
/// file pins one). Throws ConfigError carrying the first error from
/// validate_agent_config when the definition is invalid.
AgentConfig load_agent_config(const std::string& path);

}  // namespace cma::config

#endif  // CMA_CONFIG_AGENT_CONFIG_HPP_
