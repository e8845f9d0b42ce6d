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

#ifndef CMA_STDLIB_CATALOG_HPP_
#define CMA_STDLIB_CATALOG_HPP_

#include <string>
#include <vector>

#include "cma/runtime/runtime.hpp"
#include "cma/runtime/spec.hpp"

namespace cma::stdlib {

/// Which tier of the agent a built-in module belongs to.
enum class Layer { kHardwareProxy, kBase, kMeta };

const char* layer_name(Layer layer);

/// One ready-to-spawn built-in module: a declarative spec, the user-text
/// template its behavior renders (placeholders {memories}, {inbox},
/// {scene}, {peer_outputs}, {meta_report} must be covered by declared
/// inputs), and a factory for its behavior.
struct CatalogEntry {
  /// Stable lookup key. Usually equals spec.name; differs only where two
  /// agents need different behaviors under the same module name.
  std::string id;
  cma::runtime::ModuleSpec spec;
  std::string prompt_template;
  Layer default_layer = Layer::kBase;
  cma::runtime::BehaviorFactory factory;
};

/// The full built-in module library.
const std::vector<CatalogEntry>& builtin_catalog();

/// nullptr when no entry has that id.
const CatalogEntry* find_catalog_entry(const std::string& id);

/// Catalog ids composing the bundled mobile-plant agent (12 modules).
std::vector<std::string> plantbot_catalog_ids();

/// Catalog ids composing the bundled humanoid agent (20 modules).
std::vector<std::string> alter3_catalog_ids();

}  // namespace cma::stdlib

#endif  // CMA_STDLIB_CATALOG_HPP_
