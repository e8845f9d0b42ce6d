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

#include "cma/runtime/spec.hpp"

namespace cma::runtime {

const char* module_state_name(ModuleState state) {
  switch (state) {
    case ModuleState::kCreated:
      return "created";
    case ModuleState::kActive:
      return "active";
    case ModuleState::kDeactivated:
      return "deactivated";
    case ModuleState::kFailed:
      return "failed";
    case ModuleState::kStopped:
      return "stopped";
  }
  return "unknown";
}

bool transition_legal(ModuleState from, ModuleState to) {
  if (to == ModuleState::kStopped) return true;  // any → Stopped
  switch (from) {
    case ModuleState::kCreated:
      return to == ModuleState::kActive;
    case ModuleState::kActive:
      return to == ModuleState::kDeactivated || to == ModuleState::kFailed;
    case ModuleState::kDeactivated:
      return to == ModuleState::kActive;
    case ModuleState::kFailed:
      return to == ModuleState::kActive;  // via supervisor restart
    case ModuleState::kStopped:
      return false;
  }
  return false;
}

}  // namespace cma::runtime
