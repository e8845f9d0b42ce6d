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

#ifndef CMA_RUNTIME_RUNTIME_HPP_
#define CMA_RUNTIME_RUNTIME_HPP_

#include <atomic>
#include <cstdint>
#include <deque>
#include <fstream>
#include <functional>
#include <latch>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "cma/bus/bus.hpp"
#include "cma/bus/envelope.hpp"
#include "cma/common/clock.hpp"
#include "cma/common/log.hpp"
#include "cma/gateway/gateway.hpp"
#include "cma/memory/store.hpp"
#include "cma/runtime/sensors.hpp"
#include "cma/runtime/spec.hpp"
#include "cma/runtime/timeline.hpp"

namespace cma::runtime {

/// Everything a behavior's step sees, gathered from the module's declared
/// input sources just before the step runs.
struct StepInputs {
  std::int64_t now_ms = 0;
  std::vector<cma::memory::MemoryRecord> recent;
  std::vector<cma::memory::QueryHit> query_hits;
  std::vector<bus::Envelope> inbox;
  std::map<std::string, std::string> sensors;  // channel → latest text
  std::map<std::string, cma::memory::MemoryRecord> peer_outputs;
};

struct MemoryWrite {
  std::string text;
  std::set<std::string> tags;
};

struct Send {
  std::string to;
  std::string body;
  std::map<std::string, std::string> headers;
};

struct SensorWrite {
  std::string channel;
  std::string text;
};

/// Everything a behavior's step wants applied through the module's
/// declared output sinks.
struct StepOutputs {
  std::vector<MemoryWrite> stores;
  std::vector<Send> sends;
  std::vector<SensorWrite> sensor_writes;

  bool produced() const {
    return !stores.empty() || !sends.empty() || !sensor_writes.empty();
  }
};

/// Control surface the runtime offers to management behaviors (activation
/// controller, meta reporting, prompt revision). Safe from any context.
class RuntimeControl {
 public:
  virtual ~RuntimeControl() = default;
  virtual std::map<std::string, ModuleStatus> status_all() = 0;
  virtual ModuleStatus set_activation(const std::string& name,
                                      ActivationDecision decision) = 0;
  /// Replaces a module's system prompt. The first line of the original
  /// prompt is immutable and the revision may grow to at most 4x the
  /// original length; violations are rejected (returns false).
  virtual bool revise_prompt(const std::string& name,
                             const std::string& new_prompt) = 0;
  virtual std::optional<ModuleSpec> spec_of(const std::string& name) = 0;
  virtual std::vector<std::string> controlled_modules() = 0;
};

class Runtime;

/// Services available to a behavior during a step. `spec` is a snapshot
/// taken at step start (prompt revisions land between steps).
struct ModuleContext {
  const ModuleSpec* spec = nullptr;
  gateway::Gateway* gateway = nullptr;
  cma::memory::Memory* memory = nullptr;
  DiagnosticLog* diag = nullptr;
  RuntimeControl* control = nullptr;
  Clock* clock = nullptr;
};

/// A module's logic: a function from gathered inputs to declared outputs.
/// Each instance runs strictly sequentially; restarts construct a fresh
/// instance, so state held here dies with the failure.
class Behavior {
 public:
  virtual ~Behavior() = default;
  virtual StepOutputs step(const StepInputs& inputs, ModuleContext& ctx) = 0;
};

using BehaviorFactory = std::function<std::unique_ptr<Behavior>()>;

/// Executes modules as independent supervised loops over a shared clock,
/// bus, global-state memory, and gateway. One thread per module; a failure
/// in one behavior never propagates to another module's loop.
class Runtime : public RuntimeControl {
 public:
  struct Options {
    /// Directory for per-module JSONL logs; empty disables logging.
    std::string log_dir;
    SupervisorPolicy supervisor;
    std::size_t inbox_drain_cap = 16;
    /// Supervisor wake cadence and phase. The default phase keeps its wake
    /// instants off the module grid (modules sit on multiples of 10 ms).
    std::int64_t supervisor_interval_ms = 50;
    std::int64_t supervisor_phase_ms = 7;
  };

  Runtime(Clock& clock, bus::Bus& bus, cma::memory::Memory& memory,
          gateway::Gateway& gateway, SensorBoard& sensors,
          TimelineRecorder& timeline, DiagnosticLog& diag, Options options);
  ~Runtime() override;
  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  /// Registers a module. Must precede start(). Throws DuplicateModuleError
  /// and InvalidNameError.
  void spawn(ModuleSpec spec, BehaviorFactory factory);

  /// Launches all module loops and the supervisor. Returns once every
  /// worker is registered with the clock and running.
  void start();

  /// Stops the clock and joins all loops. Idempotent.
  void stop();

  bool started() const { return started_.load(); }
  std::int64_t start_ms() const { return start_ms_; }

  ModuleStatus status(const std::string& name);
  std::vector<std::string> module_names();
  /// Full (ts, state) transition history of a module, for audits.
  std::vector<std::pair<std::int64_t, ModuleState>> status_history(
      const std::string& name);

  /// Marks a module to fail at its next wake, as if its behavior threw.
  void inject_failure(const std::string& name, const std::string& reason);

  // RuntimeControl:
  std::map<std::string, ModuleStatus> status_all() override;
  ModuleStatus set_activation(const std::string& name,
                              ActivationDecision decision) override;
  bool revise_prompt(const std::string& name,
                     const std::string& new_prompt) override;
  std::optional<ModuleSpec> spec_of(const std::string& name) override;
  std::vector<std::string> controlled_modules() override;

 private:
  struct Module;

  Module* find(const std::string& name);
  void module_loop(Module& m);
  void supervisor_loop();
  StepInputs gather(Module& m);
  std::string apply(Module& m, const StepOutputs& outputs);
  void fail_module(Module& m, const std::string& reason);
  /// Appends the timeline event and the module's JSONL log line.
  void record(Module& m, EventKind kind, ModuleState state_after,
              const std::string& summary);
  /// Pushes a transition under m.mutex; throws on an illegal edge.
  void transition_locked(Module& m, ModuleState to, std::int64_t ts_ms);

  Clock& clock_;
  bus::Bus& bus_;
  cma::memory::Memory& memory_;
  gateway::Gateway& gateway_;
  SensorBoard& sensors_;
  TimelineRecorder& timeline_;
  DiagnosticLog& diag_;
  Options options_;

  std::vector<std::unique_ptr<Module>> modules_;  // Fixed after start().
  std::thread supervisor_;
  std::atomic<bool> started_{false};
  std::atomic<bool> stopping_{false};
  std::atomic<bool> stopped_{false};
  std::int64_t start_ms_ = 0;
  std::unique_ptr<std::latch> ready_latch_;
  std::unique_ptr<std::latch> go_latch_;
};

}  // namespace cma::runtime

#endif  // CMA_RUNTIME_RUNTIME_HPP_
