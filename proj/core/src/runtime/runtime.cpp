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

#include "cma/runtime/runtime.hpp"

#include <algorithm>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "cma/common/errors.hpp"

namespace cma::runtime {

namespace {

constexpr std::int64_t kHourMs = 3600000;

std::string first_line(const std::string& text) {
  auto nl = text.find('\n');
  return nl == std::string::npos ? text : text.substr(0, nl);
}

}  // namespace

struct Runtime::Module {
  // Immutable after spawn except spec.system_prompt (guarded by mutex).
  ModuleSpec spec;
  std::string original_prompt;
  std::string prompt_prefix;  // First line of the original prompt.
  BehaviorFactory factory;

  // Owned by the worker thread while Active; swapped by the supervisor
  // only while Failed (the worker never touches it in that state).
  std::unique_ptr<Behavior> behavior;
  std::unique_ptr<bus::Subscription> subscription;
  std::thread worker;

  std::mutex mutex;
  ModuleState state = ModuleState::kCreated;
  int restarts = 0;
  std::optional<std::int64_t> last_output_at;
  std::optional<std::string> last_error;
  std::vector<std::pair<std::int64_t, ModuleState>> history;
  bool kill_requested = false;
  std::string kill_reason;

  // Supervisor bookkeeping (guarded by mutex).
  std::int64_t restart_due_at = 0;
  std::int64_t current_backoff_ms = 0;
  std::deque<std::int64_t> restart_times;
  bool alerted = false;

  // Worker-thread-only state.
  std::map<std::string, std::uint64_t> seen_sensor_seq;

  std::mutex log_mutex;
  std::ofstream log;
};

Runtime::Runtime(Clock& clock, bus::Bus& bus, cma::memory::Memory& memory,
                 gateway::Gateway& gateway, SensorBoard& sensors,
                 TimelineRecorder& timeline, DiagnosticLog& diag,
                 Options options)
    : clock_(clock),
      bus_(bus),
      memory_(memory),
      gateway_(gateway),
      sensors_(sensors),
      timeline_(timeline),
      diag_(diag),
      options_(std::move(options)) {}

Runtime::~Runtime() { stop(); }

void Runtime::spawn(ModuleSpec spec, BehaviorFactory factory) {
  if (started_.load()) {
    throw Error("spawn must precede start()");
  }
  bus::require_topic_safe(spec.name, "module name");
  if (spec.trigger.interval_ms < Trigger::kMinIntervalMs) {
    throw ConfigError("module '" + spec.name + "' interval below " +
                      std::to_string(Trigger::kMinIntervalMs) + " ms");
  }
  for (const auto& module : modules_) {
    if (module->spec.name == spec.name) {
      throw DuplicateModuleError(spec.name);
    }
  }
  auto m = std::make_unique<Module>();
  m->original_prompt = spec.system_prompt;
  m->prompt_prefix = first_line(spec.system_prompt);
  m->spec = std::move(spec);
  m->factory = std::move(factory);
  m->behavior = m->factory();
  m->current_backoff_ms = options_.supervisor.backoff_base_ms;
  m->history.emplace_back(clock_.now_ms(), ModuleState::kCreated);

  bool wants_inbox =
      m->spec.trigger.kind != Trigger::Kind::kTick ||
      std::any_of(m->spec.inputs.begin(), m->spec.inputs.end(),
                  [](const InputSource& s) {
                    return s.kind == InputSource::Kind::kInboxMessages;
                  });
  if (wants_inbox) {
    m->subscription = bus_.subscribe(m->spec.name);
  }

  if (!options_.log_dir.empty()) {
    std::filesystem::create_directories(options_.log_dir);
    m->log.open(options_.log_dir + "/" + m->spec.name + ".jsonl",
                std::ios::binary | std::ios::trunc);
  }
  modules_.push_back(std::move(m));
}

void Runtime::start() {
  if (started_.exchange(true)) return;
  start_ms_ = clock_.now_ms();

  // All workers register with the clock before any of them may sleep;
  // otherwise an early sleeper could drag virtual time past a slower
  // starter's first grid point and wreck replayability.
  auto task_count = static_cast<std::ptrdiff_t>(modules_.size()) + 1;
  ready_latch_ = std::make_unique<std::latch>(task_count);
  go_latch_ = std::make_unique<std::latch>(1);

  for (auto& module : modules_) {
    {
      std::lock_guard<std::mutex> lock(module->mutex);
      transition_locked(*module, ModuleState::kActive, start_ms_);
      if (module->spec.start_deactivated &&
          module->spec.activation_policy == ActivationPolicy::kControlled) {
        transition_locked(*module, ModuleState::kDeactivated, start_ms_);
      }
    }
    Module* m = module.get();
    m->worker = std::thread([this, m] {
      clock_.register_task();
      ready_latch_->count_down();
      go_latch_->wait();
      module_loop(*m);
      clock_.unregister_task();
    });
  }
  supervisor_ = std::thread([this] {
    clock_.register_task();
    ready_latch_->count_down();
    go_latch_->wait();
    supervisor_loop();
    clock_.unregister_task();
  });
  ready_latch_->wait();
  go_latch_->count_down();
}

void Runtime::stop() {
  if (!started_.load() || stopped_.exchange(true)) return;
  stopping_.store(true);
  clock_.stop();
  for (auto& module : modules_) {
    if (module->worker.joinable()) module->worker.join();
  }
  if (supervisor_.joinable()) supervisor_.join();
  const std::int64_t now = clock_.now_ms();
  for (auto& module : modules_) {
    std::lock_guard<std::mutex> lock(module->mutex);
    if (module->state != ModuleState::kStopped) {
      transition_locked(*module, ModuleState::kStopped, now);
    }
    if (module->log.is_open()) module->log.close();
  }
}

Runtime::Module* Runtime::find(const std::string& name) {
  for (auto& module : modules_) {
    if (module->spec.name == name) return module.get();
  }
  return nullptr;
}

ModuleStatus Runtime::status(const std::string& name) {
  Module* m = find(name);
  if (m == nullptr) throw Error("no such module: " + name);
  std::lock_guard<std::mutex> lock(m->mutex);
  return ModuleStatus{m->state, m->restarts, m->last_output_at, m->last_error};
}

std::vector<std::string> Runtime::module_names() {
  std::vector<std::string> names;
  names.reserve(modules_.size());
  for (const auto& module : modules_) names.push_back(module->spec.name);
  return names;
}

std::vector<std::pair<std::int64_t, ModuleState>> Runtime::status_history(
    const std::string& name) {
  Module* m = find(name);
  if (m == nullptr) throw Error("no such module: " + name);
  std::lock_guard<std::mutex> lock(m->mutex);
  return m->history;
}

void Runtime::inject_failure(const std::string& name,
                             const std::string& reason) {
  Module* m = find(name);
  if (m == nullptr) throw Error("no such module: " + name);
  std::lock_guard<std::mutex> lock(m->mutex);
  m->kill_requested = true;
  m->kill_reason = reason;
}

std::map<std::string, ModuleStatus> Runtime::status_all() {
  std::map<std::string, ModuleStatus> all;
  for (auto& module : modules_) {
    std::lock_guard<std::mutex> lock(module->mutex);
    all[module->spec.name] = ModuleStatus{module->state, module->restarts,
                                          module->last_output_at,
                                          module->last_error};
  }
  return all;
}

ModuleStatus Runtime::set_activation(const std::string& name,
                                     ActivationDecision decision) {
  Module* m = find(name);
  if (m == nullptr) throw Error("no such module: " + name);
  bool activated = false;
  bool deactivated = false;
  ModuleStatus result;
  std::int64_t now = clock_.now_ms();
  {
    std::lock_guard<std::mutex> lock(m->mutex);
    if (decision == ActivationDecision::kActivate &&
        m->state == ModuleState::kDeactivated) {
      transition_locked(*m, ModuleState::kActive, now);
      activated = true;
    } else if (decision == ActivationDecision::kDeactivate &&
               m->state == ModuleState::kActive) {
      transition_locked(*m, ModuleState::kDeactivated, now);
      deactivated = true;
    }
    result =
        ModuleStatus{m->state, m->restarts, m->last_output_at, m->last_error};
  }
  if (activated) record(*m, EventKind::kActivate, ModuleState::kActive, "");
  if (deactivated) {
    record(*m, EventKind::kDeactivate, ModuleState::kDeactivated, "");
  }
  return result;
}

bool Runtime::revise_prompt(const std::string& name,
                            const std::string& new_prompt) {
  Module* m = find(name);
  if (m == nullptr) throw Error("no such module: " + name);
  std::lock_guard<std::mutex> lock(m->mutex);
  if (new_prompt.compare(0, m->prompt_prefix.size(), m->prompt_prefix) != 0) {
    diag_.warn("runtime.prompt_rejected",
               "revision for '" + name + "' drops the immutable first line");
    return false;
  }
  if (new_prompt.size() > 4 * m->original_prompt.size()) {
    diag_.warn("runtime.prompt_rejected",
               "revision for '" + name + "' exceeds 4x the original length");
    return false;
  }
  m->spec.system_prompt = new_prompt;
  return true;
}

std::optional<ModuleSpec> Runtime::spec_of(const std::string& name) {
  Module* m = find(name);
  if (m == nullptr) return std::nullopt;
  std::lock_guard<std::mutex> lock(m->mutex);
  return m->spec;
}

std::vector<std::string> Runtime::controlled_modules() {
  std::vector<std::string> names;
  for (const auto& module : modules_) {
    if (module->spec.activation_policy == ActivationPolicy::kControlled) {
      names.push_back(module->spec.name);
    }
  }
  return names;
}

void Runtime::transition_locked(Module& m, ModuleState to, std::int64_t ts) {
  if (!transition_legal(m.state, to)) {
    throw Error(std::string("illegal transition for '") + m.spec.name +
                "': " + module_state_name(m.state) + " -> " +
                module_state_name(to));
  }
  m.state = to;
  m.history.emplace_back(ts, to);
}

void Runtime::record(Module& m, EventKind kind, ModuleState state_after,
                     const std::string& summary) {
  const std::int64_t now = clock_.now_ms();
  timeline_.append(now, m.spec.name, kind);
  if (!m.log.is_open()) return;
  nlohmann::ordered_json line;
  line["ts"] = now;
  line["module"] = m.spec.name;
  line["state"] = module_state_name(state_after);
  line["event"] = event_kind_name(kind);
  line["output_summary"] = summary;
  std::lock_guard<std::mutex> lock(m.log_mutex);
  m.log << line.dump() << '\n';
  m.log.flush();
}

StepInputs Runtime::gather(Module& m) {
  StepInputs inputs;
  inputs.now_ms = clock_.now_ms();
  // Inbox first: query templates may splice the drained bodies.
  if (m.subscription != nullptr) {
    inputs.inbox = m.subscription->drain(options_.inbox_drain_cap);
  }
  for (const InputSource& src : m.spec.inputs) {
    switch (src.kind) {
      case InputSource::Kind::kRecentMemories:
        inputs.recent = memory_.recent(src.count);
        break;
      case InputSource::Kind::kQueryMemories: {
        std::string query = src.text;
        const std::string needle = "{inbox}";
        if (query.find(needle) != std::string::npos) {
          std::string bodies;
          for (const bus::Envelope& env : inputs.inbox) {
            if (!bodies.empty()) bodies += "\n";
            bodies += env.body;
          }
          std::size_t pos = 0;
          while ((pos = query.find(needle, pos)) != std::string::npos) {
            query.replace(pos, needle.size(), bodies);
            pos += bodies.size();
          }
        }
        inputs.query_hits = memory_.query(query, src.count);
        break;
      }
      case InputSource::Kind::kInboxMessages:
        break;  // Drained above, once.
      case InputSource::Kind::kSensorChannel: {
        if (src.fresh_only) {
          auto value =
              sensors_.read_fresh(src.text, m.seen_sensor_seq[src.text]);
          if (value.has_value()) {
            m.seen_sensor_seq[src.text] = value->seq;
            inputs.sensors[src.text] = value->text;
          }
        } else {
          auto value = sensors_.read(src.text);
          if (value.has_value()) inputs.sensors[src.text] = value->text;
        }
        break;
      }
      case InputSource::Kind::kPeerOutput: {
        auto record = memory_.latest_from(src.text);
        if (record.has_value()) inputs.peer_outputs[src.text] = *record;
        break;
      }
    }
  }
  return inputs;
}

std::string Runtime::apply(Module& m, const StepOutputs& outputs) {
  const std::int64_t now = clock_.now_ms();
  auto declares = [&](OutputSink::Kind kind, const std::string& target) {
    for (const OutputSink& sink : m.spec.outputs) {
      if (sink.kind != kind) continue;
      if (kind == OutputSink::Kind::kStoreMemory) return true;
      if (sink.target == target || sink.target == "*") return true;
    }
    return false;
  };

  std::size_t stored = 0;
  std::size_t sent = 0;
  std::size_t sensed = 0;
  for (const MemoryWrite& write : outputs.stores) {
    if (!declares(OutputSink::Kind::kStoreMemory, "")) {
      diag_.warn("runtime.undeclared_output",
                 m.spec.name + " tried to store without a StoreMemory sink");
      continue;
    }
    memory_.store(write.text, m.spec.name, write.tags);
    ++stored;
  }
  for (const Send& send : outputs.sends) {
    if (!declares(OutputSink::Kind::kSendTo, send.to)) {
      diag_.warn("runtime.undeclared_output",
                 m.spec.name + " tried to send to undeclared '" + send.to +
                     "'");
      continue;
    }
    try {
      bus_.publish(
          bus_.make_envelope(m.spec.name, send.to, send.body, send.headers));
      ++sent;
    } catch (const BusStoppedError&) {
      // Shutdown race: the run is ending, the send is moot.
    }
  }
  for (const SensorWrite& write : outputs.sensor_writes) {
    if (!declares(OutputSink::Kind::kSensorChannel, write.channel)) {
      diag_.warn("runtime.undeclared_output",
                 m.spec.name + " tried to write undeclared channel '" +
                     write.channel + "'");
      continue;
    }
    sensors_.write(write.channel, write.text, now);
    ++sensed;
  }
  if (stored + sent + sensed == 0) return "";
  return "stored=" + std::to_string(stored) + " sent=" + std::to_string(sent) +
         " sensors=" + std::to_string(sensed);
}

void Runtime::fail_module(Module& m, const std::string& reason) {
  const std::int64_t now = clock_.now_ms();
  {
    std::lock_guard<std::mutex> lock(m.mutex);
    transition_locked(m, ModuleState::kFailed, now);
    m.last_error = reason;
    m.restart_due_at = now + m.current_backoff_ms;
    m.current_backoff_ms = std::min(
        options_.supervisor.backoff_cap_ms,
        static_cast<std::int64_t>(static_cast<double>(m.current_backoff_ms) *
                                  options_.supervisor.backoff_factor));
  }
  record(m, EventKind::kFail, ModuleState::kFailed, reason);
}

void Runtime::module_loop(Module& m) {
  const std::int64_t interval =
      std::max(m.spec.trigger.interval_ms, Trigger::kMinIntervalMs);
  std::int64_t next = start_ms_ + m.spec.phase_offset_ms;
  for (;;) {
    if (!clock_.sleep_until(next)) return;  // Clock stopped: run is over.
    if (stopping_.load()) return;
    next += interval;

    ModuleState state;
    bool kill = false;
    std::string kill_reason;
    {
      std::lock_guard<std::mutex> lock(m.mutex);
      state = m.state;
      if (state == ModuleState::kActive && m.kill_requested) {
        kill = true;
        kill_reason = m.kill_reason;
        m.kill_requested = false;
      }
    }
    if (state == ModuleState::kStopped) return;
    if (state != ModuleState::kActive) continue;  // Silent wake.
    if (kill) {
      fail_module(m, kill_reason);
      continue;
    }

    try {
      StepInputs inputs = gather(m);
      if (m.spec.trigger.kind == Trigger::Kind::kOnMessage &&
          inputs.inbox.empty()) {
        continue;  // Message-driven module with no mail: no step.
      }
      ModuleSpec spec_snapshot;
      {
        std::lock_guard<std::mutex> lock(m.mutex);
        spec_snapshot = m.spec;
      }
      ModuleContext ctx;
      ctx.spec = &spec_snapshot;
      ctx.gateway = &gateway_;
      ctx.memory = &memory_;
      ctx.diag = &diag_;
      ctx.control = this;
      ctx.clock = &clock_;
      StepOutputs outputs = m.behavior->step(inputs, ctx);
      std::string summary = apply(m, outputs);
      const bool produced = outputs.produced();
      if (produced) {
        std::lock_guard<std::mutex> lock(m.mutex);
        m.last_output_at = clock_.now_ms();
      }
      // On a healthy step the backoff schedule starts over.
      {
        std::lock_guard<std::mutex> lock(m.mutex);
        m.current_backoff_ms = options_.supervisor.backoff_base_ms;
      }
      record(m, produced ? EventKind::kOutput : EventKind::kStep,
             ModuleState::kActive, summary);
    } catch (const std::exception& e) {
      fail_module(m, e.what());
    } catch (...) {
      fail_module(m, "non-standard exception");
    }
  }
}

void Runtime::supervisor_loop() {
  std::int64_t next = start_ms_ + options_.supervisor_phase_ms;
  for (;;) {
    if (!clock_.sleep_until(next)) return;
    if (stopping_.load()) return;
    next += options_.supervisor_interval_ms;
    if (!options_.supervisor.restart) continue;

    const std::int64_t now = clock_.now_ms();
    for (auto& module : modules_) {
      Module& m = *module;
      bool restarted = false;
      bool alert = false;
      {
        std::lock_guard<std::mutex> lock(m.mutex);
        if (m.state != ModuleState::kFailed || now < m.restart_due_at) {
          continue;
        }
        while (!m.restart_times.empty() &&
               m.restart_times.front() <= now - kHourMs) {
          m.restart_times.pop_front();
        }
        if (static_cast<int>(m.restart_times.size()) >=
            options_.supervisor.max_restarts_per_hour) {
          if (!m.alerted) {
            m.alerted = true;
            m.last_error = "restart budget exhausted; module stays failed";
            alert = true;
          }
        } else {
          m.behavior = m.factory();  // Fresh state: the old one died.
          m.restarts += 1;
          m.restart_times.push_back(now);
          m.alerted = false;
          transition_locked(m, ModuleState::kActive, now);
          restarted = true;
        }
      }
      if (restarted) {
        record(m, EventKind::kRestart, ModuleState::kActive,
               "restart #" + std::to_string(m.restarts));
      }
      if (alert) {
        diag_.log(LogLevel::kError, "supervisor.alert",
                  "module '" + m.spec.name +
                      "' exceeded max restarts per hour and stays failed");
      }
    }
  }
}

}  // namespace cma::runtime
