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

#include "cma/harness/runner.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <latch>
#include <limits>
#include <thread>
#include <utility>

#include "cma/bus/adapter.hpp"
#include "cma/common/clock.hpp"
#include "cma/common/errors.hpp"
#include "cma/gateway/http.hpp"
#include "cma/gateway/limiter.hpp"
#include "cma/gateway/script.hpp"
#include "cma/memory/embedder.hpp"
#include "cma/memory/store.hpp"
#include "cma/runtime/runtime.hpp"
#include "cma/runtime/sensors.hpp"

namespace cma::harness {

namespace {

namespace fs = std::filesystem;
using cma::runtime::Trigger;

/// Rounds up to the next instant congruent to 5 mod 10. Module wake grids
/// sit on multiples of 10 and the supervisor on 7 mod 10, so synthesized
/// injections never share a virtual instant with either.
std::int64_t next_injection_slot(std::int64_t at_ms) {
  const std::int64_t rem = at_ms % 10;
  return at_ms + (5 - rem + 10) % 10;
}

std::string pick_log_dir(const RunOptions& options,
                         const config::AgentConfig& config) {
  if (!options.log_dir.empty()) return options.log_dir;
  fs::path base = config.logging.directory.empty()
                      ? fs::temp_directory_path() / "cma-runs"
                      : fs::path(config.logging.directory);
  std::error_code ec;
  fs::create_directories(base, ec);
  for (int i = 1;; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "run-%04d", i);
    fs::path candidate = base / name;
    if (!fs::exists(candidate, ec)) return candidate.string();
  }
}

/// The default recipient of untargeted user utterances: the first
/// message-driven module.
std::string default_utterance_target(const config::AgentConfig& config) {
  for (const auto& resolved : config.modules) {
    if (resolved.spec.trigger.kind != Trigger::Kind::kTick) {
      return resolved.spec.name;
    }
  }
  return "";
}

}  // namespace

bool RunReport::all_assertions_passed() const {
  return std::all_of(assertions.begin(), assertions.end(),
                     [](const AssertionResult& r) { return r.pass; });
}

std::unique_ptr<cma::gateway::Gateway> build_gateway(
    const config::GatewaySettings& settings,
    const std::string& rules_override, std::uint64_t seed) {
  namespace gw = cma::gateway;
  std::unique_ptr<gw::Gateway> inner;
  if (!rules_override.empty()) {
    inner = gw::make_scripted_gateway(gw::load_script(rules_override));
  } else if (settings.backend == "scripted") {
    std::vector<gw::ScriptRule> rules;
    if (!settings.rules_path.empty()) {
      rules = gw::load_script(settings.rules_path);
    }
    inner = gw::make_scripted_gateway(std::move(rules));
  } else if (settings.backend == "echo") {
    inner = gw::make_echo_gateway();
  } else if (settings.backend == "http") {
    gw::HttpGateway::Options opts;
    opts.base_url = settings.base_url;
    opts.seed = seed;
    if (const char* key = std::getenv(settings.api_key_env.c_str())) {
      opts.api_key = key;
    }
    inner = gw::make_http_gateway(std::move(opts));
  } else {
    throw ConfigError("unknown gateway backend: " + settings.backend);
  }
  return gw::make_limited_gateway(std::move(inner), settings.max_concurrent);
}

std::vector<Event> with_silence_windows(const ScenarioScript& script) {
  std::vector<Event> events = script.events;
  if (script.silence_timeout_ms <= 0) return events;

  std::vector<Event> synthesized;
  auto add_mode = [&](std::int64_t at_ms, const std::string& mode) {
    if (at_ms > script.duration_ms) return;
    Event event;
    event.kind = Event::Kind::kSensorWrite;
    event.at_ms = at_ms;
    event.channel = "interaction_mode";
    event.text = mode;
    synthesized.push_back(std::move(event));
  };

  // The run opens in interactive mode; each silent stretch longer than the
  // timeout flips it to self-improvement until the next utterance.
  add_mode(next_injection_slot(0), "interactive");
  std::int64_t last_interaction = 0;
  for (const auto& event : script.events) {
    if (event.kind != Event::Kind::kUserUtterance) continue;
    if (event.at_ms - last_interaction > script.silence_timeout_ms) {
      add_mode(next_injection_slot(last_interaction + script.silence_timeout_ms),
               "self-improvement");
    }
    add_mode(event.at_ms, "interactive");
    last_interaction = event.at_ms;
  }
  if (script.duration_ms - last_interaction > script.silence_timeout_ms) {
    add_mode(next_injection_slot(last_interaction + script.silence_timeout_ms),
             "self-improvement");
  }

  events.insert(events.end(), synthesized.begin(), synthesized.end());
  std::stable_sort(events.begin(), events.end(),
                   [](const Event& a, const Event& b) {
                     return a.at_ms < b.at_ms;
                   });
  return events;
}

RunReport run_scenario(const ScenarioScript& script,
                       const config::AgentConfig& config,
                       const RunOptions& options) {
  DiagnosticLog diag(options.verbose);

  std::unique_ptr<Clock> clock;
  if (options.use_virtual_clock) {
    clock = std::make_unique<VirtualClock>();
  } else {
    clock = std::make_unique<RealClock>(options.real_clock_factor);
  }

  bus::Bus bus({config.agent_id, 1024}, *clock);
  cma::runtime::SensorBoard sensors;
  cma::runtime::TimelineRecorder timeline;

  auto embedder =
      std::make_shared<cma::memory::HashedBagEmbedder>(config.memory.dimension);
  cma::memory::MemoryStore store(
      embedder, {config.memory.capacity, config.memory.persist_path,
                 clock.get(), false});
  TrackingMemory tracking(store);

  const std::string rules_override = options.gateway_rules_override.empty()
                                         ? script.gateway_rules
                                         : options.gateway_rules_override;
  auto gateway = build_gateway(config.gateway, rules_override, script.seed);

  RunReport report;
  report.log_dir = pick_log_dir(options, config);

  cma::runtime::Runtime::Options runtime_options;
  runtime_options.log_dir = report.log_dir;
  cma::runtime::Runtime runtime(*clock, bus, tracking, *gateway, sensors,
                                timeline, diag, runtime_options);
  for (const auto& resolved : config.modules) {
    runtime.spawn(resolved.spec, resolved.factory);
  }

  // The operator inbox receives module replies to injected utterances.
  auto operator_sub = bus.subscribe("operator");

  std::unique_ptr<bus::ExternalAdapter> adapter;
  if (options.connect_external && config.bus.mode == "external") {
    try {
      adapter =
          bus::external_adapter_connect(bus, config.bus.broker_address, &diag);
    } catch (const MqttError& err) {
      diag.warn("harness.adapter",
                std::string("external broker unavailable, running local-only: ") +
                    err.what());
    }
  }

  const std::vector<Event> events = with_silence_windows(script);
  const std::string default_target = default_utterance_target(config);

  std::vector<AssertionResult> results;
  std::vector<Event> deferred;  // counters_conserved: valid after shutdown.
  std::int64_t start_ms = 0;

  // Both the injector and this (stopping) thread register with the clock
  // before any module runs: a virtual clock only advances when every
  // registered task sleeps, so neither scripted events nor the run's end
  // can be skipped over.
  std::latch injector_ready(1);
  std::latch go(1);
  std::thread injector([&] {
    clock->register_task();
    injector_ready.count_down();
    go.wait();
    for (const Event& event : events) {
      if (!clock->sleep_until(start_ms + event.at_ms)) break;
      try {
        switch (event.kind) {
          case Event::Kind::kSensorWrite:
            sensors.write(event.channel, event.text, clock->now_ms());
            break;
          case Event::Kind::kUserUtterance: {
            const std::string& target =
                event.module.empty() ? default_target : event.module;
            if (target.empty()) {
              diag.warn("harness.inject",
                        "no message-driven module for utterance",
                        clock->now_ms());
              break;
            }
            bus.publish(bus.make_envelope("operator", target, event.text));
            break;
          }
          case Event::Kind::kKillModule:
            runtime.inject_failure(event.module, "scenario kill");
            break;
          case Event::Kind::kNetworkDropAdapter:
            if (adapter) {
              adapter->disconnect();
            } else {
              diag.warn("harness.inject", "no external adapter to drop",
                        clock->now_ms());
            }
            break;
          case Event::Kind::kAssertion: {
            if (event.predicate_id == "counters_conserved") {
              deferred.push_back(event);
              break;
            }
            PredicateContext ctx;
            ctx.config = &config;
            ctx.runtime = &runtime;
            ctx.memory = &tracking;
            ctx.bus = &bus;
            ctx.timeline = &timeline;
            ctx.tracking = &tracking;
            ctx.start_ms = start_ms;
            ctx.now_ms = clock->now_ms();
            results.push_back(evaluate_predicate(event, ctx));
            break;
          }
        }
      } catch (const std::exception& err) {
        diag.warn("harness.inject",
                  std::string(event_kind_name(event.kind)) +
                      " event failed: " + err.what(),
                  clock->now_ms());
      }
    }
    clock->unregister_task();
  });

  injector_ready.wait();
  clock->register_task();
  runtime.start();
  start_ms = runtime.start_ms();
  report.start_ms = start_ms;
  go.count_down();

  // End the run 3 ms past the scripted duration: off the module grid
  // (multiples of 10), the supervisor cadence (7 mod 10), and the
  // injection slots (5 mod 10), so shutdown never races a scripted wake.
  clock->sleep_until(start_ms + script.duration_ms + 3);
  runtime.stop();
  injector.join();
  clock->unregister_task();

  report.final_statuses = runtime.status_all();
  while (operator_sub->pending() > 0) {
    auto batch = operator_sub->drain(256);
    report.operator_inbox.insert(report.operator_inbox.end(), batch.begin(),
                                 batch.end());
  }
  bus.shutdown();

  for (const Event& event : deferred) {
    PredicateContext ctx;
    ctx.config = &config;
    ctx.runtime = &runtime;
    ctx.memory = &tracking;
    ctx.bus = &bus;
    ctx.timeline = &timeline;
    ctx.tracking = &tracking;
    ctx.start_ms = start_ms;
    ctx.now_ms = clock->now_ms();
    results.push_back(evaluate_predicate(event, ctx));
  }

  report.timeline = timeline.snapshot();
  report.assertions = std::move(results);
  report.counters = bus.counters();
  report.diagnostics = diag.entries();
  report.end_ms = clock->now_ms();
  return report;
}

}  // namespace cma::harness
