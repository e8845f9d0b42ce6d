// Runtime tests: sensor board, timeline, module lifecycle, deterministic
// wake grids, supervisor restarts with backoff, activation control, and
// prompt revision rules.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cma/bus/bus.hpp"
#include "cma/common/clock.hpp"
#include "cma/common/errors.hpp"
#include "cma/common/log.hpp"
#include "cma/gateway/script.hpp"
#include "cma/memory/embedder.hpp"
#include "cma/memory/store.hpp"
#include "cma/runtime/activation.hpp"
#include "cma/runtime/runtime.hpp"
#include "cma/runtime/sensors.hpp"
#include "cma/runtime/spec.hpp"
#include "cma/runtime/timeline.hpp"

using namespace cma::runtime;
using cma::DiagnosticLog;
using cma::VirtualClock;
using cma::memory::HashedBagEmbedder;
using cma::memory::MemoryStore;

namespace {

/// Behavior wrapping a plain function, so tests can inline module logic.
class FnBehavior : public Behavior {
 public:
  using Fn = std::function<StepOutputs(const StepInputs&, ModuleContext&)>;
  explicit FnBehavior(Fn fn) : fn_(std::move(fn)) {}
  StepOutputs step(const StepInputs& inputs, ModuleContext& ctx) override {
    return fn_(inputs, ctx);
  }

 private:
  Fn fn_;
};

BehaviorFactory fn_factory(FnBehavior::Fn fn) {
  return [fn = std::move(fn)]() -> std::unique_ptr<Behavior> {
    return std::make_unique<FnBehavior>(fn);
  };
}

BehaviorFactory idle_factory() {
  return fn_factory([](const StepInputs&, ModuleContext&) {
    return StepOutputs{};
  });
}

/// Full stack on a virtual clock. The test thread registers with the clock
/// (mirroring the harness runner), so module wakes land on exact instants.
struct Fixture {
  VirtualClock clock;
  DiagnosticLog diag;
  cma::bus::Bus bus;
  SensorBoard sensors;
  TimelineRecorder timeline;
  std::shared_ptr<HashedBagEmbedder> embedder;
  MemoryStore memory;
  cma::gateway::ScriptedGateway gateway;  // Pure echo by default.
  Runtime runtime;

  explicit Fixture(Runtime::Options options = {})
      : bus({"testbot", 1024}, clock),
        embedder(std::make_shared<HashedBagEmbedder>(32)),
        memory(embedder, {.capacity = 10000, .clock = &clock}),
        runtime(clock, bus, memory, gateway, sensors, timeline, diag,
                std::move(options)) {}

  std::int64_t start() {
    clock.register_task();
    runtime.start();
    return runtime.start_ms();
  }
  void sleep_to(std::int64_t abs_ms) { clock.sleep_until(abs_ms); }
  void finish() {
    runtime.stop();
    clock.unregister_task();
  }

  std::vector<std::pair<std::int64_t, EventKind>> events_of(
      const std::string& module) {
    std::vector<std::pair<std::int64_t, EventKind>> out;
    for (const auto& event : timeline.snapshot()) {
      if (event.module == module) out.emplace_back(event.ts_ms, event.kind);
    }
    return out;
  }
};

ModuleSpec tick_spec(const std::string& name, std::int64_t interval,
                     std::int64_t phase) {
  ModuleSpec spec;
  spec.name = name;
  spec.system_prompt = "You are " + name + ".";
  spec.trigger = Trigger::Tick(interval);
  spec.phase_offset_ms = phase;
  return spec;
}

}  // namespace

TEST_CASE("sensor board sequences and freshness") {
  SensorBoard board;
  CHECK_FALSE(board.read("temp").has_value());
  CHECK(board.channels().empty());

  board.write("temp", "20C", 100);
  auto first = board.read("temp");
  REQUIRE(first.has_value());
  CHECK(first->text == "20C");
  CHECK(first->ts_ms == 100);
  const auto seq1 = first->seq;

  board.write("temp", "21C", 200);
  auto second = board.read("temp");
  REQUIRE(second.has_value());
  CHECK(second->text == "21C");
  CHECK(second->seq > seq1);

  // Freshness is sequence-based: an already-seen value is withheld.
  CHECK(board.read_fresh("temp", second->seq).has_value() == false);
  auto fresh = board.read_fresh("temp", seq1);
  REQUIRE(fresh.has_value());
  CHECK(fresh->text == "21C");
  // Same text again still bumps the sequence.
  board.write("temp", "21C", 300);
  CHECK(board.read_fresh("temp", second->seq).has_value());

  board.write("soil", "dry", 300);
  auto channels = board.channels();
  REQUIRE(channels.size() == 2);
  CHECK(channels[0] == "soil");
  CHECK(channels[1] == "temp");
}

TEST_CASE("timeline recorder and event kind names") {
  TimelineRecorder recorder;
  CHECK(recorder.size() == 0);
  recorder.append(5, "a", EventKind::kStep);
  recorder.append(7, "b", EventKind::kFail);
  auto events = recorder.snapshot();
  REQUIRE(events.size() == 2);
  CHECK(events[0] == TimelineEvent{5, "a", EventKind::kStep});
  CHECK(events[1] == TimelineEvent{7, "b", EventKind::kFail});

  for (EventKind kind :
       {EventKind::kStep, EventKind::kOutput, EventKind::kFail,
        EventKind::kRestart, EventKind::kActivate, EventKind::kDeactivate}) {
    auto round = event_kind_from_name(event_kind_name(kind));
    REQUIRE(round.has_value());
    CHECK(*round == kind);
  }
  CHECK_FALSE(event_kind_from_name("bogus").has_value());
}

TEST_CASE("transition legality table") {
  using S = ModuleState;
  const std::vector<S> all = {S::kCreated, S::kActive, S::kDeactivated,
                              S::kFailed, S::kStopped};
  auto expected = [](S from, S to) {
    if (to == S::kStopped) return true;
    switch (from) {
      case S::kCreated:
        return to == S::kActive;
      case S::kActive:
        return to == S::kDeactivated || to == S::kFailed;
      case S::kDeactivated:
        return to == S::kActive;
      case S::kFailed:
        return to == S::kActive;
      case S::kStopped:
        return false;
    }
    return false;
  };
  for (S from : all) {
    for (S to : all) {
      CHECK_MESSAGE(transition_legal(from, to) == expected(from, to),
                    module_state_name(from) << " -> "
                                            << module_state_name(to));
    }
  }
}

TEST_CASE("spawn validation") {
  Fixture f;
  f.runtime.spawn(tick_spec("alpha", 100, 0), idle_factory());
  CHECK_THROWS_AS(f.runtime.spawn(tick_spec("alpha", 100, 0), idle_factory()),
                  cma::DuplicateModuleError);
  CHECK_THROWS_AS(
      f.runtime.spawn(tick_spec("bad/name", 100, 0), idle_factory()),
      cma::InvalidNameError);
  CHECK_THROWS_AS(f.runtime.spawn(tick_spec("fast", 5, 0), idle_factory()),
                  cma::ConfigError);

  auto names = f.runtime.module_names();
  REQUIRE(names.size() == 1);
  CHECK(names[0] == "alpha");

  const auto start = f.start();
  CHECK_THROWS_AS(f.runtime.spawn(tick_spec("late", 100, 0), idle_factory()),
                  cma::Error);
  f.sleep_to(start + 10);
  f.finish();
}

TEST_CASE("tick modules step on their exact wake grid") {
  Fixture f;
  f.runtime.spawn(tick_spec("ticker", 100, 0), idle_factory());
  f.runtime.spawn(tick_spec("offset", 100, 10), idle_factory());

  const auto start = f.start();
  f.sleep_to(start + 250);
  f.finish();

  auto ticker = f.events_of("ticker");
  REQUIRE(ticker.size() == 3);
  for (std::size_t i = 0; i < ticker.size(); ++i) {
    CHECK(ticker[i].first == start + 100 * static_cast<std::int64_t>(i));
    CHECK(ticker[i].second == EventKind::kStep);
  }
  auto offset = f.events_of("offset");
  REQUIRE(offset.size() == 3);
  for (std::size_t i = 0; i < offset.size(); ++i) {
    CHECK(offset[i].first == start + 10 + 100 * static_cast<std::int64_t>(i));
  }
}

TEST_CASE("message-driven modules step exactly once per delivery") {
  Fixture f;
  std::mutex mutex;
  std::vector<std::string> seen;

  ModuleSpec spec = tick_spec("listener", 50, 0);
  spec.trigger = Trigger::OnMessage(50);
  spec.inputs = {InputSource::InboxMessages()};
  spec.outputs = {OutputSink::StoreMemory()};
  f.runtime.spawn(spec, fn_factory([&](const StepInputs& in, ModuleContext&) {
                    StepOutputs out;
                    for (const auto& env : in.inbox) {
                      std::lock_guard lock(mutex);
                      seen.push_back(env.body);
                      out.stores.push_back({"got:" + env.body, {}});
                    }
                    return out;
                  }));

  const auto start = f.start();
  f.sleep_to(start + 25);
  f.bus.publish(f.bus.make_envelope("operator", "listener", "one"));
  f.bus.publish(f.bus.make_envelope("operator", "listener", "two"));
  f.sleep_to(start + 125);
  f.bus.publish(f.bus.make_envelope("operator", "listener", "three"));
  f.sleep_to(start + 180);
  f.finish();

  // Polls at +0 (empty), +50 (two), +100 (empty), +150 (one): two steps.
  auto events = f.events_of("listener");
  REQUIRE(events.size() == 2);
  CHECK(events[0] == std::pair{start + 50, EventKind::kOutput});
  CHECK(events[1] == std::pair{start + 150, EventKind::kOutput});
  CHECK(seen == std::vector<std::string>{"one", "two", "three"});
  CHECK(f.memory.count() == 3);
}

TEST_CASE("both-trigger modules step every tick, mail or not") {
  Fixture f;
  ModuleSpec spec = tick_spec("hybrid", 100, 0);
  spec.trigger = Trigger::Both(100);
  spec.inputs = {InputSource::InboxMessages()};
  spec.outputs = {OutputSink::StoreMemory()};
  f.runtime.spawn(spec, fn_factory([](const StepInputs& in, ModuleContext&) {
                    StepOutputs out;
                    if (!in.inbox.empty()) {
                      out.stores.push_back({"mail", {}});
                    }
                    return out;
                  }));

  const auto start = f.start();
  f.sleep_to(start + 25);
  f.bus.publish(f.bus.make_envelope("operator", "hybrid", "hi"));
  f.sleep_to(start + 150);
  f.finish();

  auto events = f.events_of("hybrid");
  REQUIRE(events.size() == 2);
  CHECK(events[0] == std::pair{start + 0, EventKind::kStep});
  CHECK(events[1] == std::pair{start + 100, EventKind::kOutput});
}

TEST_CASE("inbox drains are capped per step") {
  Fixture f({.inbox_drain_cap = 16});
  std::mutex mutex;
  std::vector<std::size_t> batch_sizes;

  ModuleSpec spec = tick_spec("sink", 100, 0);
  spec.trigger = Trigger::OnMessage(100);
  spec.inputs = {InputSource::InboxMessages()};
  f.runtime.spawn(spec, fn_factory([&](const StepInputs& in, ModuleContext&) {
                    std::lock_guard lock(mutex);
                    batch_sizes.push_back(in.inbox.size());
                    return StepOutputs{};
                  }));

  const auto start = f.start();
  f.sleep_to(start + 25);
  for (int i = 0; i < 20; ++i) {
    f.bus.publish(f.bus.make_envelope("operator", "sink",
                                      "m" + std::to_string(i)));
  }
  f.sleep_to(start + 250);
  f.finish();

  REQUIRE(batch_sizes.size() == 2);
  CHECK(batch_sizes[0] == 16);
  CHECK(batch_sizes[1] == 4);
}

TEST_CASE("a crashing module restarts on the backoff schedule") {
  Fixture f;
  f.runtime.spawn(tick_spec("crasher", 1000, 0),
                  fn_factory([](const StepInputs&,
                                ModuleContext&) -> StepOutputs {
                    throw std::runtime_error("boom");
                  }));
  f.runtime.spawn(tick_spec("steady", 500, 10), idle_factory());

  const auto start = f.start();
  f.sleep_to(start + 4500);
  f.finish();

  // Failures on the 1000 ms grid; restarts at the first supervisor wake
  // (7 mod 50 ms) past fail + backoff, backoff doubling 250/500/1000/...
  // without reset because no step ever succeeds. The 3000 ms wake falls
  // while still Failed (due exactly then, supervisor lands at 3007), so it
  // is silent.
  auto events = f.events_of("crasher");
  std::vector<std::pair<std::int64_t, EventKind>> expected = {
      {start + 0, EventKind::kFail},      {start + 257, EventKind::kRestart},
      {start + 1000, EventKind::kFail},   {start + 1507, EventKind::kRestart},
      {start + 2000, EventKind::kFail},   {start + 3007, EventKind::kRestart},
      {start + 4000, EventKind::kFail},
  };
  CHECK(events == expected);

  auto status = f.runtime.status("crasher");
  CHECK(status.restarts == 3);
  REQUIRE(status.last_error.has_value());
  CHECK(*status.last_error == "boom");

  // Fault isolation: the healthy neighbor kept its full grid.
  auto steady = f.events_of("steady");
  CHECK(steady.size() == 9);  // +10, +510, ..., +4010
  for (const auto& [ts, kind] : steady) {
    CHECK(kind == EventKind::kStep);
    CHECK((ts - start - 10) % 500 == 0);
  }

  // Every module's recorded history walks only legal edges.
  for (const auto& name : f.runtime.module_names()) {
    auto history = f.runtime.status_history(name);
    REQUIRE(!history.empty());
    CHECK(history.front().second == ModuleState::kCreated);
    for (std::size_t i = 1; i < history.size(); ++i) {
      CHECK(transition_legal(history[i - 1].second, history[i].second));
    }
    CHECK(history.back().second == ModuleState::kStopped);
  }
}

TEST_CASE("a healthy step resets the backoff schedule") {
  Fixture f;
  auto step_count = std::make_shared<std::atomic<int>>(0);
  f.runtime.spawn(
      tick_spec("flaky", 1000, 0),
      fn_factory([step_count](const StepInputs&,
                              ModuleContext&) -> StepOutputs {
        if (step_count->fetch_add(1) == 0) throw std::runtime_error("first");
        return StepOutputs{};
      }));

  const auto start = f.start();
  f.sleep_to(start + 1500);
  f.runtime.inject_failure("flaky", "operator kill");
  f.sleep_to(start + 2400);
  f.finish();

  // fail@0 (backoff 250, then doubled), restart@257, healthy step@1000
  // (backoff resets to 250), injected fail@2000, restart@2257 — the same
  // +257 delta proves the reset.
  auto events = f.events_of("flaky");
  std::vector<std::pair<std::int64_t, EventKind>> expected = {
      {start + 0, EventKind::kFail},
      {start + 257, EventKind::kRestart},
      {start + 1000, EventKind::kStep},
      {start + 2000, EventKind::kFail},
      {start + 2257, EventKind::kRestart},
  };
  CHECK(events == expected);

  auto status = f.runtime.status("flaky");
  CHECK(status.restarts == 2);
  REQUIRE(status.last_error.has_value());
  CHECK(*status.last_error == "operator kill");
}

TEST_CASE("restart rate limiting alerts and holds the module failed") {
  Runtime::Options options;
  options.supervisor.max_restarts_per_hour = 2;
  Fixture f(std::move(options));
  f.runtime.spawn(tick_spec("doomed", 100, 0),
                  fn_factory([](const StepInputs&,
                                ModuleContext&) -> StepOutputs {
                    throw std::runtime_error("always");
                  }));

  const auto start = f.start();
  f.sleep_to(start + 5000);
  f.finish();

  auto status = f.runtime.status("doomed");
  CHECK(status.restarts == 2);
  CHECK(f.diag.count("supervisor.alert") == 1);
  REQUIRE(status.last_error.has_value());
  CHECK(*status.last_error ==
        "restart budget exhausted; module stays failed");

  // After the budget ran out there are exactly 2 restart events.
  int restarts = 0;
  for (const auto& [ts, kind] : f.events_of("doomed")) {
    if (kind == EventKind::kRestart) ++restarts;
  }
  CHECK(restarts == 2);
}

TEST_CASE("inject_failure waits for the next wake and names the reason") {
  Fixture f;
  f.runtime.spawn(tick_spec("victim", 100, 0), idle_factory());
  CHECK_THROWS_AS(f.runtime.inject_failure("ghost", "x"), cma::Error);

  const auto start = f.start();
  f.sleep_to(start + 150);
  f.runtime.inject_failure("victim", "scenario kill");
  // Not yet failed: the mark is consumed at the next wake.
  CHECK(f.runtime.status("victim").state == ModuleState::kActive);
  f.sleep_to(start + 230);
  CHECK(f.runtime.status("victim").state == ModuleState::kFailed);
  auto status = f.runtime.status("victim");
  REQUIRE(status.last_error.has_value());
  CHECK(*status.last_error == "scenario kill");
  f.finish();

  auto events = f.events_of("victim");
  REQUIRE(events.size() == 3);
  CHECK(events[0] == std::pair{start + 0, EventKind::kStep});
  CHECK(events[1] == std::pair{start + 100, EventKind::kStep});
  CHECK(events[2] == std::pair{start + 200, EventKind::kFail});
}

TEST_CASE("activation control suspends and resumes a module") {
  Fixture f;
  ModuleSpec spec = tick_spec("worker", 100, 0);
  spec.activation_policy = ActivationPolicy::kControlled;
  f.runtime.spawn(spec, idle_factory());

  auto controlled = f.runtime.controlled_modules();
  REQUIRE(controlled.size() == 1);
  CHECK(controlled[0] == "worker");

  const auto start = f.start();
  f.sleep_to(start + 150);
  auto after_deactivate =
      f.runtime.set_activation("worker", ActivationDecision::kDeactivate);
  CHECK(after_deactivate.state == ModuleState::kDeactivated);
  // Idempotent: deactivating again changes nothing and records nothing.
  f.runtime.set_activation("worker", ActivationDecision::kDeactivate);
  // NoChange never transitions.
  f.runtime.set_activation("worker", ActivationDecision::kNoChange);

  f.sleep_to(start + 350);
  auto after_activate =
      f.runtime.set_activation("worker", ActivationDecision::kActivate);
  CHECK(after_activate.state == ModuleState::kActive);
  f.runtime.set_activation("worker", ActivationDecision::kActivate);
  f.sleep_to(start + 450);
  f.finish();

  auto events = f.events_of("worker");
  std::vector<std::pair<std::int64_t, EventKind>> expected = {
      {start + 0, EventKind::kStep},
      {start + 100, EventKind::kStep},
      {start + 150, EventKind::kDeactivate},  // wakes at 200/300 are silent
      {start + 350, EventKind::kActivate},
      {start + 400, EventKind::kStep},
  };
  CHECK(events == expected);
}

TEST_CASE("messages sent while deactivated buffer until resumption") {
  Fixture f;
  ModuleSpec spec = tick_spec("inboxed", 50, 0);
  spec.trigger = Trigger::OnMessage(50);
  spec.inputs = {InputSource::InboxMessages()};
  spec.outputs = {OutputSink::StoreMemory()};
  spec.activation_policy = ActivationPolicy::kControlled;
  f.runtime.spawn(spec, fn_factory([](const StepInputs& in, ModuleContext&) {
                    StepOutputs out;
                    for (const auto& env : in.inbox) {
                      out.stores.push_back({env.body, {}});
                    }
                    return out;
                  }));

  const auto start = f.start();
  f.sleep_to(start + 25);
  f.runtime.set_activation("inboxed", ActivationDecision::kDeactivate);
  f.sleep_to(start + 75);
  f.bus.publish(f.bus.make_envelope("operator", "inboxed", "while-down"));
  f.sleep_to(start + 175);
  CHECK(f.memory.count() == 0);  // Still suspended: nothing consumed.
  f.runtime.set_activation("inboxed", ActivationDecision::kActivate);
  f.sleep_to(start + 225);
  f.finish();

  CHECK(f.memory.count() == 1);
  auto record = f.memory.latest_from("inboxed");
  REQUIRE(record.has_value());
  CHECK(record->text == "while-down");
}

TEST_CASE("controlled modules can start deactivated") {
  Fixture f;
  ModuleSpec spec = tick_spec("dormant", 100, 0);
  spec.activation_policy = ActivationPolicy::kControlled;
  spec.start_deactivated = true;
  f.runtime.spawn(spec, idle_factory());

  const auto start = f.start();
  f.sleep_to(start + 250);
  CHECK(f.runtime.status("dormant").state == ModuleState::kDeactivated);
  CHECK(f.events_of("dormant").empty());
  f.runtime.set_activation("dormant", ActivationDecision::kActivate);
  f.sleep_to(start + 350);
  f.finish();

  auto events = f.events_of("dormant");
  REQUIRE(events.size() == 2);
  CHECK(events[0].second == EventKind::kActivate);
  CHECK(events[1] == std::pair{start + 300, EventKind::kStep});

  auto history = f.runtime.status_history("dormant");
  REQUIRE(history.size() >= 3);
  CHECK(history[0].second == ModuleState::kCreated);
  CHECK(history[1].second == ModuleState::kActive);
  CHECK(history[2].second == ModuleState::kDeactivated);
}

TEST_CASE("prompt revision keeps the first line and caps growth") {
  Fixture f;
  ModuleSpec spec = tick_spec("writer", 100, 0);
  spec.system_prompt = "You are writer.\nDetails follow.";
  f.runtime.spawn(spec, idle_factory());

  // Same first line, new body: accepted and visible.
  CHECK(f.runtime.revise_prompt("writer", "You are writer.\nNew body."));
  auto revised = f.runtime.spec_of("writer");
  REQUIRE(revised.has_value());
  CHECK(revised->system_prompt == "You are writer.\nNew body.");

  // Dropping or altering the first line: rejected.
  CHECK_FALSE(f.runtime.revise_prompt("writer", "You are not.\nNew body."));
  CHECK(f.diag.count("runtime.prompt_rejected") == 1);
  CHECK_FALSE(f.runtime.revise_prompt("writer", "You are"));
  CHECK(f.diag.count("runtime.prompt_rejected") == 2);

  // Growth cap: at most 4x the original length.
  const std::string original = "You are writer.\nDetails follow.";
  std::string big = "You are writer.\n";
  big += std::string(4 * original.size(), 'x');
  CHECK_FALSE(f.runtime.revise_prompt("writer", big));
  CHECK(f.diag.count("runtime.prompt_rejected") == 3);
  std::string fits = "You are writer.\n";
  fits += std::string(4 * original.size() - fits.size(), 'y');
  CHECK(f.runtime.revise_prompt("writer", fits));

  // The cap is measured against the ORIGINAL prompt, not the last revision.
  CHECK(f.runtime.revise_prompt("writer", original));

  CHECK_THROWS_AS(f.runtime.revise_prompt("ghost", "x"), cma::Error);
  CHECK_FALSE(f.runtime.spec_of("ghost").has_value());
}

TEST_CASE("undeclared outputs are dropped with a diagnostic") {
  Fixture f;
  ModuleSpec spec = tick_spec("rogue", 100, 0);  // Declares no sinks.
  f.runtime.spawn(spec, fn_factory([](const StepInputs&, ModuleContext&) {
                    StepOutputs out;
                    out.stores.push_back({"contraband", {}});
                    out.sends.push_back({"someone", "hi", {}});
                    out.sensor_writes.push_back({"channel", "value"});
                    return out;
                  }));

  const auto start = f.start();
  f.sleep_to(start + 50);
  f.finish();

  CHECK(f.memory.count() == 0);
  CHECK(f.bus.counters().published == 0);
  CHECK_FALSE(f.sensors.read("channel").has_value());
  CHECK(f.diag.count("runtime.undeclared_output") == 3);
}

TEST_CASE("declared sinks apply stores, sends, and sensor writes") {
  Fixture f;
  std::mutex mutex;
  std::vector<std::string> heard;

  ModuleSpec sender = tick_spec("sender", 100, 0);
  sender.outputs = {OutputSink::StoreMemory(), OutputSink::SendTo("*"),
                    OutputSink::SensorChannel("pulse")};
  f.runtime.spawn(sender, fn_factory([](const StepInputs&, ModuleContext&) {
                    StepOutputs out;
                    out.stores.push_back({"note", {"t1", "t2"}});
                    out.sends.push_back({"listener", "ping", {{"k", "v"}}});
                    out.sensor_writes.push_back({"pulse", "beat"});
                    return out;
                  }));

  ModuleSpec listener = tick_spec("listener", 50, 10);
  listener.trigger = Trigger::OnMessage(50);
  listener.inputs = {InputSource::InboxMessages()};
  f.runtime.spawn(listener,
                  fn_factory([&](const StepInputs& in, ModuleContext&) {
                    for (const auto& env : in.inbox) {
                      std::lock_guard lock(mutex);
                      heard.push_back(env.from_module + ":" + env.body);
                    }
                    return StepOutputs{};
                  }));

  const auto start = f.start();
  f.sleep_to(start + 75);
  f.finish();

  auto record = f.memory.latest_from("sender");
  REQUIRE(record.has_value());
  CHECK(record->text == "note");
  CHECK(record->tags == std::set<std::string>{"t1", "t2"});

  auto pulse = f.sensors.read("pulse");
  REQUIRE(pulse.has_value());
  CHECK(pulse->text == "beat");
  CHECK(pulse->ts_ms == start);

  REQUIRE(heard.size() == 1);
  CHECK(heard[0] == "sender:ping");

  auto sender_events = f.events_of("sender");
  REQUIRE(!sender_events.empty());
  CHECK(sender_events[0].second == EventKind::kOutput);
}

TEST_CASE("sensor channel inputs: latest value vs fresh-only") {
  Fixture f;
  std::mutex mutex;
  std::vector<std::string> latest_seen;
  std::vector<std::string> fresh_seen;

  ModuleSpec writer = tick_spec("writer", 100, 0);
  writer.outputs = {OutputSink::SensorChannel("env")};
  auto counter = std::make_shared<std::atomic<int>>(0);
  f.runtime.spawn(writer, fn_factory([counter](const StepInputs&,
                                               ModuleContext&) {
                    StepOutputs out;
                    out.sensor_writes.push_back(
                        {"env", "t" + std::to_string(counter->fetch_add(1))});
                    return out;
                  }));

  ModuleSpec reader = tick_spec("reader", 50, 10);
  reader.inputs = {InputSource::SensorChannel("env")};
  f.runtime.spawn(reader, fn_factory([&](const StepInputs& in,
                                         ModuleContext&) {
                    auto it = in.sensors.find("env");
                    if (it != in.sensors.end()) {
                      std::lock_guard lock(mutex);
                      latest_seen.push_back(it->second);
                    }
                    return StepOutputs{};
                  }));

  ModuleSpec fresh = tick_spec("fresh", 50, 20);
  fresh.inputs = {InputSource::SensorChannel("env", true)};
  f.runtime.spawn(fresh, fn_factory([&](const StepInputs& in,
                                        ModuleContext&) {
                    auto it = in.sensors.find("env");
                    if (it != in.sensors.end()) {
                      std::lock_guard lock(mutex);
                      fresh_seen.push_back(it->second);
                    }
                    return StepOutputs{};
                  }));

  const auto start = f.start();
  f.sleep_to(start + 150);
  f.finish();

  // Writer writes t0@0, t1@100. The plain reader re-reads the latest value
  // at every wake (10, 60, 110); the fresh reader sees each write once
  // (20, 120 — its 70 wake finds nothing new).
  CHECK(latest_seen == std::vector<std::string>{"t0", "t0", "t1"});
  CHECK(fresh_seen == std::vector<std::string>{"t0", "t1"});
}

TEST_CASE("per-module logs record every event as JSONL") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() /
                 ("cma_runtime_test_" + std::to_string(::getpid()));
  fs::remove_all(dir);

  {
    Fixture f({.log_dir = dir.string()});
    f.runtime.spawn(tick_spec("logged", 100, 0), idle_factory());
    const auto start = f.start();
    f.sleep_to(start + 250);
    f.finish();

    std::ifstream in(dir / "logged.jsonl");
    REQUIRE(in.is_open());
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line)) {
      auto parsed = nlohmann::json::parse(line);
      CHECK(parsed["module"] == "logged");
      CHECK(parsed["event"] == "step");
      CHECK(parsed["state"] == "active");
      CHECK(parsed.contains("ts"));
      CHECK(parsed.contains("output_summary"));
      ++lines;
    }
    CHECK(lines == 3);
  }
  fs::remove_all(dir);
}

TEST_CASE("activation reply parsing table") {
  struct Case {
    std::string reply;
    ActivationDecision expect;
    bool warns;
  };
  const std::vector<Case> table = {
      {"activate", ActivationDecision::kActivate, false},
      {"ACTIVATE ", ActivationDecision::kActivate, false},
      {" deactivate", ActivationDecision::kDeactivate, false},
      {"None", ActivationDecision::kNoChange, false},
      {"none\n", ActivationDecision::kNoChange, false},
      {"garbage", ActivationDecision::kNoChange, true},
      {"", ActivationDecision::kNoChange, true},
      {"activate now", ActivationDecision::kNoChange, true},
  };
  for (const auto& c : table) {
    DiagnosticLog diag;
    CHECK_MESSAGE(parse_activation_response(c.reply, &diag) == c.expect,
                  "reply: \"" << c.reply << "\"");
    CHECK_MESSAGE(diag.count("activation.nonconforming") == (c.warns ? 1 : 0),
                  "reply: \"" << c.reply << "\"");
  }
}

TEST_CASE("activation request embeds target prompt and memories") {
  ModuleSpec target;
  target.name = "desire";
  target.system_prompt = "You decide what the robot wants.";

  std::vector<cma::memory::MemoryRecord> memories;
  auto request =
      cma::runtime::build_activation_request(target, memories, "model-x");
  CHECK(request.system_prompt == std::string(kActivationSystemPrompt));
  REQUIRE(request.messages.size() == 1);
  CHECK(request.messages[0].text ==
        "Target module: desire\n"
        "system_prompt of the target module:\n"
        "You decide what the robot wants.\n"
        "\n"
        "Memory of the humanoid robot:\n"
        "(no memories yet)\n");

  cma::memory::MemoryRecord r1;
  r1.text = "A visitor waved.";
  cma::memory::MemoryRecord r2;
  r2.text = "The room fell silent.";
  memories = {r1, r2};
  auto with = cma::runtime::build_activation_request(target, memories, "m");
  CHECK(with.messages[0].text ==
        "Target module: desire\n"
        "system_prompt of the target module:\n"
        "You decide what the robot wants.\n"
        "\n"
        "Memory of the humanoid robot:\n"
        "A visitor waved.\n"
        "The room fell silent.\n");
  CHECK(with.model_id == "m");
}

namespace {
class ThrowingGateway : public cma::gateway::Gateway {
 public:
  cma::gateway::ChatResponse complete(
      const cma::gateway::ChatRequest&) override {
    throw cma::GatewayError(cma::GatewayError::Kind::kTransport, "down");
  }
};
}  // namespace

TEST_CASE("activation_decide holds state on gateway errors") {
  ModuleSpec target;
  target.name = "t";
  target.system_prompt = "p";
  DiagnosticLog diag;
  ThrowingGateway broken;
  auto decision =
      cma::runtime::activation_decide(target, {}, broken, "m", &diag);
  CHECK(decision == ActivationDecision::kNoChange);
  CHECK(diag.count("activation.gateway_error") == 1);
  CHECK(diag.count("activation.nonconforming") == 0);

  // And a conforming reply routes straight through.
  std::vector<cma::gateway::ScriptRule> rules;
  rules.push_back({.match = "Target module: t", .response = "activate"});
  cma::gateway::ScriptedGateway scripted(std::move(rules));
  CHECK(cma::runtime::activation_decide(target, {}, scripted, "m", &diag) ==
        ActivationDecision::kActivate);
}
