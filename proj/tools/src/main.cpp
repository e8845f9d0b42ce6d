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
//
// cma — operator CLI for concurrent modular agents.
//
// Exit codes: 0 success (all scenario assertions pass), 1 runtime or
// assertion failure, 2 configuration error.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "cma/bus/adapter.hpp"
#include "cma/bus/bus.hpp"
#include "cma/common/clock.hpp"
#include "cma/common/errors.hpp"
#include "cma/common/log.hpp"
#include "cma/config/agent_config.hpp"
#include "cma/harness/export.hpp"
#include "cma/harness/predicates.hpp"
#include "cma/harness/runner.hpp"
#include "cma/harness/scenario.hpp"
#include "cma/memory/embedder.hpp"
#include "cma/memory/store.hpp"
#include "cma/runtime/runtime.hpp"
#include "cma/runtime/sensors.hpp"
#include "cma/runtime/timeline.hpp"
#include "cma/stdlib/catalog.hpp"

namespace {

namespace fs = std::filesystem;
using namespace std::chrono_literals;

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kConfigError = 2;

std::atomic<bool> g_interrupted{false};

void on_interrupt(int) { g_interrupted.store(true); }

// ---------------------------------------------------------------------------
// Control socket: a loopback TCP line protocol through which a second cma
// process reaches the reserved "operator" seat of a running agent.
//   inject <channel> <text...>   → write one sensor value
//   utter <module|-> <text...>   → publish a user utterance ("-": default)
//   status                       → one line per module, then "end"
// ---------------------------------------------------------------------------

class ControlServer {
 public:
  using InjectFn =
      std::function<std::string(const std::string&, const std::string&)>;
  using UtterFn =
      std::function<std::string(const std::string&, const std::string&)>;
  using StatusFn = std::function<std::string()>;

  ControlServer(InjectFn inject, UtterFn utter, StatusFn status)
      : inject_(std::move(inject)),
        utter_(std::move(utter)),
        status_(std::move(status)) {}

  ~ControlServer() { stop(); }

  /// Binds an ephemeral loopback port and writes it to `port_file`.
  bool start(const std::string& port_file) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) return false;
    int reuse = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &reuse, sizeof(reuse));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) <
            0 ||
        ::listen(listen_fd_, 4) < 0) {
      ::close(listen_fd_);
      listen_fd_ = -1;
      return false;
    }
    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);

    std::ofstream out(port_file, std::ios::trunc);
    if (!out.is_open()) {
      ::close(listen_fd_);
      listen_fd_ = -1;
      return false;
    }
    out << port_ << "\n";
    out.close();
    port_file_ = port_file;
    running_.store(true);
    worker_ = std::thread([this] { serve(); });
    return true;
  }

  void stop() {
    if (!running_.exchange(false)) return;
    if (worker_.joinable()) worker_.join();
    if (listen_fd_ >= 0) {
      ::close(listen_fd_);
      listen_fd_ = -1;
    }
    if (!port_file_.empty()) {
      std::error_code ec;
      fs::remove(port_file_, ec);
    }
  }

  int port() const { return port_; }

 private:
  void serve() {
    while (running_.load()) {
      pollfd pfd{listen_fd_, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, 200);
      if (ready <= 0) continue;
      const int conn = ::accept(listen_fd_, nullptr, nullptr);
      if (conn < 0) continue;
      handle(conn);
      ::close(conn);
    }
  }

  void handle(int conn) {
    std::string buffer;
    char chunk[512];
    while (running_.load()) {
      pollfd pfd{conn, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, 200);
      if (ready < 0) break;
      if (ready == 0) continue;
      const ssize_t n = ::read(conn, chunk, sizeof(chunk));
      if (n <= 0) break;
      buffer.append(chunk, static_cast<std::size_t>(n));
      std::size_t eol;
      while ((eol = buffer.find('\n')) != std::string::npos) {
        std::string line = buffer.substr(0, eol);
        buffer.erase(0, eol + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string reply = dispatch(line) + "\n";
        if (::write(conn, reply.data(), reply.size()) < 0) return;
      }
    }
  }

  std::string dispatch(const std::string& line) {
    const auto first_space = line.find(' ');
    const std::string verb = line.substr(0, first_space);
    std::string rest =
        first_space == std::string::npos ? "" : line.substr(first_space + 1);
    if (verb == "status") return status_();
    const auto second_space = rest.find(' ');
    const std::string target = rest.substr(0, second_space);
    const std::string text =
        second_space == std::string::npos ? "" : rest.substr(second_space + 1);
    if (verb == "inject") {
      if (target.empty()) return "err: usage: inject <channel> <text>";
      return inject_(target, text);
    }
    if (verb == "utter") {
      if (target.empty()) return "err: usage: utter <module|-> <text>";
      return utter_(target, text);
    }
    return "err: unknown command '" + verb + "'";
  }

  InjectFn inject_;
  UtterFn utter_;
  StatusFn status_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::string port_file_;
  std::atomic<bool> running_{false};
  std::thread worker_;
};

/// Where a running agent advertises its control port.
std::string control_port_path(const cma::config::AgentConfig& config) {
  if (!config.logging.directory.empty()) {
    return (fs::path(config.logging.directory) / "control.port").string();
  }
  return (fs::temp_directory_path() / ("cma-" + config.agent_id + ".port"))
      .string();
}

// ---------------------------------------------------------------------------
// Live agent assembly (run without a scenario, and chat).
// ---------------------------------------------------------------------------

struct LiveAgent {
  cma::DiagnosticLog diag;
  std::unique_ptr<cma::Clock> clock;
  std::unique_ptr<cma::bus::Bus> bus;
  cma::runtime::SensorBoard sensors;
  cma::runtime::TimelineRecorder timeline;
  std::unique_ptr<cma::memory::MemoryStore> store;
  std::unique_ptr<cma::gateway::Gateway> gateway;
  std::unique_ptr<cma::runtime::Runtime> runtime;
  std::unique_ptr<cma::bus::Subscription> operator_sub;
  std::unique_ptr<cma::bus::ExternalAdapter> adapter;
  std::string log_dir;

  explicit LiveAgent(bool verbose) : diag(verbose) {}
};

std::unique_ptr<LiveAgent> build_live_agent(
    const cma::config::AgentConfig& config, double speed,
    const std::string& rules_override, bool verbose) {
  auto agent = std::make_unique<LiveAgent>(verbose);
  agent->clock = std::make_unique<cma::RealClock>(speed);
  agent->bus = std::make_unique<cma::bus::Bus>(
      cma::bus::Bus::Options{config.agent_id, 1024}, *agent->clock);
  auto embedder = std::make_shared<cma::memory::HashedBagEmbedder>(
      config.memory.dimension);
  agent->store = std::make_unique<cma::memory::MemoryStore>(
      embedder,
      cma::memory::MemoryStore::Options{config.memory.capacity,
                                        config.memory.persist_path,
                                        agent->clock.get(), false});
  agent->gateway = cma::harness::build_gateway(config.gateway, rules_override);
  agent->log_dir = config.logging.directory;

  cma::runtime::Runtime::Options options;
  options.log_dir = agent->log_dir;
  agent->runtime = std::make_unique<cma::runtime::Runtime>(
      *agent->clock, *agent->bus, *agent->store, *agent->gateway,
      agent->sensors, agent->timeline, agent->diag, options);
  for (const auto& resolved : config.modules) {
    agent->runtime->spawn(resolved.spec, resolved.factory);
  }
  agent->operator_sub = agent->bus->subscribe("operator");
  if (config.bus.mode == "external") {
    try {
      agent->adapter = cma::bus::external_adapter_connect(
          *agent->bus, config.bus.broker_address, &agent->diag);
    } catch (const cma::MqttError& err) {
      std::cerr << "warning: external broker unavailable ("
                << err.what() << "); running local-only\n";
    }
  }
  return agent;
}

std::string default_utterance_target(const cma::config::AgentConfig& config) {
  for (const auto& resolved : config.modules) {
    if (resolved.spec.trigger.kind != cma::runtime::Trigger::Kind::kTick) {
      return resolved.spec.name;
    }
  }
  return "";
}

std::string format_status_lines(cma::runtime::Runtime& runtime) {
  std::string out;
  for (const auto& [name, status] : runtime.status_all()) {
    out += name;
    out += ": ";
    out += cma::runtime::module_state_name(status.state);
    out += " (restarts=" + std::to_string(status.restarts);
    if (status.last_error) out += ", last_error=" + *status.last_error;
    out += ")\n";
  }
  out += "end";
  return out;
}

void print_replies(LiveAgent& agent) {
  while (auto envelope = agent.operator_sub->poll()) {
    std::cout << envelope->from_module << "> " << envelope->body << "\n";
  }
}

// ---------------------------------------------------------------------------
// Subcommands.
// ---------------------------------------------------------------------------

int cmd_validate(const std::string& config_path) {
  const auto diagnostics = cma::config::validate_agent_config(config_path);
  for (const auto& d : diagnostics) {
    const bool is_error =
        d.severity == cma::config::Diagnostic::Severity::kError;
    (is_error ? std::cerr : std::cout)
        << (is_error ? "error: " : "warning: ") << d.message << "\n";
  }
  if (cma::config::has_errors(diagnostics)) return kConfigError;
  const auto config = cma::config::load_agent_config(config_path);
  std::cout << "ok, " << config.modules.size() << " modules\n";
  return kOk;
}

int cmd_run(const std::string& config_path, const std::string& scenario_path,
            double speed, std::int64_t duration_ms, bool real_clock,
            const std::string& log_dir, const std::string& rules,
            const std::string& export_csv, const std::string& export_svg,
            bool verbose) {
  cma::config::AgentConfig config;
  try {
    config = cma::config::load_agent_config(config_path);
  } catch (const cma::Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kConfigError;
  }

  if (!scenario_path.empty()) {
    cma::harness::ScenarioScript script;
    try {
      script = cma::harness::load_scenario(scenario_path);
    } catch (const cma::Error& err) {
      std::cerr << "error: " << err.what() << "\n";
      return kConfigError;
    }
    cma::harness::RunOptions options;
    options.use_virtual_clock = !real_clock;
    options.real_clock_factor = speed;
    options.log_dir = log_dir;
    options.gateway_rules_override = rules;
    options.verbose = verbose;

    cma::harness::RunReport report;
    try {
      report = cma::harness::run_scenario(script, config, options);
    } catch (const cma::Error& err) {
      std::cerr << "error: " << err.what() << "\n";
      return kFailure;
    }

    for (const auto& a : report.assertions) {
      std::cout << (a.pass ? "PASS" : "FAIL") << " " << a.predicate_id
                << " @" << a.at_ms << "ms: " << a.detail << "\n";
    }
    std::cout << "timeline: " << report.timeline.size() << " events; bus: "
              << report.counters.published << " published, "
              << report.counters.delivered << " delivered, "
              << report.counters.dropped << " dropped\n";
    std::cout << "logs: " << report.log_dir << "\n";
    try {
      if (!export_csv.empty()) {
        cma::harness::export_timeline(report.timeline, "csv", export_csv);
        std::cout << "wrote " << export_csv << "\n";
      }
      if (!export_svg.empty()) {
        cma::harness::export_timeline(report.timeline, "svg", export_svg);
        std::cout << "wrote " << export_svg << "\n";
      }
    } catch (const cma::Error& err) {
      std::cerr << "error: " << err.what() << "\n";
      return kFailure;
    }
    return report.all_assertions_passed() ? kOk : kFailure;
  }

  // Live run on the (optionally accelerated) wall clock.
  std::unique_ptr<LiveAgent> agent;
  try {
    agent = build_live_agent(config, speed, rules, verbose);
  } catch (const cma::Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kFailure;
  }
  std::signal(SIGINT, on_interrupt);
  agent->runtime->start();

  ControlServer server(
      [&](const std::string& channel, const std::string& text) {
        agent->sensors.write(channel, text, agent->clock->now_ms());
        return std::string("ok");
      },
      [&](const std::string& module, const std::string& text) {
        const std::string target =
            module == "-" ? default_utterance_target(config) : module;
        if (target.empty()) return std::string("err: no message-driven module");
        try {
          agent->bus->publish(
              agent->bus->make_envelope("operator", target, text));
        } catch (const cma::Error& err) {
          return "err: " + std::string(err.what());
        }
        return std::string("ok");
      },
      [&] { return format_status_lines(*agent->runtime); });
  const std::string port_file = control_port_path(config);
  if (server.start(port_file)) {
    std::cout << "control socket on 127.0.0.1:" << server.port() << " ("
              << port_file << ")\n";
  } else {
    std::cerr << "warning: control socket unavailable\n";
  }
  if (!agent->log_dir.empty()) std::cout << "logs: " << agent->log_dir << "\n";
  std::cout << config.agent_id << " running with " << config.modules.size()
            << " modules";
  if (duration_ms > 0) {
    std::cout << " for " << duration_ms << " ms (agent time)";
  } else {
    std::cout << " until interrupted";
  }
  std::cout << "\n";

  const std::int64_t start = agent->runtime->start_ms();
  while (!g_interrupted.load()) {
    print_replies(*agent);
    if (duration_ms > 0 && agent->clock->now_ms() - start >= duration_ms) {
      break;
    }
    std::this_thread::sleep_for(50ms);
  }
  server.stop();
  agent->runtime->stop();
  print_replies(*agent);
  agent->bus->shutdown();
  const auto counters = agent->bus->counters();
  std::cout << "stopped; timeline: " << agent->timeline.size()
            << " events; bus: " << counters.published << " published, "
            << counters.delivered << " delivered, " << counters.dropped
            << " dropped\n";
  return kOk;
}

int cmd_chat(const std::string& config_path, double speed,
             const std::string& rules, bool verbose) {
  cma::config::AgentConfig config;
  try {
    config = cma::config::load_agent_config(config_path);
  } catch (const cma::Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kConfigError;
  }
  const std::string target = default_utterance_target(config);
  if (target.empty()) {
    std::cerr << "error: no message-driven module to chat with\n";
    return kConfigError;
  }

  std::unique_ptr<LiveAgent> agent;
  try {
    agent = build_live_agent(config, speed, rules, verbose);
  } catch (const cma::Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kFailure;
  }
  agent->runtime->start();
  std::cout << "chatting with '" << target
            << "' — /status, /memory <query>, /quit\n";

  std::string line;
  for (;;) {
    print_replies(*agent);
    std::cout << "you> " << std::flush;
    if (!std::getline(std::cin, line)) break;
    if (line == "/quit") break;
    if (line == "/status") {
      std::cout << format_status_lines(*agent->runtime) << "\n";
      continue;
    }
    if (line.rfind("/memory ", 0) == 0) {
      const std::string query = line.substr(8);
      for (const auto& hit : agent->store->query(query, 5)) {
        std::printf("%.3f %s [%s] %s\n", hit.score, hit.record.id.c_str(),
                    hit.record.source_module.c_str(),
                    hit.record.text.c_str());
      }
      continue;
    }
    if (line.empty()) continue;
    try {
      agent->bus->publish(agent->bus->make_envelope("operator", target, line));
    } catch (const cma::Error& err) {
      std::cerr << "error: " << err.what() << "\n";
      continue;
    }
    // Give the round-trip (poll interval + gateway) a moment, then print
    // whatever arrived; later replies surface before the next prompt.
    const auto deadline = std::chrono::steady_clock::now() + 5s;
    while (std::chrono::steady_clock::now() < deadline) {
      if (agent->operator_sub->pending() > 0) break;
      std::this_thread::sleep_for(50ms);
    }
    print_replies(*agent);
  }
  agent->runtime->stop();
  agent->bus->shutdown();
  std::cout << "bye\n";
  return kOk;
}

int cmd_inject(const std::string& config_path, const std::string& channel,
               const std::string& text) {
  cma::config::AgentConfig config;
  try {
    config = cma::config::load_agent_config(config_path);
  } catch (const cma::Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kConfigError;
  }
  const std::string port_file = control_port_path(config);
  std::ifstream in(port_file);
  int port = 0;
  if (!(in >> port) || port <= 0) {
    std::cerr << "error: no running agent (cannot read " << port_file
              << ")\n";
    return kFailure;
  }

  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) {
    std::cerr << "error: socket unavailable\n";
    return kFailure;
  }
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    std::cerr << "error: cannot reach agent on port " << port << "\n";
    ::close(fd);
    return kFailure;
  }
  const std::string request = "inject " + channel + " " + text + "\n";
  if (::write(fd, request.data(), request.size()) < 0) {
    std::cerr << "error: write failed\n";
    ::close(fd);
    return kFailure;
  }
  std::string reply;
  char chunk[256];
  for (;;) {
    const ssize_t n = ::read(fd, chunk, sizeof(chunk));
    if (n <= 0) break;
    reply.append(chunk, static_cast<std::size_t>(n));
    if (reply.find('\n') != std::string::npos) break;
  }
  ::close(fd);
  if (const auto eol = reply.find('\n'); eol != std::string::npos) {
    reply.resize(eol);
  }
  std::cout << (reply.empty() ? "err: no reply" : reply) << "\n";
  return reply == "ok" ? kOk : kFailure;
}

int cmd_memory(const std::string& config_path, const std::string& op,
               const std::string& arg, std::size_t n, std::size_t k) {
  cma::config::AgentConfig config;
  try {
    config = cma::config::load_agent_config(config_path);
  } catch (const cma::Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kConfigError;
  }
  if (config.memory.persist_path.empty()) {
    std::cerr << "error: this agent keeps memory in-process only "
                 "(no memory.persist_path)\n";
    return kConfigError;
  }
  auto embedder =
      std::make_shared<cma::memory::HashedBagEmbedder>(config.memory.dimension);
  std::unique_ptr<cma::memory::MemoryStore> store;
  try {
    store = std::make_unique<cma::memory::MemoryStore>(
        embedder,
        cma::memory::MemoryStore::Options{config.memory.capacity,
                                          config.memory.persist_path, nullptr,
                                          false});
  } catch (const cma::Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kFailure;
  }

  if (op == "count") {
    std::cout << store->count() << "\n";
    return kOk;
  }
  if (op == "ls") {
    for (const auto& record : store->recent(n)) {
      std::string tags;
      for (const auto& tag : record.tags) {
        tags += tags.empty() ? tag : "," + tag;
      }
      std::printf("%s %lld [%s]%s%s %s\n", record.id.c_str(),
                  static_cast<long long>(record.created_at_ms),
                  record.source_module.c_str(), tags.empty() ? "" : " #",
                  tags.c_str(), record.text.c_str());
    }
    return kOk;
  }
  if (op == "query") {
    if (arg.empty()) {
      std::cerr << "error: memory query needs text\n";
      return kConfigError;
    }
    for (const auto& hit : store->query(arg, k)) {
      std::printf("%.3f %s [%s] %s\n", hit.score, hit.record.id.c_str(),
                  hit.record.source_module.c_str(), hit.record.text.c_str());
    }
    return kOk;
  }
  std::cerr << "error: unknown memory op '" << op
            << "' (expected ls|query|count)\n";
  return kConfigError;
}

int cmd_timeline(const std::string& run_dir, const std::string& format,
                 const std::string& out_path) {
  std::vector<cma::runtime::TimelineEvent> events;
  try {
    events = cma::harness::read_jsonl_events(run_dir);
  } catch (const cma::Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kFailure;
  }
  std::sort(events.begin(), events.end(),
            [](const auto& a, const auto& b) {
              return std::tie(a.ts_ms, a.module, a.kind) <
                     std::tie(b.ts_ms, b.module, b.kind);
            });
  try {
    cma::harness::export_timeline(events, format, out_path);
  } catch (const cma::Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kFailure;
  }
  std::cout << "wrote " << out_path << " (" << events.size() << " events)\n";
  return kOk;
}

int cmd_catalog() {
  for (const auto& entry : cma::stdlib::builtin_catalog()) {
    const auto& t = entry.spec.trigger;
    const char* trigger =
        t.kind == cma::runtime::Trigger::Kind::kTick
            ? "tick"
            : (t.kind == cma::runtime::Trigger::Kind::kOnMessage ? "on_message"
                                                                 : "both");
    std::printf("%-24s %-14s %-10s %6lldms %s\n", entry.id.c_str(),
                cma::stdlib::layer_name(entry.default_layer), trigger,
                static_cast<long long>(t.interval_ms),
                entry.spec.activation_policy ==
                        cma::runtime::ActivationPolicy::kControlled
                    ? "controlled"
                    : "always_on");
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cma — run and operate concurrent modular agents"};
  app.require_subcommand(1);

  std::string config_path;
  std::string scenario_path;
  std::string rules;
  std::string log_dir;
  std::string export_csv;
  std::string export_svg;
  std::string memory_op;
  std::string memory_arg;
  std::string run_dir;
  std::string format = "csv";
  std::string out_path;
  std::string channel;
  std::string text;
  double speed = 1.0;
  std::int64_t duration_ms = 0;
  std::size_t n = 20;
  std::size_t k = 5;
  bool real_clock = false;
  bool verbose = false;

  auto* validate =
      app.add_subcommand("validate", "Check an agent definition file");
  validate->add_option("config", config_path, "agent definition (JSON)")
      ->required();

  auto* run = app.add_subcommand("run", "Run an agent (live or scenario)");
  run->add_option("config", config_path, "agent definition (JSON)")
      ->required();
  run->add_option("--scenario", scenario_path,
                  "scenario file: deterministic scripted run");
  run->add_option("--speed", speed, "wall-clock acceleration factor");
  run->add_option("--duration-ms", duration_ms,
                  "live run length in agent time (0: until Ctrl-C)");
  run->add_flag("--real-clock", real_clock,
                "scenario: use the wall clock instead of virtual time");
  run->add_option("--log-dir", log_dir, "override the log directory");
  run->add_option("--rules", rules, "override scripted gateway rules file");
  run->add_option("--export-csv", export_csv, "write the timeline as CSV");
  run->add_option("--export-svg", export_svg, "write the timeline as SVG");
  run->add_flag("--verbose", verbose, "mirror diagnostics to stderr");

  auto* chat = app.add_subcommand("chat", "Talk to an agent in a REPL");
  chat->add_option("config", config_path, "agent definition (JSON)")
      ->required();
  chat->add_option("--speed", speed, "wall-clock acceleration factor");
  chat->add_option("--rules", rules, "override scripted gateway rules file");
  chat->add_flag("--verbose", verbose, "mirror diagnostics to stderr");

  auto* inject =
      app.add_subcommand("inject", "Write a sensor value into a running agent");
  inject->add_option("config", config_path, "agent definition (JSON)")
      ->required();
  inject->add_option("channel", channel, "sensor channel")->required();
  inject->add_option("text", text, "value text")->required();

  auto* memory =
      app.add_subcommand("memory", "Inspect an agent's persisted memory");
  memory->add_option("config", config_path, "agent definition (JSON)")
      ->required();
  memory->add_option("op", memory_op, "ls | query | count")->required();
  memory->add_option("arg", memory_arg, "query text");
  memory->add_option("--n", n, "records to list (ls)");
  memory->add_option("--k", k, "hits to return (query)");

  auto* timeline =
      app.add_subcommand("timeline", "Export a run's timeline from its logs");
  timeline->add_option("run_dir", run_dir, "log directory of a finished run")
      ->required();
  timeline->add_option("--format", format, "csv | svg")
      ->check(CLI::IsMember({"csv", "svg"}));
  timeline->add_option("--out", out_path, "output file")->required();

  auto* catalog =
      app.add_subcommand("catalog", "List the built-in module catalog");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*validate) return cmd_validate(config_path);
    if (*run) {
      return cmd_run(config_path, scenario_path, speed, duration_ms,
                     real_clock, log_dir, rules, export_csv, export_svg,
                     verbose);
    }
    if (*chat) return cmd_chat(config_path, speed, rules, verbose);
    if (*inject) return cmd_inject(config_path, channel, text);
    if (*memory) return cmd_memory(config_path, memory_op, memory_arg, n, k);
    if (*timeline) return cmd_timeline(run_dir, format, out_path);
    if (*catalog) return cmd_catalog();
  } catch (const cma::ConfigError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kConfigError;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kFailure;
  }
  return kOk;
}
