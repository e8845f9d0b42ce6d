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

#include "cma/stdlib/behaviors.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <utility>

#if defined(__linux__)
#include <unistd.h>
#endif

#include "cma/gateway/gateway.hpp"
#include "cma/runtime/activation.hpp"
#include "templates.hpp"

namespace cma::stdlib {

namespace {

using cma::memory::MemoryRecord;
using cma::runtime::Behavior;
using cma::runtime::BehaviorFactory;
using cma::runtime::InputSource;
using cma::runtime::MemoryWrite;
using cma::runtime::ModuleContext;
using cma::runtime::Send;
using cma::runtime::SensorWrite;
using cma::runtime::StepInputs;
using cma::runtime::StepOutputs;

/// Adapts a (copyable, possibly stateful-mutable) callable into a
/// Behavior. Every factory() call copies the callable, so restarts begin
/// from the callable's initial state.
template <typename Fn>
class FunctionBehavior final : public Behavior {
 public:
  explicit FunctionBehavior(Fn fn) : fn_(std::move(fn)) {}
  StepOutputs step(const StepInputs& inputs, ModuleContext& ctx) override {
    return fn_(inputs, ctx);
  }

 private:
  Fn fn_;
};

template <typename Fn>
BehaviorFactory make_factory(Fn fn) {
  return [fn = std::move(fn)]() -> std::unique_ptr<Behavior> {
    return std::make_unique<FunctionBehavior<Fn>>(fn);
  };
}

std::string trim_copy(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string lower_copy(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string one_line(const std::string& text) {
  std::string out = text;
  std::replace(out.begin(), out.end(), '\n', ' ');
  return out;
}

gateway::ChatResponse call_gateway(ModuleContext& ctx,
                                   const std::string& user_text) {
  gateway::ChatRequest request;
  request.system_prompt = ctx.spec->system_prompt;
  request.messages.push_back({gateway::Role::kUser, user_text});
  request.model_id = ctx.spec->model_id;
  return ctx.gateway->complete(request);
}

/// The record gathered for the module's first declared peer-output input,
/// if that peer has stored anything yet.
std::optional<std::string> declared_peer_text(const StepInputs& inputs,
                                              const ModuleContext& ctx) {
  for (const auto& input : ctx.spec->inputs) {
    if (input.kind != InputSource::Kind::kPeerOutput) continue;
    auto it = inputs.peer_outputs.find(input.text);
    if (it == inputs.peer_outputs.end()) return std::nullopt;
    return it->second.text;
  }
  return std::nullopt;
}

std::string hits_text(const std::vector<cma::memory::QueryHit>& hits) {
  if (hits.empty()) return "(no memories yet)";
  std::string out;
  for (const auto& hit : hits) {
    out += "- " + one_line(hit.record.text) + "\n";
  }
  out.pop_back();
  return out;
}

/// Shared pruning step: over `cap` live records, show the gathered recent
/// ones to the gateway and delete exactly the shown ids it names.
void clean_step(const StepInputs& inputs, ModuleContext& ctx,
                std::size_t cap) {
  if (ctx.memory->count() <= cap || inputs.recent.empty()) return;

  std::string listing;
  std::map<std::string, const MemoryRecord*> shown;
  for (const auto& record : inputs.recent) {
    listing += "id=" + record.id + " | " + one_line(record.text) + "\n";
    shown[record.id] = &record;
  }
  auto response = call_gateway(
      ctx, fill_template(detail::kCleanerUser, {{"memories", listing}}));

  std::vector<std::string> doomed;
  std::istringstream lines(response.text);
  std::string line;
  while (std::getline(lines, line)) {
    const std::string id = trim_copy(line);
    if (id.empty() || lower_copy(id) == "none") continue;
    auto it = shown.find(id);
    if (it == shown.end()) {
      if (ctx.diag) {
        ctx.diag->warn("cleaner.nonconforming",
                       "line is not a shown record id: " + id);
      }
      continue;
    }
    if (it->second->tags.count("autobiography") != 0) {
      if (ctx.diag) {
        ctx.diag->log(LogLevel::kInfo, "cleaner.protected",
                      "refusing to delete autobiography record " + id);
      }
      continue;
    }
    doomed.push_back(id);
  }
  if (!doomed.empty()) ctx.memory->remove(doomed);
}

StepOutputs summarize_step(const std::vector<MemoryRecord>& records,
                           ModuleContext& ctx) {
  StepOutputs out;
  if (records.empty()) return out;  // Nothing to summarize: skip.
  auto response = call_gateway(
      ctx, fill_template(detail::kSummarizerUser,
                         {{"memories", join_memory_texts(records)}}));
  out.stores.push_back({response.text, {"summary"}});
  return out;
}

std::string format_statuses(
    const std::map<std::string, cma::runtime::ModuleStatus>& statuses) {
  std::string out;
  for (const auto& [name, status] : statuses) {
    out += name;
    out += ": state=";
    out += cma::runtime::module_state_name(status.state);
    out += " restarts=" + std::to_string(status.restarts);
    if (status.last_error) out += " last_error=" + one_line(*status.last_error);
    out += "\n";
  }
  if (out.empty()) out = "(no modules)\n";
  return out;
}

std::string format_double(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.1f", value);
  return buffer;
}

}  // namespace

std::string join_memory_texts(const std::vector<MemoryRecord>& records) {
  if (records.empty()) return "(no memories yet)";
  std::string out;
  for (const auto& record : records) {
    out += "- " + one_line(record.text) + "\n";
  }
  out.pop_back();
  return out;
}

std::string fill_template(std::string text,
                          const std::map<std::string, std::string>& values) {
  for (const auto& [key, value] : values) {
    const std::string needle = "{" + key + "}";
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
      text.replace(pos, needle.size(), value);
      pos += value.size();
    }
  }
  return text;
}

MetaReport::ResourceSample sample_process_resources() {
  MetaReport::ResourceSample sample;
#if defined(__linux__)
  const long page_size = ::sysconf(_SC_PAGESIZE);
  const long ticks_per_s = ::sysconf(_SC_CLK_TCK);
  {
    std::ifstream statm("/proc/self/statm");
    long long pages_total = 0;
    long long pages_resident = 0;
    if (statm >> pages_total >> pages_resident && page_size > 0) {
      sample.process_memory_bytes =
          static_cast<std::uint64_t>(pages_resident) *
          static_cast<std::uint64_t>(page_size);
    }
  }
  {
    std::ifstream stat_file("/proc/self/stat");
    std::string stat_line;
    std::getline(stat_file, stat_line);
    // Fields after the parenthesized command name; utime and stime are
    // the 12th and 13th of those, starttime the 20th.
    const std::size_t close = stat_line.rfind(')');
    if (close != std::string::npos && ticks_per_s > 0) {
      std::istringstream rest(stat_line.substr(close + 1));
      std::vector<std::string> fields;
      std::string field;
      while (rest >> field) fields.push_back(field);
      if (fields.size() >= 20) {
        const double utime = std::strtod(fields[11].c_str(), nullptr);
        const double stime = std::strtod(fields[12].c_str(), nullptr);
        const double start_ticks = std::strtod(fields[19].c_str(), nullptr);
        double uptime_s = 0.0;
        std::ifstream uptime_file("/proc/uptime");
        if (uptime_file >> uptime_s) {
          const double elapsed_s = uptime_s - start_ticks / ticks_per_s;
          const double cpu_s = (utime + stime) / ticks_per_s;
          if (elapsed_s > 0.0) {
            sample.cpu_percent = 100.0 * cpu_s / elapsed_s;
          }
        }
      }
    }
  }
#endif
  return sample;
}

BehaviorFactory summarizer_behavior() {
  return make_factory([](const StepInputs& inputs, ModuleContext& ctx) {
    return summarize_step(inputs.recent, ctx);
  });
}

BehaviorFactory memory_cleaner_behavior(std::size_t target_cap) {
  return make_factory(
      [target_cap](const StepInputs& inputs, ModuleContext& ctx) {
        clean_step(inputs, ctx, target_cap);
        return StepOutputs{};
      });
}

BehaviorFactory magi_behavior(std::string identity, std::string previous,
                              std::string next) {
  return make_factory([identity = std::move(identity),
                       previous = std::move(previous), next = std::move(next)](
                          const StepInputs& inputs, ModuleContext& ctx) {
    // Peer text: the newest envelope the previous magi sent this step,
    // else that magi's latest stored turn, else the bootstrap silence.
    std::string peer = "(silence)";
    if (auto stored = declared_peer_text(inputs, ctx)) peer = *stored;
    for (auto it = inputs.inbox.rbegin(); it != inputs.inbox.rend(); ++it) {
      if (it->from_module == previous) {
        peer = it->body;
        break;
      }
    }
    auto response = call_gateway(
        ctx, fill_template(detail::kMagiUser,
                           {{"memories", join_memory_texts(inputs.recent)},
                            {"peer_outputs", peer}}));
    StepOutputs out;
    out.stores.push_back({response.text, {"magi_" + identity}});
    out.sends.push_back({next, response.text, {}});
    return out;
  });
}

BehaviorFactory scene_behavior(std::string kind) {
  return make_factory([kind = std::move(kind)](const StepInputs& inputs,
                                               ModuleContext& ctx) {
    StepOutputs out;
    auto it = inputs.sensors.find("vision");
    if (it == inputs.sensors.end()) return out;  // No scene yet: skip.
    auto response = call_gateway(
        ctx, fill_template(detail::kSceneUser, {{"scene", it->second}}));
    out.stores.push_back({response.text, {kind}});
    return out;
  });
}

BehaviorFactory autobiographical_behavior() {
  return make_factory([](const StepInputs& inputs, ModuleContext& ctx) {
    const std::string previous =
        declared_peer_text(inputs, ctx).value_or("(none)");
    auto response = call_gateway(
        ctx, fill_template(detail::kAutobiographyUser,
                           {{"peer_outputs", previous},
                            {"memories", join_memory_texts(inputs.recent)}}));
    StepOutputs out;
    out.stores.push_back({response.text, {"autobiography"}});
    return out;
  });
}

BehaviorFactory meta_report_behavior() {
  return make_factory([](const StepInputs& inputs, ModuleContext& ctx) {
    MetaReport report;
    report.generated_at_ms = inputs.now_ms;
    report.module_statuses = ctx.control->status_all();
    report.resource_sample = sample_process_resources();
    // The declared resource channel wins over self-sampling when the
    // agent runs a resource monitor.
    auto channel = inputs.sensors.find("resources");
    if (channel != inputs.sensors.end()) {
      std::istringstream fields(channel->second);
      std::string field;
      while (fields >> field) {
        const std::size_t eq = field.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = field.substr(0, eq);
        const std::string value = field.substr(eq + 1);
        if (key == "cpu_percent") {
          report.resource_sample.cpu_percent = std::strtod(value.c_str(), nullptr);
        } else if (key == "process_memory_bytes") {
          report.resource_sample.process_memory_bytes =
              std::strtoull(value.c_str(), nullptr, 10);
        }
      }
    }
    report.resource_sample.live_record_count = ctx.memory->count();

    int failed = 0;
    for (const auto& [name, status] : report.module_statuses) {
      if (status.state == cma::runtime::ModuleState::kFailed) ++failed;
    }
    const std::string resources_text =
        "cpu_percent=" + format_double(report.resource_sample.cpu_percent) +
        " process_memory_bytes=" +
        std::to_string(report.resource_sample.process_memory_bytes) +
        " live_record_count=" +
        std::to_string(report.resource_sample.live_record_count);
    const std::string user =
        "Module statuses:\n" + format_statuses(report.module_statuses) +
        "\nResource sample:\n" + resources_text + "\n\n" +
        fill_template(detail::kMetaReportUser,
                      {{"memories", join_memory_texts(inputs.recent)}});

    auto response = call_gateway(ctx, user);
    report.narrative = response.text.empty() ? "(empty report)" : response.text;
    if (ctx.diag) {
      ctx.diag->log(LogLevel::kInfo, "meta.report",
                    "modules=" + std::to_string(report.module_statuses.size()) +
                        " failed=" + std::to_string(failed) + " " +
                        resources_text);
    }
    StepOutputs out;
    out.stores.push_back({report.narrative, {"meta_report"}});
    return out;
  });
}

BehaviorFactory prompt_modifier_behavior(std::vector<std::string> targets) {
  struct State {
    std::vector<std::string> targets;
    std::vector<PromptRevision> history;  // Append-only.
  };
  State initial;
  initial.targets = std::move(targets);
  return make_factory([state = std::move(initial)](
                          const StepInputs& inputs,
                          ModuleContext& ctx) mutable {
    StepOutputs out;
    auto meta = declared_peer_text(inputs, ctx);
    if (!meta) return out;  // No meta report yet: nothing to ground on.
    for (const auto& target : state.targets) {
      auto target_spec = ctx.control->spec_of(target);
      if (!target_spec) continue;
      const std::string user =
          fill_template(detail::kPromptModifierUser,
                        {{"meta_report", *meta}}) +
          "\n\nModule: " + target + "\nCurrent system prompt:\n" +
          target_spec->system_prompt;
      auto response = call_gateway(ctx, user);
      const bool accepted =
          ctx.control->revise_prompt(target, response.text);
      state.history.push_back({target, target_spec->system_prompt,
                               response.text, "meta-report-driven revision",
                               inputs.now_ms, accepted});
      if (ctx.diag) {
        ctx.diag->log(LogLevel::kInfo, "prompt.revision",
                      target + (accepted ? " accepted" : " rejected"));
      }
      if (accepted) {
        out.stores.push_back(
            {"Revised the system prompt of " + target, {"prompt_revision"}});
      }
    }
    return out;
  });
}

BehaviorFactory conversation_behavior() {
  return make_factory([](const StepInputs& inputs, ModuleContext& ctx) {
    StepOutputs out;
    const std::string autobiography =
        declared_peer_text(inputs, ctx).value_or("(none)");
    const std::string memories = hits_text(inputs.query_hits);
    for (const auto& envelope : inputs.inbox) {
      if (envelope.from_module == ctx.spec->name) continue;
      auto response = call_gateway(
          ctx, fill_template(detail::kConversationUser,
                             {{"peer_outputs", autobiography},
                              {"memories", memories},
                              {"inbox", envelope.body}}));
      out.stores.push_back({response.text, {ctx.spec->name}});
      out.sends.push_back({envelope.from_module, response.text, {}});
      out.sensor_writes.push_back({"speech_out", response.text});
    }
    return out;
  });
}

BehaviorFactory thinking_behavior() {
  return make_factory([](const StepInputs& inputs, ModuleContext& ctx) {
    auto response = call_gateway(
        ctx, fill_template(detail::kThinkingUser,
                           {{"memories", join_memory_texts(inputs.recent)}}));
    StepOutputs out;
    out.stores.push_back({response.text, {"thought"}});
    return out;
  });
}

BehaviorFactory interpreter_behavior(std::string kind) {
  return make_factory([kind = std::move(kind)](const StepInputs& inputs,
                                               ModuleContext& ctx) {
    StepOutputs out;
    // The declared channel is fresh-only, so a stale board means skip.
    if (inputs.sensors.empty()) return out;
    const std::string& raw = inputs.sensors.begin()->second;
    const char* tpl = detail::kVisionInterpreterUser;
    if (kind == "audio") tpl = detail::kAudioInterpreterUser;
    if (kind == "soil") tpl = detail::kSoilInterpreterUser;
    auto response = call_gateway(ctx, fill_template(tpl, {{"scene", raw}}));
    out.stores.push_back({response.text, {kind}});
    return out;
  });
}

BehaviorFactory action_behavior() {
  return make_factory([](const StepInputs& inputs, ModuleContext& ctx) {
    StepOutputs out;
    const std::string context = hits_text(inputs.query_hits);
    auto decision = call_gateway(
        ctx,
        fill_template(detail::kActionDecideUser, {{"memories", context}}));
    const std::string word = lower_copy(trim_copy(decision.text));
    if (word == "wait") return out;
    if (word != "act") {
      if (ctx.diag) {
        ctx.diag->warn("action.nonconforming",
                       "decision is neither act nor wait: " +
                           one_line(decision.text));
      }
      return out;
    }
    auto instruction = call_gateway(
        ctx,
        fill_template(detail::kActionInstructUser, {{"memories", context}}));
    out.stores.push_back({instruction.text, {"action"}});
    out.sensor_writes.push_back({"motor", instruction.text});
    return out;
  });
}

BehaviorFactory memory_manager_behavior(std::size_t target_cap) {
  return make_factory(
      [target_cap](const StepInputs& inputs, ModuleContext& ctx) {
        if (ctx.memory->count() > target_cap) {
          clean_step(inputs, ctx, target_cap);
          return StepOutputs{};
        }
        // Lean enough: summarize the newest ten of the gathered records.
        std::vector<MemoryRecord> newest = inputs.recent;
        if (newest.size() > 10) newest.resize(10);
        return summarize_step(newest, ctx);
      });
}

BehaviorFactory passthrough_behavior(std::string in_channel,
                                     std::string out_channel) {
  return make_factory([in_channel = std::move(in_channel),
                       out_channel = std::move(out_channel)](
                          const StepInputs& inputs, ModuleContext&) {
    StepOutputs out;
    auto it = inputs.sensors.find(in_channel);
    if (it != inputs.sensors.end()) {
      out.sensor_writes.push_back({out_channel, it->second});
    }
    return out;
  });
}

BehaviorFactory llm_motor_behavior() {
  return make_factory([](const StepInputs& inputs, ModuleContext& ctx) {
    StepOutputs out;
    auto it = inputs.sensors.find("motor");
    if (it == inputs.sensors.end()) return out;
    auto response = call_gateway(
        ctx, fill_template(detail::kMotorUser, {{"scene", it->second}}));
    out.sensor_writes.push_back({"motor_command", response.text});
    return out;
  });
}

BehaviorFactory resource_monitor_behavior() {
  return make_factory([](const StepInputs&, ModuleContext&) {
    const auto sample = sample_process_resources();
    StepOutputs out;
    out.sensor_writes.push_back(
        {"resources",
         "cpu_percent=" + format_double(sample.cpu_percent) +
             " process_memory_bytes=" +
             std::to_string(sample.process_memory_bytes)});
    return out;
  });
}

BehaviorFactory activation_controller_behavior() {
  return make_factory([](const StepInputs& inputs, ModuleContext& ctx) {
    for (const auto& target : ctx.control->controlled_modules()) {
      auto target_spec = ctx.control->spec_of(target);
      if (!target_spec) continue;
      const auto decision = cma::runtime::activation_decide(
          *target_spec, inputs.recent, *ctx.gateway, ctx.spec->model_id,
          ctx.diag);
      ctx.control->set_activation(target, decision);
    }
    return StepOutputs{};
  });
}

}  // namespace cma::stdlib
