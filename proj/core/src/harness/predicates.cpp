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

#include "cma/harness/predicates.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace cma::harness {

namespace {

using cma::runtime::ActivationPolicy;
using cma::runtime::EventKind;
using cma::runtime::TimelineEvent;
using cma::runtime::Trigger;

AssertionResult make_result(const Event& event, bool pass,
                            std::string detail) {
  return AssertionResult{event.predicate_id, event.at_ms, pass,
                         std::move(detail)};
}

std::string trim_copy(const std::string& text) {
  std::size_t begin = text.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  std::size_t end = text.find_last_not_of(" \t\r\n");
  return text.substr(begin, end - begin + 1);
}

std::set<std::string> split_names(const std::string& text) {
  std::set<std::string> out;
  std::string current;
  for (char c : text) {
    if (c == ',') {
      std::string name = trim_copy(current);
      if (!name.empty()) out.insert(name);
      current.clear();
    } else {
      current += c;
    }
  }
  std::string name = trim_copy(current);
  if (!name.empty()) out.insert(name);
  return out;
}

/// Reads an integer param; false (with *error set) on a malformed value.
bool param_int(const Event& event, const std::string& key, std::int64_t def,
               std::int64_t* out, std::string* error) {
  auto it = event.params.find(key);
  if (it == event.params.end()) {
    *out = def;
    return true;
  }
  try {
    std::size_t pos = 0;
    long long value = std::stoll(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(it->second);
    *out = value;
    return true;
  } catch (const std::exception&) {
    *error = "param '" + key + "' is not an integer: '" + it->second + "'";
    return false;
  }
}

std::string param_str(const Event& event, const std::string& key,
                      const std::string& def = "") {
  auto it = event.params.find(key);
  return it == event.params.end() ? def : it->second;
}

std::size_t count_kind(const std::vector<TimelineEvent>& events,
                       const std::string& module, EventKind kind) {
  return static_cast<std::size_t>(
      std::count_if(events.begin(), events.end(), [&](const TimelineEvent& e) {
        return e.module == module && e.kind == kind;
      }));
}

std::optional<std::int64_t> first_ts(const std::vector<TimelineEvent>& events,
                                     const std::string& module,
                                     EventKind kind) {
  for (const auto& e : events) {
    if (e.module == module && e.kind == kind) return e.ts_ms;
  }
  return std::nullopt;
}

AssertionResult tick_liveness(const Event& event,
                              const PredicateContext& ctx) {
  if (ctx.config == nullptr || ctx.timeline == nullptr) {
    return make_result(event, false, "tick_liveness needs config + timeline");
  }
  std::string error;
  std::int64_t window_intervals = 0;
  if (!param_int(event, "window_intervals", 10, &window_intervals, &error)) {
    return make_result(event, false, error);
  }
  if (window_intervals <= 0) {
    return make_result(event, false, "window_intervals must be positive");
  }
  const std::set<std::string> excluded =
      split_names(param_str(event, "exclude"));

  const auto events = ctx.timeline->snapshot();
  std::map<std::string, std::vector<std::int64_t>> step_times;
  for (const auto& e : events) {
    if (e.kind == EventKind::kStep || e.kind == EventKind::kOutput) {
      step_times[e.module].push_back(e.ts_ms);
    }
  }

  std::size_t modules_checked = 0;
  std::size_t windows_checked = 0;
  for (const auto& resolved : ctx.config->modules) {
    const auto& spec = resolved.spec;
    if (spec.activation_policy != ActivationPolicy::kAlwaysOn) continue;
    if (spec.trigger.kind == Trigger::Kind::kOnMessage) continue;
    if (excluded.count(spec.name) != 0) continue;
    ++modules_checked;
    const std::int64_t window = window_intervals * spec.trigger.interval_ms;
    const auto& times = step_times[spec.name];
    for (std::int64_t w = 0; ctx.start_ms + (w + 1) * window <= ctx.now_ms;
         ++w) {
      const std::int64_t lo = ctx.start_ms + w * window;
      const std::int64_t hi = lo + window;
      ++windows_checked;
      const bool alive =
          std::any_of(times.begin(), times.end(),
                      [&](std::int64_t t) { return t >= lo && t < hi; });
      if (!alive) {
        return make_result(
            event, false,
            "module '" + spec.name + "' has no step in window [" +
                std::to_string(lo - ctx.start_ms) + "," +
                std::to_string(hi - ctx.start_ms) + ") ms");
      }
    }
  }
  return make_result(event, true,
                     std::to_string(modules_checked) + " modules live across " +
                         std::to_string(windows_checked) + " windows");
}

AssertionResult fail_restart(const Event& event, const PredicateContext& ctx) {
  if (ctx.timeline == nullptr) {
    return make_result(event, false, "fail_restart needs timeline");
  }
  const std::string module = param_str(event, "module");
  if (module.empty()) {
    return make_result(event, false, "fail_restart requires param 'module'");
  }
  std::string error;
  std::int64_t min = 0;
  if (!param_int(event, "min", 1, &min, &error)) {
    return make_result(event, false, error);
  }
  const auto events = ctx.timeline->snapshot();
  const std::size_t fails = count_kind(events, module, EventKind::kFail);
  const std::size_t restarts = count_kind(events, module, EventKind::kRestart);
  const auto first_fail = first_ts(events, module, EventKind::kFail);
  const auto first_restart = first_ts(events, module, EventKind::kRestart);

  std::string detail = "module '" + module + "': " + std::to_string(fails) +
                       " fail(s), " + std::to_string(restarts) +
                       " restart(s)";
  if (fails < static_cast<std::size_t>(min) ||
      restarts < static_cast<std::size_t>(min)) {
    return make_result(event, false, detail + ", need >= " +
                                         std::to_string(min) + " of each");
  }
  if (first_fail && first_restart && *first_fail > *first_restart) {
    return make_result(event, false, detail + ", but a restart precedes the first fail");
  }
  return make_result(event, true, detail);
}

AssertionResult toggle_pairs(const Event& event, const PredicateContext& ctx) {
  if (ctx.timeline == nullptr) {
    return make_result(event, false, "toggle_pairs needs timeline");
  }
  const std::string module = param_str(event, "module");
  if (module.empty()) {
    return make_result(event, false, "toggle_pairs requires param 'module'");
  }
  std::string error;
  std::int64_t min = 0;
  if (!param_int(event, "min", 2, &min, &error)) {
    return make_result(event, false, error);
  }
  const auto events = ctx.timeline->snapshot();
  const std::size_t activates =
      count_kind(events, module, EventKind::kActivate);
  const std::size_t deactivates =
      count_kind(events, module, EventKind::kDeactivate);
  const std::size_t pairs = std::min(activates, deactivates);
  const std::string detail =
      "module '" + module + "': " + std::to_string(activates) +
      " activate(s), " + std::to_string(deactivates) + " deactivate(s) → " +
      std::to_string(pairs) + " pair(s)";
  return make_result(event, pairs >= static_cast<std::size_t>(min), detail);
}

AssertionResult toggle_spread(const Event& event,
                              const PredicateContext& ctx) {
  if (ctx.config == nullptr || ctx.timeline == nullptr) {
    return make_result(event, false, "toggle_spread needs config + timeline");
  }
  std::string error;
  std::int64_t min_toggles = 0;
  std::int64_t min_modules = 0;
  if (!param_int(event, "min_toggles", 2, &min_toggles, &error) ||
      !param_int(event, "min_modules", 3, &min_modules, &error)) {
    return make_result(event, false, error);
  }
  const auto events = ctx.timeline->snapshot();
  std::vector<std::string> qualifying;
  for (const auto& resolved : ctx.config->modules) {
    const auto& spec = resolved.spec;
    if (spec.activation_policy != ActivationPolicy::kControlled) continue;
    const std::size_t toggles =
        count_kind(events, spec.name, EventKind::kActivate) +
        count_kind(events, spec.name, EventKind::kDeactivate);
    if (toggles >= static_cast<std::size_t>(min_toggles)) {
      qualifying.push_back(spec.name + "(" + std::to_string(toggles) + ")");
    }
  }
  std::string detail = std::to_string(qualifying.size()) +
                       " controlled module(s) with >= " +
                       std::to_string(min_toggles) + " toggles";
  if (!qualifying.empty()) {
    detail += ":";
    for (const auto& name : qualifying) detail += " " + name;
  }
  return make_result(
      event, qualifying.size() >= static_cast<std::size_t>(min_modules),
      detail);
}

AssertionResult min_events(const Event& event, const PredicateContext& ctx,
                           bool outputs_only) {
  if (ctx.timeline == nullptr) {
    return make_result(event, false, "predicate needs timeline");
  }
  const std::string module = param_str(event, "module");
  if (module.empty()) {
    return make_result(event, false, "predicate requires param 'module'");
  }
  std::string error;
  std::int64_t min = 0;
  if (!param_int(event, "min", 1, &min, &error)) {
    return make_result(event, false, error);
  }
  const auto events = ctx.timeline->snapshot();
  std::size_t count = count_kind(events, module, EventKind::kOutput);
  if (!outputs_only) count += count_kind(events, module, EventKind::kStep);
  const std::string what = outputs_only ? "output" : "step";
  return make_result(event, count >= static_cast<std::size_t>(min),
                     "module '" + module + "': " + std::to_string(count) +
                         " " + what + " event(s), need >= " +
                         std::to_string(min));
}

AssertionResult memory_count_bound(const Event& event,
                                   const PredicateContext& ctx, bool is_max) {
  if (ctx.memory == nullptr) {
    return make_result(event, false, "predicate needs memory");
  }
  const char* key = is_max ? "max" : "min";
  if (event.params.find(key) == event.params.end()) {
    return make_result(event, false,
                       std::string("predicate requires param '") + key + "'");
  }
  std::string error;
  std::int64_t bound = 0;
  if (!param_int(event, key, 0, &bound, &error)) {
    return make_result(event, false, error);
  }
  const std::size_t count = ctx.memory->count();
  const bool pass = is_max ? count <= static_cast<std::size_t>(bound)
                           : count >= static_cast<std::size_t>(bound);
  return make_result(event, pass,
                     "live records: " + std::to_string(count) + ", bound " +
                         (is_max ? "<= " : ">= ") + std::to_string(bound));
}

AssertionResult tag_never_deleted(const Event& event,
                                  const PredicateContext& ctx) {
  if (ctx.tracking == nullptr) {
    return make_result(event, false,
                       "tag_never_deleted needs the tracking decorator");
  }
  const std::string tag = param_str(event, "tag");
  if (tag.empty()) {
    return make_result(event, false,
                       "tag_never_deleted requires param 'tag'");
  }
  const auto stored = ctx.tracking->stored_tags();
  const auto removed = ctx.tracking->removed_ids();
  for (const auto& id : removed) {
    auto it = stored.find(id);
    if (it != stored.end() && it->second.count(tag) != 0) {
      return make_result(event, false,
                         "record " + id + " tagged '" + tag +
                             "' was deleted");
    }
  }
  return make_result(event, true,
                     std::to_string(removed.size()) +
                         " deletion(s), none tagged '" + tag + "'");
}

AssertionResult counters_conserved(const Event& event,
                                   const PredicateContext& ctx) {
  if (ctx.bus == nullptr) {
    return make_result(event, false, "counters_conserved needs bus");
  }
  const auto counters = ctx.bus->counters();
  const bool pass =
      counters.published == counters.delivered + counters.dropped;
  return make_result(event, pass,
                     "published=" + std::to_string(counters.published) +
                         " delivered=" + std::to_string(counters.delivered) +
                         " dropped=" + std::to_string(counters.dropped));
}

}  // namespace

std::vector<double> TrackingMemory::embed(const std::string& text) {
  return inner_.embed(text);
}

std::string TrackingMemory::store(const std::string& text,
                                  const std::string& source_module,
                                  const std::set<std::string>& tags) {
  std::string id = inner_.store(text, source_module, tags);
  std::lock_guard<std::mutex> lock(mutex_);
  stored_tags_[id] = tags;
  return id;
}

std::vector<cma::memory::QueryHit> TrackingMemory::query(
    const std::string& text, std::size_t k) {
  return inner_.query(text, k);
}

std::vector<cma::memory::MemoryRecord> TrackingMemory::recent(std::size_t n) {
  return inner_.recent(n);
}

std::size_t TrackingMemory::remove(const std::vector<std::string>& ids) {
  const std::size_t removed = inner_.remove(ids);
  std::lock_guard<std::mutex> lock(mutex_);
  // Ids are never reused, so a requested id that was ever stored and is in
  // the batch is gone afterwards regardless of whether this call or an
  // earlier one erased it.
  for (const auto& id : ids) {
    if (stored_tags_.find(id) != stored_tags_.end()) removed_ids_.insert(id);
  }
  return removed;
}

std::size_t TrackingMemory::count() { return inner_.count(); }

std::optional<cma::memory::MemoryRecord> TrackingMemory::latest_from(
    const std::string& source_module) {
  return inner_.latest_from(source_module);
}

std::optional<cma::memory::MemoryRecord> TrackingMemory::latest_tagged(
    const std::string& tag) {
  return inner_.latest_tagged(tag);
}

std::map<std::string, std::set<std::string>> TrackingMemory::stored_tags()
    const {
  std::lock_guard<std::mutex> lock(mutex_);
  return stored_tags_;
}

std::set<std::string> TrackingMemory::removed_ids() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return removed_ids_;
}

AssertionResult evaluate_predicate(const Event& event,
                                   const PredicateContext& ctx) {
  const std::string& id = event.predicate_id;
  if (id == "tick_liveness") return tick_liveness(event, ctx);
  if (id == "fail_restart") return fail_restart(event, ctx);
  if (id == "toggle_pairs") return toggle_pairs(event, ctx);
  if (id == "toggle_spread") return toggle_spread(event, ctx);
  if (id == "min_step_events") return min_events(event, ctx, false);
  if (id == "min_output_events") return min_events(event, ctx, true);
  if (id == "live_count_max") return memory_count_bound(event, ctx, true);
  if (id == "memory_min_count") return memory_count_bound(event, ctx, false);
  if (id == "tag_never_deleted") return tag_never_deleted(event, ctx);
  if (id == "counters_conserved") return counters_conserved(event, ctx);
  return make_result(event, false, "unknown predicate id '" + id + "'");
}

}  // namespace cma::harness
