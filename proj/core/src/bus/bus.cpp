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

#include "cma/bus/bus.hpp"

#include <cstdio>
#include <deque>
#include <random>

#include "cma/common/errors.hpp"

namespace cma::bus {

namespace detail {

struct InboxQueue {
  mutable std::mutex mutex;
  std::deque<Envelope> items;
  bool active = true;  // false once the Subscription is destroyed
};

struct BusState {
  mutable std::mutex mutex;  // guards subs, tap, counters, stopped
  std::map<std::string, std::shared_ptr<InboxQueue>> subs;
  Bus::Tap tap;
  BusCounters counters;
  bool stopped = false;
  std::size_t queue_capacity = 1024;
};

}  // namespace detail

using detail::BusState;
using detail::InboxQueue;

Subscription::Subscription(std::string module_name,
                           std::shared_ptr<InboxQueue> queue,
                           std::shared_ptr<BusState> state)
    : module_name_(std::move(module_name)),
      queue_(std::move(queue)),
      state_(std::move(state)) {}

Subscription::~Subscription() {
  std::size_t leftover = 0;
  {
    std::lock_guard qlock(queue_->mutex);
    queue_->active = false;
    leftover = queue_->items.size();
    queue_->items.clear();
  }
  std::lock_guard lock(state_->mutex);
  state_->counters.dropped += leftover;
  auto it = state_->subs.find(module_name_);
  if (it != state_->subs.end() && it->second == queue_) {
    state_->subs.erase(it);
  }
}

std::optional<Envelope> Subscription::poll() {
  std::optional<Envelope> out;
  {
    std::lock_guard qlock(queue_->mutex);
    if (queue_->items.empty()) return std::nullopt;
    out = std::move(queue_->items.front());
    queue_->items.pop_front();
  }
  std::lock_guard lock(state_->mutex);
  ++state_->counters.delivered;
  return out;
}

std::vector<Envelope> Subscription::drain(std::size_t max_messages) {
  std::vector<Envelope> out;
  {
    std::lock_guard qlock(queue_->mutex);
    while (!queue_->items.empty() && out.size() < max_messages) {
      out.push_back(std::move(queue_->items.front()));
      queue_->items.pop_front();
    }
  }
  if (!out.empty()) {
    std::lock_guard lock(state_->mutex);
    state_->counters.delivered += out.size();
  }
  return out;
}

std::size_t Subscription::pending() const {
  std::lock_guard qlock(queue_->mutex);
  return queue_->items.size();
}

Bus::Bus(Options options, Clock& clock)
    : agent_id_(options.agent_id),
      clock_(clock),
      state_(std::make_shared<BusState>()) {
  require_topic_safe(agent_id_, "agent_id");
  state_->queue_capacity = options.queue_capacity == 0 ? 1 : options.queue_capacity;
  std::random_device rd;
  run_nonce_ = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

Bus::~Bus() { shutdown(); }

Envelope Bus::make_envelope(const std::string& from_module,
                            const std::string& to_module, std::string body,
                            std::map<std::string, std::string> headers) {
  require_topic_safe(from_module, "from_module");
  require_topic_safe(to_module, "to_module");
  Envelope e;
  std::uint64_t seq = msg_seq_.fetch_add(1) + 1;
  std::uint64_t hi = run_nonce_;
  char buf[37];
  // UUID v4 layout with the run nonce as the stable half and a counter as
  // the unique half; uniqueness per run comes from the counter.
  std::snprintf(buf, sizeof(buf), "%08x-%04x-4%03x-8%03x-%012llx",
                static_cast<unsigned>(hi >> 32),
                static_cast<unsigned>((hi >> 16) & 0xffff),
                static_cast<unsigned>(hi & 0xfff),
                static_cast<unsigned>((seq >> 48) & 0xfff),
                static_cast<unsigned long long>(seq & 0xffffffffffffULL));
  e.msg_id = buf;
  e.agent_id = agent_id_;
  e.from_module = from_module;
  e.to_module = to_module;
  e.sent_at_ms = clock_.now_ms();
  e.body = std::move(body);
  e.headers = std::move(headers);
  return e;
}

Receipt Bus::publish(const Envelope& envelope, Origin origin) {
  require_topic_safe(envelope.from_module, "from_module");
  require_topic_safe(envelope.to_module, "to_module");

  std::shared_ptr<InboxQueue> queue;
  Tap tap;
  {
    std::lock_guard lock(state_->mutex);
    if (state_->stopped) throw BusStoppedError();
    ++state_->counters.published;
    auto it = state_->subs.find(envelope.to_module);
    if (it != state_->subs.end()) {
      queue = it->second;
    } else {
      ++state_->counters.dropped;
    }
    if (origin == Origin::kLocal) tap = state_->tap;
  }

  if (queue) {
    bool evicted = false;
    {
      std::lock_guard qlock(queue->mutex);
      if (queue->active) {
        if (queue->items.size() >= state_->queue_capacity) {
          queue->items.pop_front();
          evicted = true;
        }
        queue->items.push_back(envelope);
      } else {
        evicted = true;  // raced with unsubscribe; counts as dropped
      }
    }
    if (evicted) {
      std::lock_guard lock(state_->mutex);
      ++state_->counters.dropped;
    }
  }

  if (tap) tap(envelope, encode(envelope));

  return Receipt{envelope.msg_id, clock_.now_ms()};
}

std::unique_ptr<Subscription> Bus::subscribe(const std::string& module_name) {
  require_topic_safe(module_name, "module_name");
  std::lock_guard lock(state_->mutex);
  if (state_->stopped) throw BusStoppedError();
  auto [it, inserted] =
      state_->subs.emplace(module_name, std::make_shared<InboxQueue>());
  if (!inserted) throw DuplicateSubscriptionError(module_name);
  return std::unique_ptr<Subscription>(
      new Subscription(module_name, it->second, state_));
}

void Bus::set_tap(Tap tap) {
  std::lock_guard lock(state_->mutex);
  state_->tap = std::move(tap);
}

BusCounters Bus::counters() const {
  std::lock_guard lock(state_->mutex);
  return state_->counters;
}

void Bus::shutdown() {
  std::lock_guard lock(state_->mutex);
  if (state_->stopped) return;
  state_->stopped = true;
  state_->tap = nullptr;
  for (auto& [name, queue] : state_->subs) {
    std::lock_guard qlock(queue->mutex);
    state_->counters.dropped += queue->items.size();
    queue->items.clear();
    queue->active = false;
  }
  state_->subs.clear();
}

bool Bus::stopped() const {
  std::lock_guard lock(state_->mutex);
  return state_->stopped;
}

}  // namespace cma::bus
