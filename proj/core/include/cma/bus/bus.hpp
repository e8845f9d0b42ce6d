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

#ifndef CMA_BUS_BUS_HPP_
#define CMA_BUS_BUS_HPP_

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "cma/bus/envelope.hpp"
#include "cma/common/clock.hpp"

namespace cma::bus {

struct Receipt {
  std::string msg_id;
  std::int64_t enqueued_at_ms = 0;
};

struct BusCounters {
  std::uint64_t published = 0;
  std::uint64_t delivered = 0;  // popped by a subscriber
  std::uint64_t dropped = 0;    // no subscriber, overflow-evicted, or drained
};

namespace detail {
struct BusState;
struct InboxQueue;
}  // namespace detail

/// Consumer end of one module's inbox. At most one exists per module name;
/// destroying it releases the name for re-subscription.
class Subscription {
 public:
  ~Subscription();
  Subscription(const Subscription&) = delete;
  Subscription& operator=(const Subscription&) = delete;

  const std::string& module_name() const { return module_name_; }

  /// Non-blocking: next envelope if one is queued.
  std::optional<Envelope> poll();

  /// Pops up to max_messages without blocking. Envelopes from one fixed
  /// sender come out in their send order.
  std::vector<Envelope> drain(std::size_t max_messages);

  std::size_t pending() const;

 private:
  friend class Bus;
  Subscription(std::string module_name,
               std::shared_ptr<detail::InboxQueue> queue,
               std::shared_ptr<detail::BusState> state);

  std::string module_name_;
  std::shared_ptr<detail::InboxQueue> queue_;
  std::shared_ptr<detail::BusState> state_;
};

/// In-process publish/subscribe broker carrying one-to-one text messages.
///
/// Delivery is at-most-once: publishing to a module with no active
/// subscription drops the message (counted), and a full inbox evicts its
/// oldest entry (counted). publish() never blocks on consumers.
class Bus {
 public:
  struct Options {
    std::string agent_id;
    std::size_t queue_capacity = 1024;  // per subscription
  };

  /// Where a message entered the system; external messages are not
  /// re-mirrored to the external broker.
  enum class Origin { kLocal, kExternal };

  /// Mirror hook for the external adapter: invoked for every local-origin
  /// publish with the envelope and its canonical wire bytes.
  using Tap = std::function<void(const Envelope&, const std::string& bytes)>;

  Bus(Options options, Clock& clock);
  ~Bus();

  const std::string& agent_id() const { return agent_id_; }

  /// Builds a valid envelope with a fresh msg_id and the current time.
  Envelope make_envelope(const std::string& from_module,
                         const std::string& to_module, std::string body,
                         std::map<std::string, std::string> headers = {});

  /// Enqueues on topic_for(agent_id, to_module). Throws BusStoppedError
  /// after shutdown and InvalidNameError for unsafe names.
  Receipt publish(const Envelope& envelope, Origin origin = Origin::kLocal);

  /// Claims the single consumer slot for module_name. Throws
  /// DuplicateSubscriptionError if the slot is taken.
  std::unique_ptr<Subscription> subscribe(const std::string& module_name);

  void set_tap(Tap tap);

  BusCounters counters() const;

  /// Stops accepting publishes and counts everything still queued as
  /// dropped; afterwards published == delivered + dropped.
  void shutdown();
  bool stopped() const;

 private:
  std::string agent_id_;
  Clock& clock_;
  std::shared_ptr<detail::BusState> state_;
  std::atomic<std::uint64_t> msg_seq_{0};
  std::uint64_t run_nonce_;
};

}  // namespace cma::bus

#endif  // CMA_BUS_BUS_HPP_
