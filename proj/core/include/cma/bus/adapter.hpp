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

#ifndef CMA_BUS_ADAPTER_HPP_
#define CMA_BUS_ADAPTER_HPP_

#include <atomic>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_set>

#include "cma/bus/bus.hpp"
#include "cma/bus/mqtt_client.hpp"
#include "cma/common/log.hpp"

namespace cma::bus {

/// Bridges an agent's in-process bus with an external MQTT 3.1.1 broker.
///
/// Local publishes are mirrored byte-identically to
/// `cma/<agent_id>/module/<module>/inbox`; external messages arriving on
/// `cma/<agent_id>/module/+/inbox` are injected into the local bus. The
/// adapter runs independently: its failure or disconnection degrades to
/// local-only operation and never stops the in-process broker.
class ExternalAdapter {
 public:
  ExternalAdapter(Bus& bus, const std::string& broker_address,
                  DiagnosticLog* log);
  ~ExternalAdapter();
  ExternalAdapter(const ExternalAdapter&) = delete;
  ExternalAdapter& operator=(const ExternalAdapter&) = delete;

  /// Severs the external link. Local publish/subscribe keeps working.
  /// Idempotent.
  void disconnect();

  bool connected() const;

 private:
  void on_external(const std::string& topic, const std::string& payload);
  void remember(const std::string& msg_id);
  bool seen(const std::string& msg_id);

  Bus& bus_;
  DiagnosticLog* log_;
  std::unique_ptr<mqtt::MqttClient> client_;
  std::atomic<bool> active_{false};

  // The broker echoes our own mirrored publishes back to us (we subscribe
  // to the same pattern we publish on); a bounded ring of recently mirrored
  // msg_ids filters those echoes out of local re-injection.
  std::mutex ring_mutex_;
  std::deque<std::string> ring_order_;
  std::unordered_set<std::string> ring_set_;
};

/// Connects to `host:port`, subscribes, and wires the bus tap. Throws
/// MqttError (connection-refused / timeout / protocol, distinguishable).
std::unique_ptr<ExternalAdapter> external_adapter_connect(
    Bus& bus, const std::string& broker_address, DiagnosticLog* log = nullptr);

}  // namespace cma::bus

#endif  // CMA_BUS_ADAPTER_HPP_
