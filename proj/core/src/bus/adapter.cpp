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

#include "cma/bus/adapter.hpp"

#include <cstdlib>

#include "cma/bus/envelope.hpp"
#include "cma/common/errors.hpp"

namespace cma::bus {

namespace {

constexpr std::size_t kEchoRingCapacity = 4096;

void split_address(const std::string& address, std::string* host,
                   std::uint16_t* port) {
  auto colon = address.rfind(':');
  if (colon == std::string::npos || colon == 0 ||
      colon + 1 >= address.size()) {
    throw ConfigError("broker address must be host:port, got: " + address);
  }
  *host = address.substr(0, colon);
  const std::string port_text = address.substr(colon + 1);
  char* end = nullptr;
  long value = std::strtol(port_text.c_str(), &end, 10);
  if (end == nullptr || *end != '\0' || value <= 0 || value > 65535) {
    throw ConfigError("invalid broker port: " + port_text);
  }
  *port = static_cast<std::uint16_t>(value);
}

}  // namespace

ExternalAdapter::ExternalAdapter(Bus& bus, const std::string& broker_address,
                                 DiagnosticLog* log)
    : bus_(bus), log_(log) {
  std::string host;
  std::uint16_t port = 0;
  split_address(broker_address, &host, &port);

  mqtt::MqttClient::Options options;
  options.host = host;
  options.port = port;
  options.client_id = "cma-" + bus_.agent_id();
  client_ = std::make_unique<mqtt::MqttClient>(std::move(options));
  client_->set_message_handler(
      [this](const std::string& topic, const std::string& payload) {
        on_external(topic, payload);
      });
  client_->connect();
  client_->subscribe("cma/" + bus_.agent_id() + "/module/+/inbox");
  active_.store(true);

  // Mirror every local publish to the external broker with the canonical
  // byte encoding. Failures degrade silently to local-only delivery.
  bus_.set_tap([this](const Envelope& envelope, const std::string& bytes) {
    if (!active_.load()) return;
    remember(envelope.msg_id);
    if (!client_->publish(topic_for(envelope.agent_id, envelope.to_module),
                          bytes)) {
      if (active_.exchange(false) && log_ != nullptr) {
        log_->log(LogLevel::kError, "adapter.lost",
                  "external broker link lost; continuing local-only");
      }
    }
  });
}

ExternalAdapter::~ExternalAdapter() { disconnect(); }

void ExternalAdapter::disconnect() {
  if (!active_.exchange(false) && !client_) return;
  bus_.set_tap(nullptr);
  if (client_) {
    client_->disconnect();
  }
}

bool ExternalAdapter::connected() const {
  return active_.load() && client_ && client_->connected();
}

void ExternalAdapter::on_external(const std::string& topic,
                                  const std::string& payload) {
  Envelope envelope;
  try {
    envelope = decode(payload);
  } catch (const MalformedPayloadError& e) {
    if (log_ != nullptr) {
      log_->warn("adapter.malformed",
                 std::string("dropping external payload on ") + topic + ": " +
                     e.what());
    }
    return;
  }
  if (seen(envelope.msg_id)) return;  // Echo of our own mirror.
  if (envelope.agent_id != bus_.agent_id()) return;
  try {
    bus_.publish(envelope, Bus::Origin::kExternal);
  } catch (const Error& e) {
    if (log_ != nullptr) {
      log_->warn("adapter.inject_failed", e.what());
    }
  }
}

void ExternalAdapter::remember(const std::string& msg_id) {
  std::lock_guard<std::mutex> lock(ring_mutex_);
  if (ring_set_.insert(msg_id).second) {
    ring_order_.push_back(msg_id);
    if (ring_order_.size() > kEchoRingCapacity) {
      ring_set_.erase(ring_order_.front());
      ring_order_.pop_front();
    }
  }
}

bool ExternalAdapter::seen(const std::string& msg_id) {
  std::lock_guard<std::mutex> lock(ring_mutex_);
  return ring_set_.count(msg_id) != 0;
}

std::unique_ptr<ExternalAdapter> external_adapter_connect(
    Bus& bus, const std::string& broker_address, DiagnosticLog* log) {
  return std::make_unique<ExternalAdapter>(bus, broker_address, log);
}

}  // namespace cma::bus
