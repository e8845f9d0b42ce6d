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

#ifndef CMA_BUS_MQTT_CLIENT_HPP_
#define CMA_BUS_MQTT_CLIENT_HPP_

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "cma/bus/mqtt_net.hpp"

namespace cma::bus::mqtt {

/// QoS 0 MQTT 3.1.1 client: connect, subscribe, publish, receive.
/// Incoming PUBLISH packets are dispatched on a background reader thread.
class MqttClient {
 public:
  using MessageHandler =
      std::function<void(const std::string& topic, const std::string& payload)>;

  struct Options {
    std::string host = "127.0.0.1";
    std::uint16_t port = 1883;
    std::string client_id;
    int connect_timeout_ms = 5000;
    int keepalive_s = 60;
  };

  explicit MqttClient(Options options);
  ~MqttClient();
  MqttClient(const MqttClient&) = delete;
  MqttClient& operator=(const MqttClient&) = delete;

  /// Performs the CONNECT/CONNACK handshake and starts the reader thread.
  /// Throws MqttError (kConnectionRefused / kTimeout / kProtocol).
  void connect();

  /// Subscribes and waits for the SUBACK. Throws MqttError on failure.
  void subscribe(const std::string& filter);

  /// Fire-and-forget QoS 0 publish. Returns false once disconnected.
  bool publish(const std::string& topic, const std::string& payload);

  void set_message_handler(MessageHandler handler);

  /// Graceful DISCONNECT then socket teardown. Idempotent.
  void disconnect();

  bool connected() const { return connected_.load(); }

 private:
  void reader_loop();
  bool send_packet(const std::string& bytes);

  Options options_;
  TcpSocket socket_;
  std::thread reader_;
  std::mutex write_mutex_;
  std::mutex handler_mutex_;
  MessageHandler handler_;
  std::atomic<bool> connected_{false};
  std::mutex ack_mutex_;
  std::condition_variable ack_cv_;
  bool suback_received_ = false;
  std::uint16_t next_packet_id_ = 1;
};

}  // namespace cma::bus::mqtt

#endif  // CMA_BUS_MQTT_CLIENT_HPP_
