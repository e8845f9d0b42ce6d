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

#ifndef CMA_BUS_MQTT_NET_HPP_
#define CMA_BUS_MQTT_NET_HPP_

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "cma/common/log.hpp"

namespace cma::bus::mqtt {

/// Minimal RAII TCP socket used by the client and the loopback broker.
class TcpSocket {
 public:
  TcpSocket() = default;
  explicit TcpSocket(int fd) : fd_(fd) {}
  ~TcpSocket() { close(); }
  TcpSocket(TcpSocket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
  TcpSocket& operator=(TcpSocket&& other) noexcept;
  TcpSocket(const TcpSocket&) = delete;
  TcpSocket& operator=(const TcpSocket&) = delete;

  /// Throws MqttError: kConnectionRefused on refusal, kTimeout on connect
  /// timeout, kTransport-ish kProtocol never (reserved for packet layer).
  void connect(const std::string& host, std::uint16_t port, int timeout_ms);

  bool send_all(const std::string& bytes);

  /// Reads whatever is available within timeout_ms. Returns bytes read
  /// (appended to `out`), 0 on timeout, -1 on EOF or error.
  int recv_some(std::string& out, int timeout_ms);

  void shutdown_both();
  void close();
  bool valid() const { return fd_ >= 0; }
  int fd() const { return fd_; }

 private:
  int fd_ = -1;
};

/// Blocking accept loop wrapper; port 0 picks an ephemeral port.
class TcpListener {
 public:
  void listen(const std::string& host, std::uint16_t port);
  /// Returns an invalid socket on timeout or when closed.
  TcpSocket accept(int timeout_ms);
  void close();
  std::uint16_t port() const { return port_; }

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

/// In-process MQTT 3.1.1 broker covering the QoS 0 subset the adapter
/// speaks: CONNECT/CONNACK, SUBSCRIBE/SUBACK with '+' wildcards, PUBLISH
/// fan-out, PINGREQ/PINGRESP, DISCONNECT. Protocol-compatible stand-in for
/// an external broker in tests and demos; not a general MQTT server.
class MiniBroker {
 public:
  explicit MiniBroker(DiagnosticLog* log = nullptr);
  ~MiniBroker();

  /// Binds and starts serving; returns the bound port.
  std::uint16_t start(const std::string& host = "127.0.0.1",
                      std::uint16_t port = 0);
  void stop();
  std::uint16_t port() const { return listener_.port(); }

 private:
  struct Session;
  void accept_loop();
  void session_loop(std::shared_ptr<Session> session);
  void route(const std::string& topic, const std::string& payload);

  DiagnosticLog* log_;
  TcpListener listener_;
  std::thread accept_thread_;
  std::atomic<bool> running_{false};
  std::mutex mutex_;
  std::vector<std::shared_ptr<Session>> sessions_;
};

}  // namespace cma::bus::mqtt

#endif  // CMA_BUS_MQTT_NET_HPP_
