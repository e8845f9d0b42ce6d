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

#include "cma/bus/mqtt_client.hpp"

#include <chrono>
#include <random>

#include "cma/bus/mqtt.hpp"
#include "cma/common/errors.hpp"

namespace cma::bus::mqtt {

namespace {

std::string random_client_id() {
  static const char kAlphabet[] = "abcdefghijklmnopqrstuvwxyz0123456789";
  std::random_device rd;
  std::string id = "cma-";
  for (int i = 0; i < 12; ++i) {
    id.push_back(kAlphabet[rd() % (sizeof(kAlphabet) - 1)]);
  }
  return id;
}

}  // namespace

MqttClient::MqttClient(Options options) : options_(std::move(options)) {
  if (options_.client_id.empty()) options_.client_id = random_client_id();
}

MqttClient::~MqttClient() { disconnect(); }

void MqttClient::connect() {
  socket_.connect(options_.host, options_.port, options_.connect_timeout_ms);
  if (!socket_.send_all(encode_connect(options_.client_id,
                                       options_.keepalive_s))) {
    socket_.close();
    throw MqttError(MqttError::Kind::kConnectionRefused,
                    "failed to send CONNECT");
  }
  // Read the CONNACK synchronously before handing the socket to the reader.
  std::string buffer;
  auto deadline = std::chrono::steady_clock::now() +
                  std::chrono::milliseconds(options_.connect_timeout_ms);
  for (;;) {
    std::optional<Packet> packet = read_packet(buffer);
    if (packet.has_value()) {
      if (packet->type() != PacketType::kConnack) {
        socket_.close();
        throw MqttError(MqttError::Kind::kProtocol,
                        "expected CONNACK as first packet");
      }
      std::uint8_t code = parse_connack(*packet);
      if (code != 0) {
        socket_.close();
        throw MqttError(MqttError::Kind::kConnectionRefused,
                        "CONNACK return code " + std::to_string(code));
      }
      break;
    }
    auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
                         deadline - std::chrono::steady_clock::now())
                         .count();
    if (remaining <= 0) {
      socket_.close();
      throw MqttError(MqttError::Kind::kTimeout, "CONNACK timed out");
    }
    int n = socket_.recv_some(buffer, static_cast<int>(remaining));
    if (n < 0) {
      socket_.close();
      throw MqttError(MqttError::Kind::kConnectionRefused,
                      "connection closed during handshake");
    }
  }
  connected_.store(true);
  // Leftover bytes after CONNACK (early PUBLISHes) are re-parsed by the
  // reader loop, so hand the residue over.
  reader_ = std::thread([this, residue = std::move(buffer)]() mutable {
    std::string buf = std::move(residue);
    std::string& buffer = buf;
    while (connected_.load()) {
      std::optional<Packet> packet;
      try {
        packet = read_packet(buffer);
      } catch (const MqttError&) {
        break;
      }
      if (!packet.has_value()) {
        int n = socket_.recv_some(buffer, 100);
        if (n < 0) break;
        continue;
      }
      switch (packet->type()) {
        case PacketType::kPublish: {
          PublishData pub;
          try {
            pub = parse_publish(*packet);
          } catch (const MqttError&) {
            continue;
          }
          MessageHandler handler;
          {
            std::lock_guard<std::mutex> lock(handler_mutex_);
            handler = handler_;
          }
          if (handler) handler(pub.topic, pub.payload);
          break;
        }
        case PacketType::kSuback: {
          std::lock_guard<std::mutex> lock(ack_mutex_);
          suback_received_ = true;
          ack_cv_.notify_all();
          break;
        }
        case PacketType::kPingresp:
          break;
        default:
          break;
      }
    }
    connected_.store(false);
  });
}

void MqttClient::subscribe(const std::string& filter) {
  if (!connected_.load()) {
    throw MqttError(MqttError::Kind::kConnectionRefused, "not connected");
  }
  std::uint16_t packet_id;
  {
    std::lock_guard<std::mutex> lock(ack_mutex_);
    suback_received_ = false;
    packet_id = next_packet_id_++;
    if (next_packet_id_ == 0) next_packet_id_ = 1;
  }
  if (!send_packet(encode_subscribe(packet_id, filter))) {
    throw MqttError(MqttError::Kind::kConnectionRefused,
                    "failed to send SUBSCRIBE");
  }
  std::unique_lock<std::mutex> lock(ack_mutex_);
  bool acked = ack_cv_.wait_for(
      lock, std::chrono::milliseconds(options_.connect_timeout_ms),
      [this] { return suback_received_ || !connected_.load(); });
  if (!acked || !suback_received_) {
    throw MqttError(MqttError::Kind::kTimeout, "SUBACK timed out");
  }
}

bool MqttClient::publish(const std::string& topic, const std::string& payload) {
  if (!connected_.load()) return false;
  return send_packet(encode_publish(topic, payload));
}

void MqttClient::set_message_handler(MessageHandler handler) {
  std::lock_guard<std::mutex> lock(handler_mutex_);
  handler_ = std::move(handler);
}

void MqttClient::disconnect() {
  if (connected_.exchange(false)) {
    send_packet(encode_disconnect());
  }
  socket_.shutdown_both();
  if (reader_.joinable()) reader_.join();
  socket_.close();
  ack_cv_.notify_all();
}

bool MqttClient::send_packet(const std::string& bytes) {
  std::lock_guard<std::mutex> lock(write_mutex_);
  if (!socket_.valid()) return false;
  return socket_.send_all(bytes);
}

}  // namespace cma::bus::mqtt
