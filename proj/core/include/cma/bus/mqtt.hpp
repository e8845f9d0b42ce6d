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

#ifndef CMA_BUS_MQTT_HPP_
#define CMA_BUS_MQTT_HPP_

#include <cstdint>
#include <optional>
#include <string>

namespace cma::bus::mqtt {

// The QoS 0 slice of MQTT 3.1.1 used by the adapter and the loopback
// broker. Packet ids appear only in SUBSCRIBE/SUBACK.

enum class PacketType : std::uint8_t {
  kConnect = 1,
  kConnack = 2,
  kPublish = 3,
  kSubscribe = 8,
  kSuback = 9,
  kPingreq = 12,
  kPingresp = 13,
  kDisconnect = 14,
};

struct Packet {
  std::uint8_t first_byte = 0;  // type nibble + flags nibble
  std::string body;             // bytes after the remaining-length field

  PacketType type() const { return static_cast<PacketType>(first_byte >> 4); }
};

std::string encode_connect(const std::string& client_id,
                           std::uint16_t keepalive_s);
std::string encode_connack(bool session_present, std::uint8_t return_code);
std::string encode_publish(const std::string& topic,
                           const std::string& payload);
std::string encode_subscribe(std::uint16_t packet_id,
                             const std::string& topic_filter);
std::string encode_suback(std::uint16_t packet_id, std::uint8_t return_code);
std::string encode_pingreq();
std::string encode_pingresp();
std::string encode_disconnect();

/// Tries to take one packet off the front of `buffer`. Returns nullopt when
/// more bytes are needed; on success erases the consumed bytes. Throws
/// MqttError{kProtocol} on a malformed fixed header.
std::optional<Packet> read_packet(std::string& buffer);

struct ConnectData {
  std::string client_id;
  std::uint16_t keepalive_s = 0;
};
struct PublishData {
  std::string topic;
  std::string payload;
};
struct SubscribeData {
  std::uint16_t packet_id = 0;
  std::string topic_filter;
};

ConnectData parse_connect(const Packet& packet);
PublishData parse_publish(const Packet& packet);
SubscribeData parse_subscribe(const Packet& packet);
/// Returns the CONNACK return code (0 = accepted).
std::uint8_t parse_connack(const Packet& packet);

/// Topic filter match with single-level '+' wildcards ('#' unsupported,
/// matching the adapter's one subscription pattern).
bool topic_matches(const std::string& filter, const std::string& topic);

}  // namespace cma::bus::mqtt

#endif  // CMA_BUS_MQTT_HPP_
