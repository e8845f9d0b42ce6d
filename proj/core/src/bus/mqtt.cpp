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

#include "cma/bus/mqtt.hpp"

#include <string_view>

#include "cma/common/errors.hpp"

namespace cma::bus::mqtt {

namespace {

void append_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v >> 8));
  out.push_back(static_cast<char>(v & 0xff));
}

void append_lp_string(std::string& out, const std::string& s) {
  append_u16(out, static_cast<std::uint16_t>(s.size()));
  out += s;
}

std::string with_fixed_header(std::uint8_t first_byte,
                              const std::string& body) {
  std::string out;
  out.push_back(static_cast<char>(first_byte));
  std::size_t len = body.size();
  do {
    std::uint8_t digit = len % 128;
    len /= 128;
    if (len > 0) digit |= 0x80;
    out.push_back(static_cast<char>(digit));
  } while (len > 0);
  out += body;
  return out;
}

class BodyReader {
 public:
  explicit BodyReader(const std::string& body) : body_(body) {}

  std::uint8_t u8() {
    check(1);
    return static_cast<std::uint8_t>(body_[pos_++]);
  }

  std::uint16_t u16() {
    check(2);
    std::uint16_t v = (static_cast<std::uint8_t>(body_[pos_]) << 8) |
                      static_cast<std::uint8_t>(body_[pos_ + 1]);
    pos_ += 2;
    return v;
  }

  std::string lp_string() {
    std::uint16_t len = u16();
    check(len);
    std::string s = body_.substr(pos_, len);
    pos_ += len;
    return s;
  }

  std::string rest() { return body_.substr(pos_); }

 private:
  void check(std::size_t n) {
    if (pos_ + n > body_.size()) {
      throw MqttError(MqttError::Kind::kProtocol, "truncated packet body");
    }
  }

  const std::string& body_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_connect(const std::string& client_id,
                           std::uint16_t keepalive_s) {
  std::string body;
  append_lp_string(body, "MQTT");
  body.push_back(4);     // protocol level 3.1.1
  body.push_back(0x02);  // clean session
  append_u16(body, keepalive_s);
  append_lp_string(body, client_id);
  return with_fixed_header(0x10, body);
}

std::string encode_connack(bool session_present, std::uint8_t return_code) {
  std::string body;
  body.push_back(session_present ? 1 : 0);
  body.push_back(static_cast<char>(return_code));
  return with_fixed_header(0x20, body);
}

std::string encode_publish(const std::string& topic,
                           const std::string& payload) {
  std::string body;
  append_lp_string(body, topic);
  body += payload;  // QoS 0: no packet id
  return with_fixed_header(0x30, body);
}

std::string encode_subscribe(std::uint16_t packet_id,
                             const std::string& topic_filter) {
  std::string body;
  append_u16(body, packet_id);
  append_lp_string(body, topic_filter);
  body.push_back(0);  // requested QoS 0
  return with_fixed_header(0x82, body);
}

std::string encode_suback(std::uint16_t packet_id, std::uint8_t return_code) {
  std::string body;
  append_u16(body, packet_id);
  body.push_back(static_cast<char>(return_code));
  return with_fixed_header(0x90, body);
}

std::string encode_pingreq() { return with_fixed_header(0xC0, ""); }
std::string encode_pingresp() { return with_fixed_header(0xD0, ""); }
std::string encode_disconnect() { return with_fixed_header(0xE0, ""); }

std::optional<Packet> read_packet(std::string& buffer) {
  if (buffer.size() < 2) return std::nullopt;
  std::size_t remaining = 0;
  std::size_t multiplier = 1;
  std::size_t pos = 1;
  for (;;) {
    if (pos >= buffer.size()) return std::nullopt;
    std::uint8_t digit = static_cast<std::uint8_t>(buffer[pos]);
    remaining += static_cast<std::size_t>(digit & 0x7f) * multiplier;
    multiplier *= 128;
    ++pos;
    if ((digit & 0x80) == 0) break;
    if (pos > 4) {
      throw MqttError(MqttError::Kind::kProtocol,
                      "remaining-length field longer than 4 bytes");
    }
  }
  if (buffer.size() < pos + remaining) return std::nullopt;
  Packet p;
  p.first_byte = static_cast<std::uint8_t>(buffer[0]);
  p.body = buffer.substr(pos, remaining);
  std::uint8_t type = p.first_byte >> 4;
  if (type < 1 || type > 14) {
    throw MqttError(MqttError::Kind::kProtocol, "unknown packet type");
  }
  buffer.erase(0, pos + remaining);
  return p;
}

ConnectData parse_connect(const Packet& packet) {
  BodyReader r(packet.body);
  std::string proto = r.lp_string();
  std::uint8_t level = r.u8();
  if (proto != "MQTT" || level != 4) {
    throw MqttError(MqttError::Kind::kProtocol,
                    "not an MQTT 3.1.1 CONNECT packet");
  }
  r.u8();  // connect flags
  ConnectData c;
  c.keepalive_s = r.u16();
  c.client_id = r.lp_string();
  return c;
}

PublishData parse_publish(const Packet& packet) {
  if ((packet.first_byte & 0x06) != 0) {
    throw MqttError(MqttError::Kind::kProtocol,
                    "only QoS 0 PUBLISH is supported");
  }
  BodyReader r(packet.body);
  PublishData p;
  p.topic = r.lp_string();
  p.payload = r.rest();
  return p;
}

SubscribeData parse_subscribe(const Packet& packet) {
  BodyReader r(packet.body);
  SubscribeData s;
  s.packet_id = r.u16();
  s.topic_filter = r.lp_string();
  r.u8();  // requested QoS
  return s;
}

std::uint8_t parse_connack(const Packet& packet) {
  if (packet.type() != PacketType::kConnack) {
    throw MqttError(MqttError::Kind::kProtocol, "not a CONNACK packet");
  }
  BodyReader r(packet.body);
  r.u8();  // acknowledge flags (session present)
  return r.u8();
}

bool topic_matches(const std::string& filter, const std::string& topic) {
  std::string_view f(filter);
  std::string_view t(topic);
  for (;;) {
    auto f_slash = f.find('/');
    auto t_slash = t.find('/');
    std::string_view f_level = f.substr(0, f_slash);
    std::string_view t_level = t.substr(0, t_slash);
    if (f_level != "+" && f_level != t_level) return false;
    bool f_last = f_slash == std::string_view::npos;
    bool t_last = t_slash == std::string_view::npos;
    if (f_last || t_last) return f_last && t_last;
    f.remove_prefix(f_slash + 1);
    t.remove_prefix(t_slash + 1);
  }
}

}  // namespace cma::bus::mqtt
