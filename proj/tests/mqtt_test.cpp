// MQTT 3.1.1 QoS-0 codec, loopback broker, and client tests.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "cma/bus/mqtt.hpp"
#include "cma/bus/mqtt_client.hpp"
#include "cma/bus/mqtt_net.hpp"
#include "cma/common/errors.hpp"

namespace mqtt = cma::bus::mqtt;

namespace {

mqtt::Packet must_read(std::string& buffer) {
  auto packet = mqtt::read_packet(buffer);
  REQUIRE(packet.has_value());
  return *packet;
}

/// Waits until `done` returns true or the deadline passes.
bool wait_for(const std::function<bool()>& done, int timeout_ms = 5000) {
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::milliseconds(timeout_ms);
  while (std::chrono::steady_clock::now() < deadline) {
    if (done()) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  return done();
}

}  // namespace

TEST_CASE("connect packet round trip") {
  std::string buffer = mqtt::encode_connect("client-7", 60);
  auto packet = must_read(buffer);
  CHECK(buffer.empty());
  CHECK(packet.type() == mqtt::PacketType::kConnect);
  auto data = mqtt::parse_connect(packet);
  CHECK(data.client_id == "client-7");
  CHECK(data.keepalive_s == 60);
}

TEST_CASE("publish packet round trip") {
  std::string buffer = mqtt::encode_publish("cma/a/module/chat/inbox", "hi");
  auto packet = must_read(buffer);
  CHECK(packet.type() == mqtt::PacketType::kPublish);
  auto data = mqtt::parse_publish(packet);
  CHECK(data.topic == "cma/a/module/chat/inbox");
  CHECK(data.payload == "hi");
}

TEST_CASE("subscribe and suback round trip") {
  std::string buffer = mqtt::encode_subscribe(42, "cma/a/module/+/inbox");
  auto packet = must_read(buffer);
  CHECK(packet.type() == mqtt::PacketType::kSubscribe);
  auto data = mqtt::parse_subscribe(packet);
  CHECK(data.packet_id == 42);
  CHECK(data.topic_filter == "cma/a/module/+/inbox");

  std::string ack = mqtt::encode_suback(42, 0);
  auto ack_packet = must_read(ack);
  CHECK(ack_packet.type() == mqtt::PacketType::kSuback);
}

TEST_CASE("connack carries the return code") {
  std::string ok = mqtt::encode_connack(false, 0);
  CHECK(mqtt::parse_connack(must_read(ok)) == 0);
  std::string refused = mqtt::encode_connack(false, 5);
  CHECK(mqtt::parse_connack(must_read(refused)) == 5);
}

TEST_CASE("control packets round trip") {
  std::string ping = mqtt::encode_pingreq();
  CHECK(must_read(ping).type() == mqtt::PacketType::kPingreq);
  std::string pong = mqtt::encode_pingresp();
  CHECK(must_read(pong).type() == mqtt::PacketType::kPingresp);
  std::string bye = mqtt::encode_disconnect();
  CHECK(must_read(bye).type() == mqtt::PacketType::kDisconnect);
}

TEST_CASE("remaining-length encoding spans multiple bytes") {
  // 200 bytes: two-byte remaining length. 20000 bytes: three-byte length.
  for (std::size_t size : {std::size_t{200}, std::size_t{20000}}) {
    std::string payload(size, 'p');
    std::string buffer = mqtt::encode_publish("t", payload);
    auto packet = must_read(buffer);
    CHECK(buffer.empty());
    CHECK(mqtt::parse_publish(packet).payload == payload);
  }
}

TEST_CASE("read_packet waits for a complete packet") {
  const std::string whole = mqtt::encode_publish("topic", "payload");
  std::string buffer;
  for (std::size_t i = 0; i + 1 < whole.size(); ++i) {
    buffer.push_back(whole[i]);
    CHECK_FALSE(mqtt::read_packet(buffer).has_value());
  }
  buffer.push_back(whole.back());
  auto packet = mqtt::read_packet(buffer);
  REQUIRE(packet.has_value());
  CHECK(mqtt::parse_publish(*packet).payload == "payload");
  CHECK(buffer.empty());
}

TEST_CASE("two packets in one buffer come out one at a time") {
  std::string buffer =
      mqtt::encode_publish("a", "1") + mqtt::encode_publish("b", "2");
  auto first = must_read(buffer);
  CHECK(mqtt::parse_publish(first).topic == "a");
  auto second = must_read(buffer);
  CHECK(mqtt::parse_publish(second).topic == "b");
  CHECK(buffer.empty());
}

TEST_CASE("topic filter matching with single-level wildcard") {
  CHECK(mqtt::topic_matches("cma/a/module/+/inbox",
                            "cma/a/module/chat/inbox"));
  CHECK_FALSE(mqtt::topic_matches("cma/a/module/+/inbox",
                                  "cma/b/module/chat/inbox"));
  CHECK_FALSE(mqtt::topic_matches("cma/a/module/+/inbox",
                                  "cma/a/module/chat/extra/inbox"));
  CHECK(mqtt::topic_matches("exact/topic", "exact/topic"));
  CHECK_FALSE(mqtt::topic_matches("exact/topic", "exact/Topic"));
  CHECK(mqtt::topic_matches("+/end", "start/end"));
  CHECK(mqtt::topic_matches("start/+", "start/end"));
  CHECK_FALSE(mqtt::topic_matches("start/+", "start"));
}

TEST_CASE("broker routes publishes to matching subscribers") {
  mqtt::MiniBroker broker;
  const std::uint16_t port = broker.start();
  REQUIRE(port != 0);

  std::mutex mutex;
  std::vector<std::pair<std::string, std::string>> got;

  mqtt::MqttClient sub({.host = "127.0.0.1", .port = port,
                        .client_id = "sub"});
  sub.set_message_handler([&](const std::string& topic,
                              const std::string& payload) {
    std::lock_guard lock(mutex);
    got.emplace_back(topic, payload);
  });
  sub.connect();
  sub.subscribe("cma/agent/module/+/inbox");

  mqtt::MqttClient pub({.host = "127.0.0.1", .port = port,
                        .client_id = "pub"});
  pub.connect();
  CHECK(pub.publish("cma/agent/module/chat/inbox", "payload-bytes"));
  CHECK(pub.publish("cma/other/module/chat/inbox", "must-not-arrive"));
  CHECK(pub.publish("cma/agent/module/motor/inbox", "second"));

  REQUIRE(wait_for([&] {
    std::lock_guard lock(mutex);
    return got.size() >= 2;
  }));
  {
    std::lock_guard lock(mutex);
    REQUIRE(got.size() == 2);
    CHECK(got[0].first == "cma/agent/module/chat/inbox");
    CHECK(got[0].second == "payload-bytes");
    CHECK(got[1].first == "cma/agent/module/motor/inbox");
    CHECK(got[1].second == "second");
  }

  pub.disconnect();
  sub.disconnect();
  broker.stop();
}

TEST_CASE("broker fans a publish out to every subscriber") {
  mqtt::MiniBroker broker;
  const std::uint16_t port = broker.start();

  std::atomic<int> hits{0};
  mqtt::MqttClient a({.host = "127.0.0.1", .port = port, .client_id = "a"});
  mqtt::MqttClient b({.host = "127.0.0.1", .port = port, .client_id = "b"});
  for (auto* client : {&a, &b}) {
    client->set_message_handler(
        [&](const std::string&, const std::string&) { ++hits; });
    client->connect();
    client->subscribe("news/+");
  }

  mqtt::MqttClient pub({.host = "127.0.0.1", .port = port,
                        .client_id = "pub"});
  pub.connect();
  pub.publish("news/today", "x");

  CHECK(wait_for([&] { return hits.load() == 2; }));
  pub.disconnect();
  a.disconnect();
  b.disconnect();
  broker.stop();
}

TEST_CASE("connecting to a dead port is a distinguishable refusal") {
  mqtt::MiniBroker broker;
  const std::uint16_t port = broker.start();
  broker.stop();  // The port is now closed.
  mqtt::MqttClient client({.host = "127.0.0.1", .port = port,
                           .client_id = "c", .connect_timeout_ms = 500});
  CHECK_THROWS_AS(client.connect(), cma::MqttError);
}

TEST_CASE("malformed fixed header raises a protocol error") {
  // Remaining-length bytes may not exceed four continuation bytes.
  std::string bad;
  bad.push_back(static_cast<char>(0x30));
  for (int i = 0; i < 5; ++i) bad.push_back(static_cast<char>(0xFF));
  CHECK_THROWS_AS(mqtt::read_packet(bad), cma::MqttError);
}
