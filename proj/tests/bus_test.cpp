// In-process bus and envelope wire-format tests.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <memory>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "cma/bus/bus.hpp"
#include "cma/bus/envelope.hpp"
#include "cma/common/clock.hpp"
#include "cma/common/errors.hpp"

using cma::bus::Bus;
using cma::bus::Envelope;

namespace {

Envelope sample_envelope() {
  Envelope e;
  e.msg_id = "00000000-0000-4000-8000-000000000001";
  e.agent_id = "agent";
  e.from_module = "alpha";
  e.to_module = "beta";
  e.sent_at_ms = 1700000000123;
  e.body = "hello";
  e.headers = {{"k", "v"}, {"x", "y"}};
  return e;
}

}  // namespace

TEST_CASE("topic safety rules") {
  CHECK(cma::bus::is_topic_safe("chat"));
  CHECK(cma::bus::is_topic_safe("soil_interpreter-2"));
  CHECK_FALSE(cma::bus::is_topic_safe(""));
  CHECK_FALSE(cma::bus::is_topic_safe("a/b"));
  CHECK_FALSE(cma::bus::is_topic_safe("a+b"));
  CHECK_FALSE(cma::bus::is_topic_safe("a#b"));
  CHECK_THROWS_AS(cma::bus::require_topic_safe("a/b", "module"),
                  cma::InvalidNameError);
}

TEST_CASE("canonical topic layout") {
  CHECK(cma::bus::topic_for("robo", "chat") == "cma/robo/module/chat/inbox");
  CHECK_THROWS_AS(cma::bus::topic_for("ro/bo", "chat"),
                  cma::InvalidNameError);
  CHECK_THROWS_AS(cma::bus::topic_for("robo", "ch#at"),
                  cma::InvalidNameError);
}

TEST_CASE("envelope encode/decode round trip") {
  const Envelope e = sample_envelope();
  const std::string bytes = cma::bus::encode(e);
  const Envelope back = cma::bus::decode(bytes);
  CHECK(back == e);
  // Canonical key order on the wire.
  CHECK(bytes.find("\"msg_id\"") < bytes.find("\"agent_id\""));
  CHECK(bytes.find("\"agent_id\"") < bytes.find("\"from\""));
  CHECK(bytes.find("\"from\"") < bytes.find("\"to\""));
  CHECK(bytes.find("\"to\"") < bytes.find("\"sent_at\""));
  CHECK(bytes.find("\"sent_at\"") < bytes.find("\"body\""));
  CHECK(bytes.find("\"body\"") < bytes.find("\"headers\""));
  CHECK(bytes.back() != '\n');
}

TEST_CASE("envelope round trip with one-mebibyte body") {
  Envelope e = sample_envelope();
  e.body.assign(1 << 20, 'x');
  for (std::size_t i = 0; i < e.body.size(); i += 4096) {
    e.body[i] = static_cast<char>('a' + (i / 4096) % 26);
  }
  e.body += "\xE2\x9C\x93";  // keep it valid UTF-8 at the tail
  const Envelope back = cma::bus::decode(cma::bus::encode(e));
  CHECK(back == e);
}

TEST_CASE("decode failures name the first missing key") {
  CHECK_THROWS_AS(cma::bus::decode("not json"),
                  cma::MalformedPayloadError);
  try {
    cma::bus::decode("{}");
    FAIL("expected MalformedPayloadError");
  } catch (const cma::MalformedPayloadError& e) {
    CHECK(e.missing_key() == "msg_id");
  }
  try {
    cma::bus::decode(R"({"msg_id":"m","agent_id":"a","from":"f"})");
    FAIL("expected MalformedPayloadError");
  } catch (const cma::MalformedPayloadError& e) {
    CHECK(e.missing_key() == "to");
  }
  // Mistyped field counts as missing.
  try {
    cma::bus::decode(
        R"({"msg_id":"m","agent_id":"a","from":"f","to":"t",)"
        R"("sent_at":"notanumber","body":"b","headers":{}})");
    FAIL("expected MalformedPayloadError");
  } catch (const cma::MalformedPayloadError& e) {
    CHECK(e.missing_key() == "sent_at");
  }
}

TEST_CASE("publish/subscribe delivers in per-sender order") {
  cma::RealClock clock;
  Bus bus({.agent_id = "agent", .queue_capacity = 4096}, clock);
  auto inbox = bus.subscribe("sink");

  constexpr int kSenders = 4;
  constexpr int kPerSender = 200;
  std::vector<std::thread> senders;
  for (int s = 0; s < kSenders; ++s) {
    senders.emplace_back([&, s] {
      for (int i = 0; i < kPerSender; ++i) {
        auto e = bus.make_envelope("sender" + std::to_string(s), "sink",
                                   std::to_string(i));
        bus.publish(e);
      }
    });
  }
  for (auto& t : senders) t.join();

  std::map<std::string, int> next_expected;
  int received = 0;
  while (auto e = inbox->poll()) {
    ++received;
    const int seq = std::stoi(e->body);
    CHECK(seq == next_expected[e->from_module]);
    next_expected[e->from_module] = seq + 1;
  }
  CHECK(received == kSenders * kPerSender);
  for (int s = 0; s < kSenders; ++s) {
    CHECK(next_expected["sender" + std::to_string(s)] == kPerSender);
  }

  auto counters = bus.counters();
  CHECK(counters.published == kSenders * kPerSender);
  CHECK(counters.delivered == kSenders * kPerSender);
  CHECK(counters.dropped == 0);
}

TEST_CASE("messages to unsubscribed modules count as dropped") {
  cma::RealClock clock;
  Bus bus({.agent_id = "agent"}, clock);
  bus.publish(bus.make_envelope("a", "nobody", "lost"));
  auto counters = bus.counters();
  CHECK(counters.published == 1);
  CHECK(counters.delivered == 0);
  CHECK(counters.dropped == 1);
}

TEST_CASE("full inbox evicts the oldest entry") {
  cma::RealClock clock;
  Bus bus({.agent_id = "agent", .queue_capacity = 3}, clock);
  auto inbox = bus.subscribe("sink");
  for (int i = 0; i < 5; ++i) {
    bus.publish(bus.make_envelope("a", "sink", std::to_string(i)));
  }
  CHECK(inbox->pending() == 3);
  auto first = inbox->poll();
  REQUIRE(first.has_value());
  CHECK(first->body == "2");  // 0 and 1 were evicted.
  auto counters = bus.counters();
  CHECK(counters.dropped == 2);
}

TEST_CASE("drain pops at most the requested batch") {
  cma::RealClock clock;
  Bus bus({.agent_id = "agent"}, clock);
  auto inbox = bus.subscribe("sink");
  for (int i = 0; i < 10; ++i) {
    bus.publish(bus.make_envelope("a", "sink", std::to_string(i)));
  }
  auto batch = inbox->drain(4);
  CHECK(batch.size() == 4);
  CHECK(batch.front().body == "0");
  CHECK(batch.back().body == "3");
  CHECK(inbox->pending() == 6);
}

TEST_CASE("one consumer slot per module name") {
  cma::RealClock clock;
  Bus bus({.agent_id = "agent"}, clock);
  auto inbox = bus.subscribe("solo");
  CHECK_THROWS_AS(bus.subscribe("solo"), cma::DuplicateSubscriptionError);
  inbox.reset();  // Releasing the slot allows re-subscription.
  CHECK_NOTHROW(bus.subscribe("solo"));
}

TEST_CASE("make_envelope stamps identity and time") {
  cma::RealClock clock;
  Bus bus({.agent_id = "agent"}, clock);
  auto a = bus.make_envelope("x", "y", "one");
  auto b = bus.make_envelope("x", "y", "two");
  CHECK(a.msg_id != b.msg_id);
  CHECK(a.agent_id == "agent");
  CHECK(a.from_module == "x");
  CHECK(a.to_module == "y");
  CHECK(a.sent_at_ms > 0);
  CHECK_THROWS_AS(bus.publish(bus.make_envelope("x", "bad/name", "z")),
                  cma::InvalidNameError);
}

TEST_CASE("shutdown accounts for everything still queued") {
  cma::RealClock clock;
  Bus bus({.agent_id = "agent"}, clock);
  auto inbox = bus.subscribe("sink");
  for (int i = 0; i < 7; ++i) {
    bus.publish(bus.make_envelope("a", "sink", "m"));
  }
  (void)inbox->poll();  // deliver one
  bus.shutdown();
  CHECK(bus.stopped());
  CHECK_THROWS_AS(bus.publish(bus.make_envelope("a", "sink", "late")),
                  cma::BusStoppedError);
  auto counters = bus.counters();
  CHECK(counters.published == 7);
  CHECK(counters.published == counters.delivered + counters.dropped);
}
