// Gateway tests: scripted rules, echo-digest fallback, HTTP backend with
// retry/backoff, and the shared concurrency limiter.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "cma/bus/mqtt_net.hpp"
#include "cma/common/clock.hpp"
#include "cma/common/errors.hpp"
#include "cma/gateway/gateway.hpp"
#include "cma/gateway/http.hpp"
#include "cma/gateway/limiter.hpp"
#include "cma/gateway/script.hpp"

using cma::GatewayError;
using cma::ParseError;
using namespace cma::gateway;

namespace fs = std::filesystem;

namespace {

ChatRequest user_request(const std::string& system, const std::string& user) {
  ChatRequest request;
  request.system_prompt = system;
  if (!user.empty() || system.empty()) {
    request.messages.push_back({Role::kUser, user});
  }
  return request;
}

/// A fake chat-completions upstream bound to an ephemeral port.
class FakeUpstream {
 public:
  explicit FakeUpstream(httplib::Server::Handler handler) {
    server_.Post("/v1/chat/completions", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeUpstream() {
    server_.stop();
    thread_.join();
  }
  std::string base_url() const {
    return "http://127.0.0.1:" + std::to_string(port_);
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::string ok_body(const std::string& content) {
  nlohmann::json body;
  body["choices"] = {{{"message", {{"content", content}}}}};
  return body.dump();
}

}  // namespace

TEST_CASE("echo fallback counts Unicode code points") {
  ScriptedGateway gateway;
  auto response = gateway.complete(user_request("", "héllo"));
  CHECK(response.text == "ECHO(5):héllo");
  CHECK(response.backend == "echo");
  CHECK(response.attempts == 1);

  CHECK(gateway.complete(user_request("", "hello")).text == "ECHO(5):hello");
  CHECK(gateway.complete(user_request("", "日本語")).text == "ECHO(3):日本語");

  // System prompt only: the last user message is empty.
  ChatRequest system_only;
  system_only.system_prompt = "You are a robot.";
  CHECK(gateway.complete(system_only).text == "ECHO(0):");
}

TEST_CASE("echo uses the last user message, skipping assistant turns") {
  ScriptedGateway gateway;
  ChatRequest request;
  request.messages.push_back({Role::kUser, "first"});
  request.messages.push_back({Role::kAssistant, "reply"});
  request.messages.push_back({Role::kUser, "second"});
  request.messages.push_back({Role::kAssistant, "ignored"});
  CHECK(gateway.complete(request).text == "ECHO(6):second");
}

TEST_CASE("an empty request is rejected") {
  ScriptedGateway gateway;
  ChatRequest empty;
  CHECK_THROWS_AS(gateway.complete(empty), std::invalid_argument);
}

TEST_CASE("first matching rule wins") {
  std::vector<ScriptRule> rules;
  rules.push_back({.match = "water", .response = "rule one"});
  rules.push_back({.match = "water the plant", .response = "rule two"});
  ScriptedGateway gateway(std::move(rules));
  auto response = gateway.complete(user_request("", "water the plant"));
  CHECK(response.text == "rule one");
  CHECK(response.backend == "scripted");
}

TEST_CASE("rules match against system prompt and last user message") {
  std::vector<ScriptRule> rules;
  rules.push_back({.match = "You are the soil module", .response = "dry"});
  ScriptedGateway gateway(std::move(rules));
  // Anchor text appears only in the system prompt.
  auto hit = gateway.complete(
      user_request("You are the soil module.", "reading: 0.1"));
  CHECK(hit.text == "dry");
  // Different system prompt, no match: echo.
  auto miss = gateway.complete(user_request("You are the chat.", "hello"));
  CHECK(miss.backend == "echo");
}

TEST_CASE("once rules are consumed in order") {
  std::vector<ScriptRule> rules;
  rules.push_back({.match = "decide", .response = "act", .once = true});
  rules.push_back({.match = "decide", .response = "wait", .once = true});
  rules.push_back({.match = "decide", .response = "sleep"});
  ScriptedGateway gateway(std::move(rules));
  CHECK(gateway.complete(user_request("", "decide now")).text == "act");
  CHECK(gateway.complete(user_request("", "decide now")).text == "wait");
  CHECK(gateway.complete(user_request("", "decide now")).text == "sleep");
  CHECK(gateway.complete(user_request("", "decide now")).text == "sleep");
}

TEST_CASE("regex rules splice captures and escape dollars") {
  std::vector<ScriptRule> rules;
  rules.push_back({.match = "id=([0-9]+) \\| (\\w+)",
                   .regex = true,
                   .response = "delete $1 ($2) for $$5"});
  ScriptedGateway gateway(std::move(rules));
  auto response = gateway.complete(user_request("", "id=42 | filler"));
  CHECK(response.text == "delete 42 (filler) for $5");

  // Unreferenced groups and out-of-range indices splice as empty.
  std::vector<ScriptRule> more;
  more.push_back({.match = "x(y)?z", .regex = true, .response = "[$1][$9]"});
  ScriptedGateway gateway2(std::move(more));
  CHECK(gateway2.complete(user_request("", "xz")).text == "[][]");
}

TEST_CASE("rule line parsing names the offending line") {
  auto rule = parse_script_rule_line(
      R"({"match":"a","response":"b","once":true})", 3);
  CHECK(rule.match == "a");
  CHECK(rule.response == "b");
  CHECK(rule.once);
  CHECK_FALSE(rule.regex);

  auto check_line = [](const std::string& line, std::size_t line_no) {
    try {
      parse_script_rule_line(line, line_no);
      FAIL_CHECK("expected ParseError for: " << line);
    } catch (const ParseError& e) {
      CHECK(e.line() == line_no);
    }
  };
  check_line("not json", 7);
  check_line("[1,2]", 8);
  check_line(R"({"response":"b"})", 9);
  check_line(R"({"match":"a"})", 10);
  check_line(R"({"match":5,"response":"b"})", 11);
  check_line(R"({"match":"a","response":"b","regex":"yes"})", 12);
  check_line(R"({"match":"a","response":"b","once":1})", 13);
  check_line(R"({"match":"(unclosed","response":"b","regex":true})", 14);
}

TEST_CASE("load_script reads ordered rules and reports physical lines") {
  fs::path dir = fs::temp_directory_path() /
                 ("cma_gateway_test_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  fs::path good = dir / "good.jsonl";
  {
    std::ofstream out(good);
    out << R"({"match":"one","response":"1"})" << "\n";
    out << "\n";
    out << "   \n";
    out << R"({"match":"two","response":"2","regex":false})" << "\n";
  }
  auto rules = load_script(good.string());
  REQUIRE(rules.size() == 2);
  CHECK(rules[0].match == "one");
  CHECK(rules[1].match == "two");

  fs::path bad = dir / "bad.jsonl";
  {
    std::ofstream out(bad);
    out << R"({"match":"one","response":"1"})" << "\n";
    out << "\n";
    out << "oops\n";
  }
  try {
    load_script(bad.string());
    FAIL_CHECK("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);  // Physical line number, blank lines included.
  }

  CHECK_THROWS_AS(load_script((dir / "missing.jsonl").string()),
                  cma::ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("match_text joins system prompt and last user message") {
  ChatRequest request = user_request("SYS", "USER");
  CHECK(match_text(request) == "SYS\nUSER");
  ChatRequest bare;
  bare.system_prompt = "SYS";
  CHECK(match_text(bare) == "SYS\n");
}

TEST_CASE("concurrency limiter admits at most `limit` callers") {
  ConcurrencyLimiter limiter(3);
  std::atomic<int> active{0};
  std::atomic<int> peak{0};
  std::vector<std::thread> threads;
  threads.reserve(16);
  for (int i = 0; i < 16; ++i) {
    threads.emplace_back([&] {
      auto permit = limiter.acquire();
      int now = ++active;
      int prev = peak.load();
      while (now > prev && !peak.compare_exchange_weak(prev, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
      --active;
    });
  }
  for (auto& t : threads) t.join();
  CHECK(peak.load() <= 3);
  CHECK(peak.load() >= 1);
  CHECK(limiter.active() == 0);
}

TEST_CASE("limited gateway still completes every call") {
  auto inner = make_echo_gateway();
  auto limited = make_limited_gateway(std::move(inner), 2);
  std::atomic<int> done{0};
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&, i] {
      auto response =
          limited->complete(user_request("", "m" + std::to_string(i)));
      if (response.text == "ECHO(2):m" + std::to_string(i)) ++done;
    });
  }
  for (auto& t : threads) t.join();
  CHECK(done.load() == 8);
}

TEST_CASE("http request wire shape") {
  ChatRequest request;
  request.system_prompt = "SYS";
  request.messages.push_back({Role::kUser, "hello"});
  request.messages.push_back({Role::kAssistant, "hi"});
  request.model_id = "test-model";
  request.max_tokens = 64;
  std::string wire = http_backend_encode(request);

  auto parsed = nlohmann::json::parse(wire);
  CHECK(parsed["model"] == "test-model");
  CHECK(parsed["temperature"] == 0.0);
  CHECK(parsed["max_tokens"] == 64);
  REQUIRE(parsed["messages"].size() == 3);
  CHECK(parsed["messages"][0]["role"] == "system");
  CHECK(parsed["messages"][0]["content"] == "SYS");
  CHECK(parsed["messages"][1]["role"] == "user");
  CHECK(parsed["messages"][1]["content"] == "hello");
  CHECK(parsed["messages"][2]["role"] == "assistant");
  CHECK(parsed["messages"][2]["content"] == "hi");

  // Stable key order on the wire.
  CHECK(wire.find("\"model\"") < wire.find("\"messages\""));
  CHECK(wire.find("\"messages\"") < wire.find("\"temperature\""));
  CHECK(wire.find("\"temperature\"") < wire.find("\"max_tokens\""));

  // No system entry when the prompt is empty.
  ChatRequest bare;
  bare.messages.push_back({Role::kUser, "x"});
  auto bare_parsed = nlohmann::json::parse(http_backend_encode(bare));
  REQUIRE(bare_parsed["messages"].size() == 1);
  CHECK(bare_parsed["messages"][0]["role"] == "user");
}

TEST_CASE("http response decoding") {
  CHECK(http_backend_decode(ok_body("result text")) == "result text");

  auto check_malformed = [](const std::string& body) {
    try {
      http_backend_decode(body);
      FAIL_CHECK("expected malformed error for: " << body);
    } catch (const GatewayError& e) {
      CHECK(e.kind() == GatewayError::Kind::kUpstreamMalformed);
      CHECK_FALSE(e.retryable());
    }
  };
  check_malformed("not json");
  check_malformed("[]");
  check_malformed("{}");
  check_malformed(R"({"choices":[]})");
  check_malformed(R"({"choices":[{"message":{}}]})");
  check_malformed(R"({"choices":[{"message":{"content":5}}]})");
}

TEST_CASE("http gateway retries 5xx and reports attempts") {
  std::atomic<int> calls{0};
  FakeUpstream upstream([&](const httplib::Request& req,
                            httplib::Response& res) {
    int n = ++calls;
    auto body = nlohmann::json::parse(req.body);
    CHECK(body["model"] == "m1");
    if (n < 3) {
      res.status = 500;
      res.set_content("overloaded", "text/plain");
    } else {
      res.set_content(ok_body("recovered"), "application/json");
    }
  });

  cma::RealClock fast(400.0);  // Virtual backoff milliseconds pass quickly.
  HttpGateway gateway(
      {.base_url = upstream.base_url(),
       .retry = {.max_retries = 3, .backoff_base_ms = 200,
                 .deadline_ms = 2000000},
       .clock = &fast,
       .seed = 7});
  ChatRequest request = user_request("SYS", "go");
  request.model_id = "m1";
  auto response = gateway.complete(request);
  CHECK(response.text == "recovered");
  CHECK(response.backend == "http");
  CHECK(response.attempts == 3);
  CHECK(calls.load() == 3);
}

TEST_CASE("http gateway gives up after max retries") {
  std::atomic<int> calls{0};
  FakeUpstream upstream([&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 503;
  });
  cma::RealClock fast(400.0);
  HttpGateway gateway(
      {.base_url = upstream.base_url(),
       .retry = {.max_retries = 2, .backoff_base_ms = 100,
                 .deadline_ms = 2000000},
       .clock = &fast,
       .seed = 7});
  try {
    gateway.complete(user_request("SYS", "go"));
    FAIL_CHECK("expected GatewayError");
  } catch (const GatewayError& e) {
    CHECK(e.kind() == GatewayError::Kind::kUpstreamStatus);
    CHECK(e.status() == 503);
  }
  CHECK(calls.load() == 3);  // Initial attempt + 2 retries.
}

TEST_CASE("http gateway does not retry non-retryable statuses") {
  std::atomic<int> calls{0};
  FakeUpstream upstream([&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 404;
  });
  HttpGateway gateway({.base_url = upstream.base_url(), .seed = 7});
  try {
    gateway.complete(user_request("SYS", "go"));
    FAIL_CHECK("expected GatewayError");
  } catch (const GatewayError& e) {
    CHECK(e.kind() == GatewayError::Kind::kUpstreamStatus);
    CHECK(e.status() == 404);
    CHECK_FALSE(e.retryable());
  }
  CHECK(calls.load() == 1);
}

TEST_CASE("http gateway does not retry malformed 200 bodies") {
  std::atomic<int> calls{0};
  FakeUpstream upstream([&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.set_content("garbage", "application/json");
  });
  HttpGateway gateway({.base_url = upstream.base_url(), .seed = 7});
  try {
    gateway.complete(user_request("SYS", "go"));
    FAIL_CHECK("expected GatewayError");
  } catch (const GatewayError& e) {
    CHECK(e.kind() == GatewayError::Kind::kUpstreamMalformed);
  }
  CHECK(calls.load() == 1);
}

TEST_CASE("http gateway sends the bearer token") {
  std::string seen_auth;
  FakeUpstream upstream([&](const httplib::Request& req,
                            httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    res.set_content(ok_body("ok"), "application/json");
  });
  HttpGateway gateway({.base_url = upstream.base_url(),
                       .api_key = "sk-test-123", .seed = 7});
  CHECK(gateway.complete(user_request("SYS", "go")).text == "ok");
  CHECK(seen_auth == "Bearer sk-test-123");
}

TEST_CASE("transport failures are retried then surfaced") {
  // Find a port with nothing listening by binding and releasing one.
  std::uint16_t dead_port = 0;
  {
    cma::bus::mqtt::TcpListener listener;
    listener.listen("127.0.0.1", 0);
    dead_port = listener.port();
    listener.close();
  }
  cma::RealClock fast(400.0);
  HttpGateway gateway(
      {.base_url = "http://127.0.0.1:" + std::to_string(dead_port),
       .retry = {.max_retries = 1, .backoff_base_ms = 50,
                 .deadline_ms = 2000000},
       .clock = &fast,
       .seed = 7});
  try {
    gateway.complete(user_request("SYS", "go"));
    FAIL_CHECK("expected GatewayError");
  } catch (const GatewayError& e) {
    bool transportish = e.kind() == GatewayError::Kind::kTransport ||
                        e.kind() == GatewayError::Kind::kTimeout;
    CHECK(transportish);
  }
}

TEST_CASE("http gateway rejects empty requests without calling out") {
  HttpGateway gateway({.base_url = "http://127.0.0.1:1"});
  ChatRequest empty;
  CHECK_THROWS_AS(gateway.complete(empty), std::invalid_argument);
}
