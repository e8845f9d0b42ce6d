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

#include "cma/gateway/http.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "cma/common/errors.hpp"

namespace cma::gateway {

namespace {

using nlohmann::ordered_json;

const char* role_name(Role role) {
  return role == Role::kUser ? "user" : "assistant";
}

/// One HTTP attempt; throws GatewayError on any failure.
std::string attempt_once(const HttpGateway::Options& options,
                         const std::string& payload,
                         std::int64_t budget_ms) {
  httplib::Client client(options.base_url);
  auto seconds = std::max<std::int64_t>(budget_ms / 1000, 0);
  auto micros = std::max<std::int64_t>((budget_ms % 1000) * 1000, 1);
  client.set_connection_timeout(static_cast<time_t>(seconds),
                                static_cast<time_t>(micros));
  client.set_read_timeout(static_cast<time_t>(seconds),
                          static_cast<time_t>(micros));
  client.set_write_timeout(static_cast<time_t>(seconds),
                           static_cast<time_t>(micros));

  httplib::Headers headers;
  if (!options.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + options.api_key);
  }
  auto result =
      client.Post(options.path, headers, payload, "application/json");
  if (!result) {
    switch (result.error()) {
      case httplib::Error::ConnectionTimeout:
        throw GatewayError(GatewayError::Kind::kTimeout,
                           "connection timed out");
      case httplib::Error::Read:
      case httplib::Error::Write:
        throw GatewayError(GatewayError::Kind::kTimeout,
                           "request timed out mid-transfer");
      default:
        throw GatewayError(GatewayError::Kind::kTransport,
                           "transport failure: " +
                               httplib::to_string(result.error()));
    }
  }
  if (result->status != 200) {
    throw GatewayError(GatewayError::Kind::kUpstreamStatus,
                       "upstream returned status " +
                           std::to_string(result->status),
                       result->status);
  }
  return http_backend_decode(result->body);
}

}  // namespace

std::string http_backend_encode(const ChatRequest& request) {
  ordered_json payload;
  payload["model"] = request.model_id;
  ordered_json messages = ordered_json::array();
  if (!request.system_prompt.empty()) {
    messages.push_back(
        {{"role", "system"}, {"content", request.system_prompt}});
  }
  for (const ChatMessage& message : request.messages) {
    messages.push_back(
        {{"role", role_name(message.role)}, {"content", message.text}});
  }
  payload["messages"] = std::move(messages);
  payload["temperature"] = request.temperature;
  payload["max_tokens"] = request.max_tokens;
  return payload.dump();
}

std::string http_backend_decode(const std::string& bytes) {
  nlohmann::json payload = nlohmann::json::parse(bytes, nullptr, false);
  if (payload.is_discarded() || !payload.is_object()) {
    throw GatewayError(GatewayError::Kind::kUpstreamMalformed,
                       "response body is not a JSON object");
  }
  if (!payload.contains("choices") || !payload["choices"].is_array() ||
      payload["choices"].empty()) {
    throw GatewayError(GatewayError::Kind::kUpstreamMalformed,
                       "response has no choices");
  }
  const auto& first = payload["choices"][0];
  if (!first.is_object() || !first.contains("message") ||
      !first["message"].is_object() ||
      !first["message"].contains("content") ||
      !first["message"]["content"].is_string()) {
    throw GatewayError(GatewayError::Kind::kUpstreamMalformed,
                       "choice carries no message content");
  }
  return first["message"]["content"].get<std::string>();
}

HttpGateway::HttpGateway(Options options) : options_(std::move(options)) {
  std::uint64_t seed = options_.seed;
  if (seed == 0) {
    std::random_device rd;
    seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  }
  rng_.seed(seed);
}

std::int64_t HttpGateway::now_ms() const {
  if (options_.clock != nullptr) return options_.clock->now_ms();
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

void HttpGateway::sleep_ms(std::int64_t duration_ms) {
  if (duration_ms <= 0) return;
  if (options_.clock != nullptr) {
    options_.clock->sleep_until(options_.clock->now_ms() + duration_ms);
  } else {
    std::this_thread::sleep_for(std::chrono::milliseconds(duration_ms));
  }
}

std::int64_t HttpGateway::jitter(std::int64_t upper_ms) {
  if (upper_ms <= 0) return 0;
  std::lock_guard<std::mutex> lock(rng_mutex_);
  std::uniform_int_distribution<std::int64_t> dist(0, upper_ms);
  return dist(rng_);
}

ChatResponse HttpGateway::complete(const ChatRequest& request) {
  if (request.system_prompt.empty() && request.messages.empty()) {
    throw std::invalid_argument(
        "chat request needs a system prompt or at least one message");
  }
  const std::string payload = http_backend_encode(request);
  const std::int64_t start = now_ms();
  int attempts = 0;
  for (;;) {
    ++attempts;
    std::int64_t elapsed = now_ms() - start;
    std::int64_t budget = options_.retry.deadline_ms - elapsed;
    if (budget <= 0) {
      throw GatewayError(GatewayError::Kind::kTimeout,
                         "deadline exhausted after " +
                             std::to_string(attempts - 1) + " attempts");
    }
    try {
      std::string text = attempt_once(options_, payload, budget);
      ChatResponse response;
      response.text = std::move(text);
      response.backend = "http";
      response.latency_ms = now_ms() - start;
      response.attempts = attempts;
      return response;
    } catch (const GatewayError& e) {
      if (!e.retryable() || attempts > options_.retry.max_retries) {
        throw;
      }
      // Full jitter: uniform in [0, base * factor^(attempt-1)], capped by
      // the remaining deadline.
      double scale =
          std::pow(options_.retry.backoff_factor, attempts - 1);
      auto upper = static_cast<std::int64_t>(
          static_cast<double>(options_.retry.backoff_base_ms) * scale);
      std::int64_t remaining = options_.retry.deadline_ms - (now_ms() - start);
      sleep_ms(std::min(jitter(upper), remaining));
    }
  }
}

std::unique_ptr<Gateway> make_http_gateway(HttpGateway::Options options) {
  return std::make_unique<HttpGateway>(std::move(options));
}

}  // namespace cma::gateway
