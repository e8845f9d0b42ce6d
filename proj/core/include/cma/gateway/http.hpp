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

#ifndef CMA_GATEWAY_HTTP_HPP_
#define CMA_GATEWAY_HTTP_HPP_

#include <cstdint>
#include <memory>
#include <mutex>
#include <random>
#include <string>

#include "cma/common/clock.hpp"
#include "cma/gateway/gateway.hpp"

namespace cma::gateway {

/// Encodes a request to the de-facto chat-completions JSON wire shape:
/// model, messages array with role/content (system prompt first when
/// non-empty), temperature, max_tokens.
std::string http_backend_encode(const ChatRequest& request);

/// Decodes choices[0].message.content. Throws GatewayError
/// (kUpstreamMalformed) on unparseable payloads or empty choices.
std::string http_backend_decode(const std::string& bytes);

/// Retry/backoff policy for retryable failures (timeout, transport, 5xx,
/// 429): exponential backoff with full jitter.
struct RetryPolicy {
  int max_retries = 3;
  std::int64_t backoff_base_ms = 500;
  double backoff_factor = 2.0;
  std::int64_t deadline_ms = 30000;  // Total budget across attempts.
};

/// HTTP chat-completions backend.
class HttpGateway : public Gateway {
 public:
  struct Options {
    std::string base_url;  // e.g. "http://127.0.0.1:8080"
    std::string path = "/v1/chat/completions";
    std::string api_key;   // Sent as "Authorization: Bearer <key>" if set.
    RetryPolicy retry;
    /// Sleep/now source for backoff; system clock when null.
    Clock* clock = nullptr;
    /// Jitter seed; 0 draws from std::random_device.
    std::uint64_t seed = 0;
  };

  explicit HttpGateway(Options options);

  ChatResponse complete(const ChatRequest& request) override;

 private:
  std::int64_t now_ms() const;
  void sleep_ms(std::int64_t duration_ms);
  std::int64_t jitter(std::int64_t upper_ms);

  Options options_;
  std::mutex rng_mutex_;
  std::mt19937_64 rng_;
};

std::unique_ptr<Gateway> make_http_gateway(HttpGateway::Options options);

}  // namespace cma::gateway

#endif  // CMA_GATEWAY_HTTP_HPP_
