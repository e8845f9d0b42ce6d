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

#ifndef CMA_GATEWAY_LIMITER_HPP_
#define CMA_GATEWAY_LIMITER_HPP_

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>

#include "cma/gateway/gateway.hpp"

namespace cma::gateway {

/// FIFO concurrent-call limiter: excess callers queue and are admitted in
/// arrival order (ticket lock), so no caller starves.
class ConcurrencyLimiter {
 public:
  explicit ConcurrencyLimiter(std::size_t limit);

  class Permit {
   public:
    Permit(Permit&& other) noexcept : limiter_(other.limiter_) {
      other.limiter_ = nullptr;
    }
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;
    Permit& operator=(Permit&&) = delete;
    ~Permit();

   private:
    friend class ConcurrencyLimiter;
    explicit Permit(ConcurrencyLimiter* limiter) : limiter_(limiter) {}
    ConcurrencyLimiter* limiter_;
  };

  /// Blocks until admitted; the returned permit releases on destruction.
  Permit acquire();

  std::size_t limit() const { return limit_; }
  std::size_t active();

 private:
  void release();

  const std::size_t limit_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::uint64_t next_ticket_ = 0;
  std::uint64_t now_serving_ = 0;
  std::size_t active_ = 0;
};

/// Wraps a backend with a shared concurrency limit (default 8).
std::unique_ptr<Gateway> make_limited_gateway(std::unique_ptr<Gateway> inner,
                                              std::size_t limit = 8);

}  // namespace cma::gateway

#endif  // CMA_GATEWAY_LIMITER_HPP_
