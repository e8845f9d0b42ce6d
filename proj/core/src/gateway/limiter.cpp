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

#include "cma/gateway/limiter.hpp"

#include <utility>

namespace cma::gateway {

ConcurrencyLimiter::ConcurrencyLimiter(std::size_t limit)
    : limit_(limit == 0 ? 1 : limit) {}

ConcurrencyLimiter::Permit::~Permit() {
  if (limiter_ != nullptr) limiter_->release();
}

ConcurrencyLimiter::Permit ConcurrencyLimiter::acquire() {
  std::unique_lock<std::mutex> lock(mutex_);
  const std::uint64_t ticket = next_ticket_++;
  cv_.wait(lock,
           [&] { return ticket == now_serving_ && active_ < limit_; });
  ++now_serving_;
  ++active_;
  cv_.notify_all();  // Wake the next ticket holder if capacity remains.
  return Permit(this);
}

std::size_t ConcurrencyLimiter::active() {
  std::lock_guard<std::mutex> lock(mutex_);
  return active_;
}

void ConcurrencyLimiter::release() {
  std::lock_guard<std::mutex> lock(mutex_);
  --active_;
  cv_.notify_all();
}

namespace {

class LimitedGateway : public Gateway {
 public:
  LimitedGateway(std::unique_ptr<Gateway> inner, std::size_t limit)
      : inner_(std::move(inner)), limiter_(limit) {}

  ChatResponse complete(const ChatRequest& request) override {
    auto permit = limiter_.acquire();
    return inner_->complete(request);
  }

 private:
  std::unique_ptr<Gateway> inner_;
  ConcurrencyLimiter limiter_;
};

}  // namespace

std::unique_ptr<Gateway> make_limited_gateway(std::unique_ptr<Gateway> inner,
                                              std::size_t limit) {
  return std::make_unique<LimitedGateway>(std::move(inner), limit);
}

}  // namespace cma::gateway
