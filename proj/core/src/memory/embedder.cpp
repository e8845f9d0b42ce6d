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

#include "cma/memory/embedder.hpp"

#include <cmath>
#include <cstdint>
#include <string_view>

namespace cma::memory {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t fnv1a64(std::string_view token) {
  std::uint64_t h = kFnvOffset;
  for (unsigned char c : token) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

bool is_token_byte(unsigned char c) {
  if (c >= 0x80) return true;  // Keep multi-byte UTF-8 sequences intact.
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z');
}

char lower_ascii(unsigned char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a')
                                : static_cast<char>(c);
}

}  // namespace

HashedBagEmbedder::HashedBagEmbedder(std::size_t dimension)
    : dimension_(dimension) {}

std::vector<double> HashedBagEmbedder::embed(const std::string& text) const {
  std::vector<double> vec(dimension_, 0.0);
  std::string token;
  bool any_token = false;
  auto flush_token = [&] {
    if (token.empty()) return;
    any_token = true;
    std::uint64_t h = fnv1a64(token);
    std::size_t bucket = static_cast<std::size_t>(h % dimension_);
    double sign = (splitmix64(h) & 1ULL) != 0 ? 1.0 : -1.0;
    vec[bucket] += sign;
    token.clear();
  };
  for (unsigned char c : text) {
    if (is_token_byte(c)) {
      token.push_back(lower_ascii(c));
    } else {
      flush_token();
    }
  }
  flush_token();
  if (!any_token) return vec;  // Zero vector: no tokens to hash.

  double norm_sq = 0.0;
  for (double v : vec) norm_sq += v * v;
  if (norm_sq == 0.0) return vec;  // Signed counts cancelled exactly.
  double inv = 1.0 / std::sqrt(norm_sq);
  for (double& v : vec) v *= inv;
  return vec;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return 0.0;
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  if (dot > 1.0) return 1.0;
  if (dot < -1.0) return -1.0;
  return dot;
}

}  // namespace cma::memory
