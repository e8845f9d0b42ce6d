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

#ifndef CMA_MEMORY_EMBEDDER_HPP_
#define CMA_MEMORY_EMBEDDER_HPP_

#include <cstddef>
#include <string>
#include <vector>

namespace cma::memory {

/// Text-to-vector contract. Implementations must be deterministic per
/// instance and emit a fixed dimension; an external embedding service can
/// stand in behind this interface.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dimension() const = 0;
  /// Returns an L2-normalized vector, or the zero vector when the text
  /// yields no tokens.
  virtual std::vector<double> embed(const std::string& text) const = 0;
};

/// Reference embedder: signed hashed bag-of-words.
///
/// Tokenization lowercases ASCII letters and splits on runs of bytes that
/// are neither ASCII alphanumerics nor >= 0x80 (so UTF-8 continuation and
/// lead bytes stay inside tokens). Each token is hashed with FNV-1a 64;
/// the hash picks a bucket in [0, D) and a second mix picks the sign.
/// Accumulated counts are L2-normalized.
class HashedBagEmbedder : public Embedder {
 public:
  static constexpr std::size_t kDefaultDimension = 256;

  explicit HashedBagEmbedder(std::size_t dimension = kDefaultDimension);

  std::size_t dimension() const override { return dimension_; }
  std::vector<double> embed(const std::string& text) const override;

 private:
  std::size_t dimension_;
};

/// Cosine similarity clamped to [-1, 1]. Inputs are expected to be
/// L2-normalized (the clamp absorbs rounding drift); a zero vector on
/// either side yields 0.
double cosine(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace cma::memory

#endif  // CMA_MEMORY_EMBEDDER_HPP_
