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

#ifndef CMA_MEMORY_STORE_HPP_
#define CMA_MEMORY_STORE_HPP_

#include <cstddef>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cma/common/clock.hpp"
#include "cma/memory/embedder.hpp"
#include "cma/memory/record.hpp"

namespace cma::memory {

/// The shared global state every module reads and writes. All operations
/// are safe under arbitrary concurrent callers; store/remove are atomic per
/// call and query observes a consistent snapshot.
class Memory {
 public:
  virtual ~Memory() = default;

  virtual std::vector<double> embed(const std::string& text) = 0;

  /// Appends a record (persisted before the id is returned) and returns its
  /// id. Throws StorageFullError at the configured hard cap.
  virtual std::string store(const std::string& text,
                            const std::string& source_module,
                            const std::set<std::string>& tags = {}) = 0;

  /// Top-k cosine similarity; zero-vector records excluded; hits sorted by
  /// score desc, then created_at desc, then id desc.
  virtual std::vector<QueryHit> query(const std::string& text,
                                      std::size_t k) = 0;

  /// Newest first: created_at desc, ties by id desc.
  virtual std::vector<MemoryRecord> recent(std::size_t n) = 0;

  /// Deletion op: removes listed ids (unknown ids ignored), tombstones them
  /// in the log, returns the number actually removed.
  virtual std::size_t remove(const std::vector<std::string>& ids) = 0;

  virtual std::size_t count() = 0;

  /// Most recent record written by `source_module`, if any. Lets one module
  /// observe a peer's latest output through the global state alone.
  virtual std::optional<MemoryRecord> latest_from(
      const std::string& source_module) = 0;

  /// Most recent record carrying `tag`, if any.
  virtual std::optional<MemoryRecord> latest_tagged(const std::string& tag) = 0;
};

/// In-process implementation with optional append-only JSONL persistence
/// and exact full-scan retrieval.
class MemoryStore : public Memory {
 public:
  static constexpr std::size_t kDefaultCapacity = 100000;

  struct Options {
    std::size_t capacity = kDefaultCapacity;
    /// Path of the JSONL persistence log; empty runs the store in-memory.
    std::string persist_path;
    /// Timestamp source; falls back to the system clock when null.
    Clock* clock = nullptr;
    /// When true, a torn trailing line raises LogCorruptError instead of
    /// being treated as the truncation point of an interrupted write.
    bool strict_reload = false;
  };

  MemoryStore(std::shared_ptr<Embedder> embedder, Options options);
  ~MemoryStore() override;

  std::vector<double> embed(const std::string& text) override;
  std::string store(const std::string& text, const std::string& source_module,
                    const std::set<std::string>& tags = {}) override;
  std::vector<QueryHit> query(const std::string& text, std::size_t k) override;
  std::vector<MemoryRecord> recent(std::size_t n) override;
  std::size_t remove(const std::vector<std::string>& ids) override;
  std::size_t count() override;
  std::optional<MemoryRecord> latest_from(
      const std::string& source_module) override;
  std::optional<MemoryRecord> latest_tagged(const std::string& tag) override;

  /// Rewrites the persistence log to exactly the live records; returns the
  /// new log size in records. Reload afterwards yields an identical store.
  std::size_t snapshot_and_compact();

  std::size_t dimension() const { return embedder_->dimension(); }
  const std::string& persist_path() const { return options_.persist_path; }

 private:
  std::int64_t now_ms() const;
  void reload();
  void append_line(const std::string& line);
  std::string format_id(std::uint64_t value) const;

  std::shared_ptr<Embedder> embedder_;
  Options options_;
  mutable std::mutex mutex_;
  std::map<std::string, MemoryRecord> live_;  // Keyed by id; sorted.
  std::uint64_t next_id_ = 1;
  std::ofstream out_;
};

}  // namespace cma::memory

#endif  // CMA_MEMORY_STORE_HPP_
