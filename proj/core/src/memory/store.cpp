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

#include "cma/memory/store.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iterator>
#include <string_view>

#include <nlohmann/json.hpp>

#include "cma/common/errors.hpp"

namespace cma::memory {

namespace {

using nlohmann::ordered_json;

/// Orders records newest-first: created_at desc, ties by id desc.
bool newer(const MemoryRecord& a, const MemoryRecord& b) {
  if (a.created_at_ms != b.created_at_ms) {
    return a.created_at_ms > b.created_at_ms;
  }
  return a.id > b.id;
}

std::string put_line(const MemoryRecord& record) {
  ordered_json line;
  line["op"] = "put";
  line["id"] = record.id;
  line["text"] = record.text;
  line["embedding"] = record.embedding;
  line["source"] = record.source_module;
  line["ts"] = record.created_at_ms;
  line["tags"] = record.tags;
  return line.dump();
}

std::string del_line(const MemoryRecord& record, std::int64_t ts_ms) {
  ordered_json line;
  line["op"] = "del";
  line["id"] = record.id;
  line["text"] = record.text;
  line["source"] = record.source_module;
  line["ts"] = ts_ms;
  line["tags"] = record.tags;
  return line.dump();
}

}  // namespace

MemoryStore::MemoryStore(std::shared_ptr<Embedder> embedder, Options options)
    : embedder_(std::move(embedder)), options_(std::move(options)) {
  if (!options_.persist_path.empty()) {
    reload();
  }
}

MemoryStore::~MemoryStore() {
  std::lock_guard<std::mutex> lock(mutex_);
  if (out_.is_open()) out_.close();
}

std::int64_t MemoryStore::now_ms() const {
  if (options_.clock != nullptr) return options_.clock->now_ms();
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string MemoryStore::format_id(std::uint64_t value) const {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%010llu",
                static_cast<unsigned long long>(value));
  return std::string(buf);
}

std::vector<double> MemoryStore::embed(const std::string& text) {
  return embedder_->embed(text);
}

std::string MemoryStore::store(const std::string& text,
                               const std::string& source_module,
                               const std::set<std::string>& tags) {
  std::vector<double> embedding = embedder_->embed(text);
  std::lock_guard<std::mutex> lock(mutex_);
  if (live_.size() >= options_.capacity) {
    throw StorageFullError(options_.capacity);
  }
  MemoryRecord record;
  record.id = format_id(next_id_++);
  record.text = text;
  record.embedding = std::move(embedding);
  record.source_module = source_module;
  record.created_at_ms = now_ms();
  record.tags = tags;
  append_line(put_line(record));  // Durable before the id escapes.
  std::string id = record.id;
  live_.emplace(id, std::move(record));
  return id;
}

std::vector<QueryHit> MemoryStore::query(const std::string& text,
                                         std::size_t k) {
  std::vector<double> needle = embedder_->embed(text);
  std::vector<QueryHit> hits;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    hits.reserve(live_.size());
    for (const auto& [id, record] : live_) {
      bool zero = std::all_of(record.embedding.begin(), record.embedding.end(),
                              [](double v) { return v == 0.0; });
      if (zero) continue;  // Zero-vector records carry no direction.
      hits.push_back(QueryHit{record, cosine(needle, record.embedding)});
    }
  }
  std::sort(hits.begin(), hits.end(), [](const QueryHit& a, const QueryHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return newer(a.record, b.record);
  });
  if (hits.size() > k) hits.resize(k);
  return hits;
}

std::vector<MemoryRecord> MemoryStore::recent(std::size_t n) {
  std::vector<MemoryRecord> records;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    records.reserve(live_.size());
    for (const auto& [id, record] : live_) records.push_back(record);
  }
  std::sort(records.begin(), records.end(), newer);
  if (records.size() > n) records.resize(n);
  return records;
}

std::size_t MemoryStore::remove(const std::vector<std::string>& ids) {
  std::lock_guard<std::mutex> lock(mutex_);
  std::size_t removed = 0;
  std::int64_t ts = now_ms();
  for (const std::string& id : ids) {
    auto it = live_.find(id);
    if (it == live_.end()) continue;  // Unknown ids are ignored.
    append_line(del_line(it->second, ts));
    live_.erase(it);
    ++removed;
  }
  return removed;
}

std::size_t MemoryStore::count() {
  std::lock_guard<std::mutex> lock(mutex_);
  return live_.size();
}

std::optional<MemoryRecord> MemoryStore::latest_from(
    const std::string& source_module) {
  std::lock_guard<std::mutex> lock(mutex_);
  const MemoryRecord* best = nullptr;
  for (const auto& [id, record] : live_) {
    if (record.source_module != source_module) continue;
    if (best == nullptr || newer(record, *best)) best = &record;
  }
  if (best == nullptr) return std::nullopt;
  return *best;
}

std::optional<MemoryRecord> MemoryStore::latest_tagged(const std::string& tag) {
  std::lock_guard<std::mutex> lock(mutex_);
  const MemoryRecord* best = nullptr;
  for (const auto& [id, record] : live_) {
    if (record.tags.count(tag) == 0) continue;
    if (best == nullptr || newer(record, *best)) best = &record;
  }
  if (best == nullptr) return std::nullopt;
  return *best;
}

std::size_t MemoryStore::snapshot_and_compact() {
  std::lock_guard<std::mutex> lock(mutex_);
  if (options_.persist_path.empty()) return live_.size();
  namespace fs = std::filesystem;
  const std::string tmp_path = options_.persist_path + ".compact";
  {
    std::ofstream tmp(tmp_path, std::ios::binary | std::ios::trunc);
    if (!tmp.is_open()) {
      throw Error("cannot open compaction file: " + tmp_path);
    }
    for (const auto& [id, record] : live_) {
      tmp << put_line(record) << '\n';
    }
    tmp.flush();
    if (!tmp.good()) {
      throw Error("failed writing compaction file: " + tmp_path);
    }
  }
  if (out_.is_open()) out_.close();
  fs::rename(tmp_path, options_.persist_path);
  out_.open(options_.persist_path, std::ios::binary | std::ios::app);
  if (!out_.is_open()) {
    throw Error("cannot reopen persistence log: " + options_.persist_path);
  }
  return live_.size();
}

void MemoryStore::append_line(const std::string& line) {
  if (options_.persist_path.empty()) return;
  out_ << line << '\n';
  out_.flush();
  if (!out_.good()) {
    throw Error("failed writing persistence log: " + options_.persist_path);
  }
}

void MemoryStore::reload() {
  namespace fs = std::filesystem;
  const std::string& path = options_.persist_path;
  std::string content;
  if (fs::exists(path)) {
    std::ifstream in(path, std::ios::binary);
    if (!in.is_open()) {
      throw Error("cannot open persistence log: " + path);
    }
    content.assign(std::istreambuf_iterator<char>(in),
                   std::istreambuf_iterator<char>());
  }

  std::size_t pos = 0;
  std::size_t good_end = 0;  // Byte offset just past the last applied line.
  std::size_t line_no = 0;
  bool torn = false;
  while (pos < content.size()) {
    ++line_no;
    std::size_t nl = content.find('\n', pos);
    bool terminated = nl != std::string::npos;
    std::size_t end = terminated ? nl : content.size();
    std::string_view segment(content.data() + pos, end - pos);

    nlohmann::json line = nlohmann::json::parse(segment, nullptr, false);
    if (line.is_discarded() || !line.is_object()) {
      // Unparseable JSON can only arise from an interrupted write (every
      // complete line is a full object): treat as the truncation point.
      if (options_.strict_reload) {
        throw LogCorruptError("unparseable log line", line_no);
      }
      torn = true;
      break;
    }

    // A parseable but schema-invalid line is real corruption, not a torn
    // write; never silently drop it.
    if (!line.contains("op") || !line["op"].is_string() ||
        !line.contains("id") || !line["id"].is_string()) {
      throw LogCorruptError("missing op/id fields", line_no);
    }
    const std::string op = line["op"].get<std::string>();
    const std::string id = line["id"].get<std::string>();
    if (op == "put") {
      if (!line.contains("text") || !line["text"].is_string() ||
          !line.contains("embedding") || !line["embedding"].is_array() ||
          !line.contains("source") || !line["source"].is_string() ||
          !line.contains("ts") || !line["ts"].is_number_integer() ||
          !line.contains("tags") || !line["tags"].is_array()) {
        throw LogCorruptError("put line missing required fields", line_no);
      }
      MemoryRecord record;
      record.id = id;
      record.text = line["text"].get<std::string>();
      record.embedding = line["embedding"].get<std::vector<double>>();
      if (record.embedding.size() != embedder_->dimension()) {
        throw LogCorruptError("embedding dimension mismatch", line_no);
      }
      record.source_module = line["source"].get<std::string>();
      record.created_at_ms = line["ts"].get<std::int64_t>();
      for (const auto& tag : line["tags"]) {
        if (!tag.is_string()) throw LogCorruptError("non-string tag", line_no);
        record.tags.insert(tag.get<std::string>());
      }
      live_[id] = std::move(record);
    } else if (op == "del") {
      live_.erase(id);
    } else {
      throw LogCorruptError("unknown op: " + op, line_no);
    }
    std::uint64_t numeric = std::strtoull(id.c_str(), nullptr, 10);
    if (numeric >= next_id_) next_id_ = numeric + 1;

    if (!terminated) {
      // Valid op whose newline was lost: applied, but the tail must be
      // newline-terminated before further appends.
      good_end = end;
      pos = end;
      std::ofstream fix(path, std::ios::binary | std::ios::app);
      fix << '\n';
      good_end += 1;
      break;
    }
    good_end = end + 1;
    pos = nl + 1;
  }

  if (torn && good_end < content.size()) {
    fs::resize_file(path, good_end);  // Drop the interrupted tail.
  }
  out_.open(path, std::ios::binary | std::ios::app);
  if (!out_.is_open()) {
    throw Error("cannot open persistence log: " + path);
  }
}

}  // namespace cma::memory
