// Embedder, cosine retrieval, shared memory store, and persistence tests.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "cma/common/clock.hpp"
#include "cma/common/errors.hpp"
#include "cma/memory/embedder.hpp"
#include "cma/memory/record.hpp"
#include "cma/memory/store.hpp"

using cma::VirtualClock;
using cma::memory::HashedBagEmbedder;
using cma::memory::MemoryRecord;
using cma::memory::MemoryStore;
using cma::memory::QueryHit;
using cma::memory::cosine;

namespace fs = std::filesystem;

namespace {

double l2_norm(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

fs::path temp_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() /
                 ("cma_memory_test_" + tag + "_" +
                  std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::shared_ptr<HashedBagEmbedder> small_embedder() {
  return std::make_shared<HashedBagEmbedder>(32);
}

}  // namespace

TEST_CASE("embedder is deterministic and L2-normalized") {
  HashedBagEmbedder embedder(64);
  auto a = embedder.embed("the plant needs water today");
  auto b = embedder.embed("the plant needs water today");
  CHECK(a == b);
  CHECK(a.size() == 64);
  CHECK(l2_norm(a) == doctest::Approx(1.0).epsilon(1e-9));

  HashedBagEmbedder twin(64);
  CHECK(twin.embed("the plant needs water today") == a);
}

TEST_CASE("embedder tokenization") {
  HashedBagEmbedder embedder(32);
  // No alphanumeric or high bytes at all: the zero vector.
  auto zero = embedder.embed("  ...  !!! \t\n");
  CHECK(l2_norm(zero) == doctest::Approx(0.0));
  CHECK(embedder.embed("").size() == 32);
  CHECK(l2_norm(embedder.embed("")) == doctest::Approx(0.0));

  // Case-insensitive over ASCII letters.
  CHECK(embedder.embed("Hello World") == embedder.embed("hello world"));

  // UTF-8 words survive as tokens; different words disagree.
  auto jp = embedder.embed("こんにちは");
  CHECK(l2_norm(jp) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(jp != embedder.embed("さようなら"));

  // Punctuation only separates; it never contributes mass.
  CHECK(embedder.embed("soil, dry") == embedder.embed("soil dry"));
}

TEST_CASE("cosine properties") {
  HashedBagEmbedder embedder(64);
  auto v = embedder.embed("bright light near the window");
  CHECK(cosine(v, v) == doctest::Approx(1.0).epsilon(1e-9));

  std::vector<double> zero(64, 0.0);
  CHECK(cosine(v, zero) == doctest::Approx(0.0));
  CHECK(cosine(zero, zero) == doctest::Approx(0.0));

  // Clamped even when rounding pushes the raw dot product past 1.
  std::vector<double> e1(4, 0.0), e2(4, 0.0);
  e1[0] = 1.0 + 1e-12;
  e2[0] = 1.0;
  double c = cosine(e1, e2);
  CHECK(c <= 1.0);
  CHECK(c >= -1.0);
}

TEST_CASE("query matches a brute-force oracle") {
  VirtualClock clock;
  auto embedder = small_embedder();
  MemoryStore store(embedder, {.capacity = 1000, .clock = &clock});

  std::mt19937 rng(1234);
  const std::vector<std::string> vocab = {
      "water", "light", "soil",  "dry",   "wet",    "leaf",
      "root",  "grow",  "sense", "move",  "speak",  "listen"};
  std::vector<MemoryRecord> mirror;
  for (int i = 0; i < 80; ++i) {
    std::string text;
    int words = 1 + static_cast<int>(rng() % 5);
    for (int w = 0; w < words; ++w) {
      if (w) text += ' ';
      text += vocab[rng() % vocab.size()];
    }
    std::string id = store.store(text, "writer");
    mirror.push_back({id, text, embedder->embed(text), "writer",
                      clock.now_ms(), {}});
  }

  for (int q = 0; q < 20; ++q) {
    std::string needle = vocab[rng() % vocab.size()];
    needle += ' ';
    needle += vocab[rng() % vocab.size()];
    auto query_vec = embedder->embed(needle);

    // The oracle: score every non-zero record, sort by score desc, then
    // created_at desc, then id desc, take k.
    std::vector<std::pair<double, const MemoryRecord*>> scored;
    for (const auto& record : mirror) {
      if (l2_norm(record.embedding) == 0.0) continue;
      scored.emplace_back(cosine(query_vec, record.embedding), &record);
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) {
                       if (a.first != b.first) return a.first > b.first;
                       if (a.second->created_at_ms != b.second->created_at_ms)
                         return a.second->created_at_ms > b.second->created_at_ms;
                       return a.second->id > b.second->id;
                     });

    for (std::size_t k : {std::size_t{1}, std::size_t{7}, std::size_t{100}}) {
      auto hits = store.query(needle, k);
      std::size_t expect = std::min(k, scored.size());
      REQUIRE(hits.size() == expect);
      for (std::size_t i = 0; i < expect; ++i) {
        CHECK(hits[i].record.id == scored[i].second->id);
        CHECK(hits[i].score == doctest::Approx(scored[i].first).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("zero-vector records never appear in query results") {
  VirtualClock clock;
  MemoryStore store(small_embedder(), {.clock = &clock});
  std::string blank_id = store.store("!!!", "writer");  // No tokens.
  std::string real_id = store.store("water the plant", "writer");
  auto hits = store.query("water", 10);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].record.id == real_id);
  // The record still exists and shows up in recency listings.
  CHECK(store.count() == 2);
  CHECK(store.recent(10).size() == 2);
  CHECK(blank_id != real_id);
}

TEST_CASE("recent orders by created_at desc then id desc") {
  VirtualClock clock;
  MemoryStore store(small_embedder(), {.clock = &clock});

  // Same virtual instant: ties broken by id descending.
  std::string a = store.store("first", "w");
  std::string b = store.store("second", "w");
  clock.sleep_until(clock.now_ms() + 10);
  std::string c = store.store("third", "w");

  auto recent = store.recent(10);
  REQUIRE(recent.size() == 3);
  CHECK(recent[0].id == c);
  CHECK(recent[1].id == b);
  CHECK(recent[2].id == a);

  auto top2 = store.recent(2);
  REQUIRE(top2.size() == 2);
  CHECK(top2[0].id == c);
  CHECK(top2[1].id == b);
}

TEST_CASE("remove, latest_from, latest_tagged") {
  VirtualClock clock;
  MemoryStore store(small_embedder(), {.clock = &clock});
  std::string a = store.store("alpha", "mod_a");
  std::string b = store.store("beta", "mod_b", {"keep", "note"});
  clock.sleep_until(clock.now_ms() + 5);
  std::string c = store.store("gamma", "mod_a", {"note"});

  auto from_a = store.latest_from("mod_a");
  REQUIRE(from_a.has_value());
  CHECK(from_a->id == c);
  CHECK(from_a->text == "gamma");
  CHECK_FALSE(store.latest_from("nobody").has_value());

  auto tagged = store.latest_tagged("note");
  REQUIRE(tagged.has_value());
  CHECK(tagged->id == c);
  auto keep = store.latest_tagged("keep");
  REQUIRE(keep.has_value());
  CHECK(keep->id == b);
  CHECK_FALSE(store.latest_tagged("missing").has_value());

  // Unknown ids are ignored; the count reflects only real removals.
  CHECK(store.remove({c, "999999", c}) == 1);
  CHECK(store.count() == 2);
  auto after = store.latest_from("mod_a");
  REQUIRE(after.has_value());
  CHECK(after->id == a);
}

TEST_CASE("store refuses past the hard cap") {
  VirtualClock clock;
  MemoryStore store(small_embedder(), {.capacity = 3, .clock = &clock});
  store.store("one", "w");
  store.store("two", "w");
  store.store("three", "w");
  CHECK_THROWS_AS(store.store("four", "w"), cma::StorageFullError);
  CHECK(store.count() == 3);
  // Removing frees room again.
  auto recent = store.recent(1);
  REQUIRE(recent.size() == 1);
  store.remove({recent[0].id});
  CHECK_NOTHROW(store.store("four", "w"));
}

TEST_CASE("a reloaded store equals the original") {
  auto dir = temp_dir("reload");
  const std::string path = (dir / "mem.jsonl").string();
  VirtualClock clock;
  auto embedder = small_embedder();

  std::vector<MemoryRecord> expected;
  {
    MemoryStore store(embedder, {.persist_path = path, .clock = &clock});
    store.store("to be deleted", "w");
    store.store("kept one", "w", {"tag1"});
    clock.sleep_until(clock.now_ms() + 3);
    store.store("kept two", "other", {"tag1", "tag2"});
    auto all = store.recent(10);
    store.remove({all.back().id});  // Drop the oldest.
    expected = store.recent(10);
    REQUIRE(expected.size() == 2);
  }

  MemoryStore reloaded(embedder, {.persist_path = path, .clock = &clock});
  CHECK(reloaded.count() == 2);
  CHECK(reloaded.recent(10) == expected);

  // Ids continue past the highest ever allocated, deleted ones included.
  std::string next = reloaded.store("new", "w");
  for (const auto& record : expected) CHECK(next > record.id);

  fs::remove_all(dir);
}

TEST_CASE("snapshot_and_compact shrinks the log and preserves state") {
  auto dir = temp_dir("compact");
  const std::string path = (dir / "mem.jsonl").string();
  VirtualClock clock;
  auto embedder = small_embedder();

  std::vector<MemoryRecord> expected;
  {
    MemoryStore store(embedder, {.persist_path = path, .clock = &clock});
    std::vector<std::string> ids;
    for (int i = 0; i < 20; ++i) {
      ids.push_back(store.store("record " + std::to_string(i), "w"));
    }
    store.remove(std::vector<std::string>(ids.begin(), ids.begin() + 15));
    CHECK(store.snapshot_and_compact() == 5);
    expected = store.recent(100);
  }

  // The compacted log holds exactly the live records, one line each.
  std::ifstream in(path);
  std::size_t lines = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) ++lines;
  }
  CHECK(lines == 5);

  MemoryStore reloaded(embedder, {.persist_path = path, .clock = &clock});
  CHECK(reloaded.recent(100) == expected);
  fs::remove_all(dir);
}

TEST_CASE("torn trailing line is a silent truncation point by default") {
  auto dir = temp_dir("torn");
  const std::string path = (dir / "mem.jsonl").string();
  VirtualClock clock;
  auto embedder = small_embedder();

  std::vector<MemoryRecord> expected;
  {
    MemoryStore store(embedder, {.persist_path = path, .clock = &clock});
    store.store("alpha", "w");
    store.store("beta", "w");
    expected = store.recent(10);
  }
  const auto clean_size = fs::file_size(path);
  {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out << "{\"op\":\"put\",\"id\":\"0000";  // Interrupted mid-write.
  }

  {
    MemoryStore store(embedder, {.persist_path = path, .clock = &clock});
    CHECK(store.count() == 2);
    CHECK(store.recent(10) == expected);
  }
  // The torn tail was physically dropped.
  CHECK(fs::file_size(path) == clean_size);

  // Strict mode treats the same tail as corruption.
  {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out << "{\"op\":\"put\",\"id\":\"0000";
  }
  auto make_strict = [&] {
    MemoryStore strict(embedder, {.persist_path = path, .clock = &clock,
                                  .strict_reload = true});
  };
  CHECK_THROWS_AS(make_strict(), cma::LogCorruptError);
  fs::remove_all(dir);
}

TEST_CASE("a complete but schema-invalid line is corruption in every mode") {
  auto dir = temp_dir("schema");
  const std::string path = (dir / "mem.jsonl").string();
  VirtualClock clock;
  auto embedder = small_embedder();
  {
    MemoryStore store(embedder, {.persist_path = path, .clock = &clock});
    store.store("alpha", "w");
  }
  {
    // Parseable JSON object, newline-terminated, but missing "id".
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out << "{\"op\":\"put\"}\n";
  }
  auto reopen = [&] {
    MemoryStore store(embedder, {.persist_path = path, .clock = &clock});
  };
  CHECK_THROWS_AS(reopen(), cma::LogCorruptError);
  try {
    reopen();
  } catch (const cma::LogCorruptError& e) {
    CHECK(e.line() == 2);
  }
  fs::remove_all(dir);
}

TEST_CASE("a valid unterminated final line is applied") {
  auto dir = temp_dir("unterminated");
  const std::string path = (dir / "mem.jsonl").string();
  VirtualClock clock;
  auto embedder = small_embedder();

  std::string keep_line;
  {
    MemoryStore store(embedder, {.persist_path = path, .clock = &clock});
    store.store("alpha", "w");
    store.store("beta", "w");
  }
  // Chop the trailing newline off the (valid) final line.
  {
    std::ifstream in(path, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
    REQUIRE(!content.empty());
    REQUIRE(content.back() == '\n');
    content.pop_back();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
  }
  {
    MemoryStore store(embedder, {.persist_path = path, .clock = &clock});
    CHECK(store.count() == 2);
    auto recent = store.recent(10);
    REQUIRE(recent.size() == 2);
    CHECK(recent[0].text == "beta");
    // Further appends still land on their own lines.
    store.store("gamma", "w");
  }
  {
    MemoryStore store(embedder, {.persist_path = path, .clock = &clock});
    CHECK(store.count() == 3);
  }
  fs::remove_all(dir);
}

TEST_CASE("del lines survive reload even for ids stored in prior sessions") {
  auto dir = temp_dir("delreplay");
  const std::string path = (dir / "mem.jsonl").string();
  VirtualClock clock;
  auto embedder = small_embedder();

  std::string victim;
  {
    MemoryStore store(embedder, {.persist_path = path, .clock = &clock});
    victim = store.store("short lived", "w");
    store.store("survivor", "w");
  }
  {
    MemoryStore store(embedder, {.persist_path = path, .clock = &clock});
    CHECK(store.remove({victim}) == 1);
  }
  {
    MemoryStore store(embedder, {.persist_path = path, .clock = &clock});
    CHECK(store.count() == 1);
    CHECK(store.recent(10)[0].text == "survivor");
  }
  fs::remove_all(dir);
}
