#include <gtest/gtest.h>

#include "jarvis/memory_store.hpp"
#include "support.hpp"

using namespace jarvis;
using testing_support::TempDir;

namespace {

// Manually advanced clock for deterministic timestamps.
struct FakeClock {
  std::shared_ptr<std::int64_t> now = std::make_shared<std::int64_t>(1000);
  Clock fn() const {
    auto p = now;
    return [p] { return *p; };
  }
};

PersonalRecord rec(std::string coll, std::string id, Json fields) {
  return PersonalRecord{std::move(coll), std::move(id), std::move(fields), 0};
}

}  // namespace

TEST(MemoryStoreRecords, UpsertGetReplace) {
  FakeClock clock;
  MemoryStore s(std::nullopt, clock.fn());
  s.upsert_record(rec("profile", "u1", {{"address", "123 Main Street"}}));
  auto got = s.get_record("profile", "u1");
  ASSERT_TRUE(got);
  EXPECT_EQ(got->fields["address"], "123 Main Street");
  const auto first_ts = got->updated_at;

  EXPECT_FALSE(s.get_record("profile", "nobody"));

  s.upsert_record(rec("profile", "u1", {{"address", "9 Elm Road"}}));
  got = s.get_record("profile", "u1");
  EXPECT_EQ(got->fields["address"], "9 Elm Road");
  EXPECT_FALSE(got->fields.contains("name"));
  EXPECT_GT(got->updated_at, first_ts);  // strictly increasing even with a frozen clock
  EXPECT_EQ(s.records("profile").size(), 1u);
}

TEST(MemoryStoreRecords, Validation) {
  MemoryStore s;
  EXPECT_THROW(s.upsert_record(rec("gossip", "x", Json::object())), StoreError);
  EXPECT_THROW(s.upsert_record(rec("profile", "", Json::object())), StoreError);
  EXPECT_THROW(s.upsert_record(rec("profile", "x", Json::array())), StoreError);
}

TEST(MemoryStoreQuery, PersonaFixture) {
  MemoryStore s;
  s.load(testing_support::data_path("persona"));
  EXPECT_EQ(s.records("contacts").size(), 3u);
  auto alice = s.query_records("contacts", "name", "Alice");
  ASSERT_EQ(alice.size(), 1u);
  EXPECT_EQ(alice[0].id, "c1");
  EXPECT_TRUE(s.query_records("contacts", "nickname", "Al").empty());
  auto event = s.query_records("schedule", "date", "2024-08-12");
  ASSERT_EQ(event.size(), 1u);
  EXPECT_EQ(event[0].fields["title"], "Dentist appointment");
}

TEST(MemoryStoreQuery, DottedPathsAndTypes) {
  MemoryStore s;
  s.upsert_record(rec("documents", "a", {{"meta", {{"kind", "pdf"}, {"pages", 3}}}}));
  s.upsert_record(rec("documents", "b", {{"meta", {{"kind", "txt"}, {"pages", "3"}}}}));
  EXPECT_EQ(s.query_records("documents", "meta.kind", "pdf").size(), 1u);
  EXPECT_EQ(s.query_records("documents", "meta.pages", 3)[0].id, "a");
  EXPECT_EQ(s.query_records("documents", "meta.pages", "3")[0].id, "b");
  EXPECT_TRUE(s.query_records("documents", "meta.kind.deeper", "pdf").empty());
}

TEST(MemoryStoreTurns, OrderingAndGaplessNumbers) {
  MemoryStore s;
  s.append_turn("s", Role::User, "one");
  s.append_turn("s", Role::Assistant, "two");
  s.append_turn("s", Role::User, "three");
  auto last = s.recent_turns("s", 2);
  ASSERT_EQ(last.size(), 2u);
  EXPECT_EQ(last[0].content, "two");
  EXPECT_EQ(last[1].content, "three");
  EXPECT_TRUE(s.recent_turns("fresh", 5).empty());

  MemoryStore t;
  for (int i = 0; i < 100; ++i) t.append_turn("x", i % 2 ? Role::Assistant : Role::User, std::to_string(i));
  auto all = t.recent_turns("x", 100);
  ASSERT_EQ(all.size(), 100u);
  for (std::int64_t i = 0; i < 100; ++i) EXPECT_EQ(all[static_cast<std::size_t>(i)].turn_no, i);
}

TEST(MemoryStoreContext, Examples) {
  MemoryStore s;
  s.load(testing_support::data_path("persona"));
  const auto ctx = s.build_personal_context("where do I live", 1024);
  EXPECT_NE(ctx.find("123 Main Street"), std::string::npos);
  EXPECT_EQ(ctx.rfind("[profile]", 0), 0u);

  MemoryStore empty;
  EXPECT_EQ(empty.build_personal_context("anything at all", 1024), MemoryStore::kEmptyProfileBanner);
  EXPECT_LE(estimate_tokens(s.build_personal_context("where do I live", 1)), 1u);
  EXPECT_THROW(s.build_personal_context("q", 0), std::invalid_argument);
}

TEST(MemoryStoreContext, RelatedRecordsAndHistory) {
  MemoryStore s;
  s.load(testing_support::data_path("persona"));
  const auto ctx = s.build_personal_context("What does my sister Alice do?", 2048);
  EXPECT_NE(ctx.find("[related records]"), std::string::npos);
  EXPECT_NE(ctx.find("Alice"), std::string::npos);
  EXPECT_EQ(ctx.find("Carol"), std::string::npos);

  for (int i = 0; i < 8; ++i) s.append_turn("sess", Role::User, "message " + std::to_string(i));
  const auto with_history = s.build_personal_context("hello", 2048, "sess");
  EXPECT_NE(with_history.find("[recent conversation]"), std::string::npos);
  EXPECT_EQ(with_history.find("message 1\n"), std::string::npos);
  EXPECT_NE(with_history.find("message 7"), std::string::npos);
  EXPECT_NE(with_history.find("message 2"), std::string::npos);
  // Same state and inputs give the same context.
  EXPECT_EQ(with_history, s.build_personal_context("hello", 2048, "sess"));
}

TEST(MemoryStoreArchive, MovesOldTurnsIntoIndex) {
  FakeClock clock;
  MemoryStore s(std::nullopt, clock.fn());
  VectorIndex idx;
  HashEmbedder e;
  EXPECT_EQ(s.archive_old_turns("s", 5000, e, idx), 0u);

  for (int i = 0; i < 3; ++i) s.append_turn("s", Role::User, "old " + std::to_string(i));
  *clock.now = 9000;
  s.append_turn("s", Role::Assistant, "new");
  const auto before = s.total_turns("s");

  EXPECT_EQ(s.archive_old_turns("s", 5000, e, idx), 3u);
  EXPECT_EQ(idx.size("personal"), 3u);
  auto hot = s.recent_turns("s", 10);
  ASSERT_EQ(hot.size(), 1u);
  EXPECT_EQ(hot[0].content, "new");
  EXPECT_EQ(static_cast<std::int64_t>(s.hot_turn_count("s") + idx.count_doc("personal", "s")), before);
  EXPECT_EQ(s.archive_old_turns("s", 5000, e, idx), 0u);
  EXPECT_EQ(idx.size("personal"), 3u);

  const auto hits = idx.search("personal", e.embed("user: old 1"), 1);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].payload.text, "user: old 1");
  EXPECT_EQ(hits[0].payload.page_no, 1);

  // Numbering continues after archival.
  EXPECT_EQ(s.append_turn("s", Role::User, "later").turn_no, 4);
}

TEST(MemoryStoreArchive, ConservesTurnCountProperty) {
  testing_support::Gen g(31);
  for (int round = 0; round < 50; ++round) {
    FakeClock clock;
    MemoryStore s(std::nullopt, clock.fn());
    VectorIndex idx;
    HashEmbedder e(32);
    for (std::size_t i = 0, n = g.size(0, 40); i < n; ++i) {
      *clock.now += static_cast<std::int64_t>(g.size(0, 100));
      s.append_turn("s", g.coin() ? Role::User : Role::Assistant, g.word());
      if (g.coin(0.2)) s.archive_old_turns("s", *clock.now - static_cast<std::int64_t>(g.size(0, 300)), e, idx);
    }
    ASSERT_EQ(static_cast<std::int64_t>(s.hot_turn_count("s") + idx.count_doc("personal", "s")), s.total_turns("s"));
  }
}

TEST(MemoryStoreArchive, EmbedFailureLeavesStoresUntouched) {
  struct Broken : Embedder {
    EmbeddingVector embed(std::string_view) const override { throw EmbedError("down", true, 503); }
    std::size_t dim() const override { return 4; }
  } broken;
  FakeClock clock;
  MemoryStore s(std::nullopt, clock.fn());
  VectorIndex idx;
  s.append_turn("s", Role::User, "a");
  EXPECT_THROW(s.archive_old_turns("s", 99999, broken, idx), EmbedError);
  EXPECT_EQ(s.hot_turn_count("s"), 1u);
  EXPECT_EQ(idx.size("personal"), 0u);
}

TEST(MemoryStorePersistence, BitExactRoundTrip) {
  TempDir dir;
  FakeClock clock;
  {
    MemoryStore s(dir / "store", clock.fn());
    s.load(testing_support::data_path("persona"));
    s.save(dir / "store");
    s.upsert_record(rec("preferences", "p9", {{"unicode", "caf\xC3\xA9 \xE2\x80\x93 ok"}, {"n", 1.5}, {"nested", {{"a", {1, 2}}}}}));
    for (int i = 0; i < 5; ++i) s.append_turn(i % 2 ? "b" : "a", Role::User, "turn " + std::to_string(i));
  }
  MemoryStore reloaded(dir / "store", clock.fn());
  EXPECT_EQ(reloaded.records("contacts").size(), 3u);
  EXPECT_EQ(reloaded.get_record("preferences", "p9")->fields["unicode"], "caf\xC3\xA9 \xE2\x80\x93 ok");
  EXPECT_EQ(reloaded.recent_turns("a", 10).size(), 3u);
  EXPECT_EQ(reloaded.total_turns("b"), 2);

  reloaded.save(dir / "copy");
  for (const char* f : {"profile.jsonl", "schedule.jsonl", "contacts.jsonl", "documents.jsonl", "preferences.jsonl",
                        "turns.jsonl", "sessions.jsonl"}) {
    EXPECT_EQ(testing_support::read_file(dir / "store" / f), testing_support::read_file(dir / "copy" / f)) << f;
  }
  MemoryStore again(dir / "copy", clock.fn());
  for (auto coll : kRecordCollections) EXPECT_EQ(again.records(coll), reloaded.records(coll));
  EXPECT_EQ(again.recent_turns("a", 10), reloaded.recent_turns("a", 10));
}

TEST(MemoryStorePersistence, TurnCounterSurvivesArchiveAndRestart) {
  TempDir dir;
  FakeClock clock;
  VectorIndex idx;
  HashEmbedder e;
  {
    MemoryStore s(dir.path(), clock.fn());
    for (int i = 0; i < 4; ++i) s.append_turn("s", Role::User, "x");
    *clock.now += 10;
    s.archive_old_turns("s", *clock.now, e, idx);
    EXPECT_EQ(s.hot_turn_count("s"), 0u);
  }
  MemoryStore s(dir.path(), clock.fn());
  EXPECT_EQ(s.total_turns("s"), 4);
  EXPECT_EQ(s.append_turn("s", Role::User, "y").turn_no, 4);
}
