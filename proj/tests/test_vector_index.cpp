#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <thread>

#include "jarvis/vector_index.hpp"
#include "support.hpp"

using namespace jarvis;
using testing_support::Gen;
using testing_support::TempDir;

namespace {

EmbeddingVector basis(std::size_t dim, std::size_t i) {
  EmbeddingVector v;
  v.values.assign(dim, 0.0);
  v.values[i] = 1.0;
  return v;
}

IndexEntry entry(std::uint64_t id, EmbeddingVector v, std::string doc = "d", std::int64_t page = 0) {
  return IndexEntry{id, std::move(v), ChunkPayload{std::move(doc), page, static_cast<std::int64_t>(id), "t" + std::to_string(id)}};
}

// Brute-force oracle: normalize both sides, score every entry, stable sort.
std::vector<std::pair<std::uint64_t, double>> linear_scan(const std::vector<IndexEntry>& entries,
                                                          const std::vector<double>& q, std::size_t k) {
  auto unit = [](std::vector<double> v) {
    double n = 0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    for (double& x : v) x /= n;
    return v;
  };
  const auto qu = unit(q);
  std::vector<std::pair<std::uint64_t, double>> all;
  for (const auto& e : entries) {
    const auto eu = unit(e.vector.values);
    double s = 0;
    for (std::size_t i = 0; i < qu.size(); ++i) s += qu[i] * eu[i];
    all.emplace_back(e.chunk_id, s);
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  all.resize(std::min(k, all.size()));
  return all;
}

}  // namespace

TEST(Cosine, Examples) {
  EXPECT_DOUBLE_EQ(cosine(basis(2, 0), basis(2, 0)), 1.0);
  EXPECT_DOUBLE_EQ(cosine(basis(3, 0), basis(3, 2)), 0.0);
  EXPECT_NEAR(cosine(EmbeddingVector{{1, 0}}, EmbeddingVector{{1 / std::sqrt(2.0), 1 / std::sqrt(2.0)}}), 0.7071, 1e-4);
  EXPECT_THROW(cosine(basis(2, 0), basis(3, 0)), DimensionMismatch);
}

TEST(VectorIndex, DefaultCollections) {
  VectorIndex idx;
  EXPECT_TRUE(idx.has_collection("physics"));
  EXPECT_TRUE(idx.has_collection("personal"));
  EXPECT_FALSE(idx.has_collection("other"));
  EXPECT_THROW(idx.size("other"), UnknownCollection);
}

TEST(VectorIndex, SelfSimilarityAndReplace) {
  VectorIndex idx;
  Gen g(1);
  EmbeddingVector v{g.gaussian_vector(384)};
  idx.upsert("physics", entry(1, v));
  auto hits = idx.search("physics", v, 5);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].chunk_id, 1u);
  EXPECT_NEAR(hits[0].score, 1.0, 1e-6);

  idx.upsert("physics", entry(1, EmbeddingVector{g.gaussian_vector(384)}));
  EXPECT_EQ(idx.size("physics"), 1u);
  EXPECT_NEAR(l2_norm(idx.get_entry("physics", 1)->vector), 1.0, 1e-12);
}

TEST(VectorIndex, DimensionContract) {
  VectorIndex idx;
  idx.upsert("physics", entry(1, basis(384, 0)));
  EXPECT_THROW(idx.upsert("physics", entry(2, basis(383, 0))), DimensionMismatch);
  EXPECT_THROW(idx.search("physics", basis(383, 0), 1), DimensionMismatch);
  EXPECT_THROW(idx.search("physics", basis(384, 0), 0), std::invalid_argument);
  EXPECT_EQ(idx.size("physics"), 1u);
}

TEST(VectorIndex, EmptyAndExhaustiveSearch) {
  VectorIndex idx;
  EXPECT_TRUE(idx.search("physics", basis(4, 0), 5).empty());
  for (std::uint64_t i = 1; i <= 4; ++i) idx.upsert("physics", entry(i, basis(4, i - 1)));
  auto hits = idx.search("physics", EmbeddingVector{{0.1, 0.4, 0.3, 0.2}}, 99);
  ASSERT_EQ(hits.size(), 4u);
  EXPECT_EQ(hits[0].chunk_id, 2u);
  EXPECT_EQ(hits[1].chunk_id, 3u);
  EXPECT_EQ(hits[2].chunk_id, 4u);
  EXPECT_EQ(hits[3].chunk_id, 1u);
}

TEST(VectorIndex, TiesBreakByChunkId) {
  VectorIndex idx;
  for (std::uint64_t id : {9u, 3u, 5u}) idx.upsert("physics", entry(id, basis(3, 0)));
  auto hits = idx.search("physics", basis(3, 0), 3);
  ASSERT_EQ(hits.size(), 3u);
  EXPECT_EQ(hits[0].chunk_id, 3u);
  EXPECT_EQ(hits[1].chunk_id, 5u);
  EXPECT_EQ(hits[2].chunk_id, 9u);
}

TEST(VectorIndex, PageKeySupersedesOldId) {
  VectorIndex idx;
  idx.upsert("physics", IndexEntry{1, basis(2, 0), {"doc", 1, 0, "a"}});
  idx.upsert("physics", IndexEntry{7, basis(2, 1), {"doc", 1, 0, "b"}});
  EXPECT_EQ(idx.size("physics"), 1u);
  EXPECT_FALSE(idx.get_entry("physics", 1).has_value());
  EXPECT_EQ(idx.get_entry("physics", 7)->payload.text, "b");
  EXPECT_EQ(idx.count_doc("physics", "doc"), 1u);
}

TEST(VectorIndexProperty, SearchMatchesLinearScan) {
  Gen g(42);
  for (int round = 0; round < 5; ++round) {
    VectorIndex idx;
    std::vector<IndexEntry> entries;
    const auto n = g.size(1, 400);
    const auto dim = g.size(2, 48);
    for (std::size_t i = 0; i < n; ++i) {
      entries.push_back(entry(i + 1, EmbeddingVector{g.gaussian_vector(dim)}, "d", static_cast<std::int64_t>(i)));
      idx.upsert("physics", entries.back());
    }
    for (int qi = 0; qi < 20; ++qi) {
      const auto q = g.gaussian_vector(dim);
      const auto k = g.size(1, n + 3);
      const auto hits = idx.search("physics", EmbeddingVector{q}, k);
      const auto expect = linear_scan(entries, q, k);
      ASSERT_EQ(hits.size(), expect.size());
      for (std::size_t i = 0; i < hits.size(); ++i) {
        ASSERT_EQ(hits[i].chunk_id, expect[i].first);
        ASSERT_NEAR(hits[i].score, expect[i].second, 1e-9);
        ASSERT_LE(hits[i].score, 1.0);
        ASSERT_GE(hits[i].score, -1.0);
        if (i > 0) {
          ASSERT_LE(hits[i].score, hits[i - 1].score);
        }
      }
    }
  }
}

TEST(VectorIndexPersistence, RoundTripIdenticalTopK) {
  TempDir dir;
  Gen g(8);
  VectorIndex a;
  for (std::uint64_t i = 1; i <= 100; ++i) {
    a.upsert("physics", IndexEntry{i, EmbeddingVector{g.gaussian_vector(384)},
                                   {"doc" + std::to_string(i % 7), static_cast<std::int64_t>(i), 0, "text \xC3\xA9 " + std::to_string(i)}});
  }
  a.upsert("personal", IndexEntry{5, EmbeddingVector{g.gaussian_vector(16)}, {"s", 0, 0, "user: hi"}});
  a.persist(dir / "index.bin");
  VectorIndex b;
  b.load(dir / "index.bin");
  EXPECT_EQ(b.size("physics"), 100u);
  EXPECT_EQ(b.dim("personal"), 16u);
  for (int qi = 0; qi < 50; ++qi) {
    const EmbeddingVector q{g.gaussian_vector(384)};
    EXPECT_EQ(a.search("physics", q, 10), b.search("physics", q, 10));
  }
  b.persist(dir / "again.bin");
  EXPECT_EQ(testing_support::read_file(dir / "index.bin"), testing_support::read_file(dir / "again.bin"));
}

TEST(VectorIndexPersistence, NextIdSurvivesReload) {
  TempDir dir;
  VectorIndex a;
  {
    auto w = a.writer();
    const auto id = w.chunk_id_for("physics", "d", 1, 0);
    w.upsert("physics", IndexEntry{id, basis(2, 0), {"d", 1, 0, "x"}});
    w.erase("physics", id);
  }
  a.persist(dir / "i.bin");
  VectorIndex b;
  b.load(dir / "i.bin");
  EXPECT_EQ(b.writer().chunk_id_for("physics", "d", 1, 0), 2u);
}

TEST(VectorIndexPersistence, EmptyFileAndCorruption) {
  TempDir dir;
  { std::ofstream(dir / "empty.bin"); }
  VectorIndex idx;
  idx.upsert("physics", entry(1, basis(2, 0)));
  idx.load(dir / "empty.bin");
  EXPECT_EQ(idx.size("physics"), 0u);
  EXPECT_TRUE(idx.has_collection("personal"));

  idx.upsert("physics", entry(1, basis(2, 0)));
  idx.persist(dir / "good.bin");
  auto bytes = testing_support::read_file(dir / "good.bin");
  bytes[0] = 'X';
  { std::ofstream(dir / "bad.bin", std::ios::binary) << bytes; }
  EXPECT_THROW(idx.load(dir / "bad.bin"), IndexFormatError);
  EXPECT_EQ(idx.size("physics"), 1u);

  auto truncated = testing_support::read_file(dir / "good.bin");
  truncated.resize(truncated.size() - 3);
  { std::ofstream(dir / "short.bin", std::ios::binary) << truncated; }
  EXPECT_THROW(idx.load(dir / "short.bin"), IndexFormatError);
  EXPECT_THROW(idx.load(dir / "missing.bin"), IndexIoError);
  EXPECT_EQ(idx.size("physics"), 1u);
}

TEST(VectorIndexConcurrency, ReadersSeeCompleteWrites) {
  VectorIndex idx;
  const std::size_t dim = 8;
  std::atomic<bool> done{false};
  std::atomic<std::size_t> bad{0};
  std::vector<std::thread> readers;
  for (int t = 0; t < 4; ++t) {
    readers.emplace_back([&] {
      while (!done) {
        auto hits = idx.search("physics", basis(dim, 0), 1000);
        for (std::size_t i = 1; i < hits.size(); ++i) {
          if (hits[i].score > hits[i - 1].score) ++bad;
        }
        for (const auto& h : hits) {
          if (h.payload.text != "t" + std::to_string(h.chunk_id)) ++bad;
        }
      }
    });
  }
  Gen g(5);
  for (std::uint64_t i = 1; i <= 2000; ++i) idx.upsert("physics", entry(i, EmbeddingVector{g.gaussian_vector(dim)}));
  done = true;
  for (auto& t : readers) t.join();
  EXPECT_EQ(bad.load(), 0u);
  EXPECT_EQ(idx.size("physics"), 2000u);
}
