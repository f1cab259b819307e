#pragma once

// Exact cosine top-k index over unit-normalized embeddings, grouped into
// named collections. Readers share a lock; writers are serialized through
// VectorIndex::Writer and each mutation is applied atomically with respect
// to readers.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "jarvis/embedder.hpp"

namespace jarvis {

struct ChunkPayload {
  std::string doc_id;
  std::int64_t page_no = 0;
  std::int64_t seq = 0;
  std::string text;

  bool operator==(const ChunkPayload&) const = default;
};

struct IndexEntry {
  std::uint64_t chunk_id = 0;
  EmbeddingVector vector;
  ChunkPayload payload;
};

struct ScoredChunk {
  std::uint64_t chunk_id = 0;
  double score = 0.0;
  ChunkPayload payload;

  bool operator==(const ScoredChunk&) const = default;
};

struct CollectionStats {
  std::string name;
  std::size_t dim = 0;
  std::size_t count = 0;
};

class IndexError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class DimensionMismatch : public IndexError {
 public:
  using IndexError::IndexError;
};
class UnknownCollection : public IndexError {
 public:
  using IndexError::IndexError;
};
class IndexIoError : public IndexError {
 public:
  using IndexError::IndexError;
};
class IndexFormatError : public IndexError {
 public:
  using IndexError::IndexError;
};

inline double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) s += a.values[i] * b.values[i];
  return s;
}

// dot(a,b)/(|a||b|); 0 when either side is the zero vector.
inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw DimensionMismatch("cosine of vectors with dims " +
                            std::to_string(a.dim()) + " and " +
                            std::to_string(b.dim()));
  }
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

inline constexpr char kIndexMagic[8] = {'J', 'A', 'R', 'V', 'S', 'V', 'E', 'C'};
inline constexpr std::uint32_t kIndexFormatVersion = 1;

class VectorIndex {
  using PageKey = std::tuple<std::string, std::int64_t, std::int64_t>;

  struct Collection {
    std::size_t dim = 0;  // 0 until the first insert
    std::uint64_t next_id = 1;
    std::vector<IndexEntry> entries;
    std::unordered_map<std::uint64_t, std::size_t> by_id;
    std::map<PageKey, std::uint64_t> by_key;

    void erase_at(std::size_t pos) {
      const auto& victim = entries[pos];
      by_key.erase({victim.payload.doc_id, victim.payload.page_no, victim.payload.seq});
      by_id.erase(victim.chunk_id);
      if (pos + 1 != entries.size()) {
        entries[pos] = std::move(entries.back());
        by_id[entries[pos].chunk_id] = pos;
      }
      entries.pop_back();
    }
  };

 public:
  static constexpr const char* kPhysics = "physics";
  static constexpr const char* kPersonal = "personal";

  // Creates the two default collections.
  VectorIndex() {
    collections_[kPhysics];
    collections_[kPersonal];
  }

  VectorIndex(const VectorIndex&) = delete;
  VectorIndex& operator=(const VectorIndex&) = delete;

  // Exclusive write session. Holding a Writer keeps every other writer out;
  // readers keep running and observe each mutation atomically.
  class Writer {
   public:
    explicit Writer(VectorIndex& index) : index_(&index), lock_(index.writer_mutex_) {}

    void create_collection(const std::string& name) {
      std::unique_lock rw(index_->rw_mutex_);
      index_->collections_[name];
    }

    void upsert(const std::string& collection, IndexEntry entry) {
      entry.vector = normalize(entry.vector);
      std::unique_lock rw(index_->rw_mutex_);
      auto& c = index_->get(collection);
      if (c.dim == 0 && c.entries.empty()) {
        if (entry.vector.dim() == 0) throw DimensionMismatch("empty vector");
        c.dim = entry.vector.dim();
      } else if (entry.vector.dim() != c.dim) {
        throw DimensionMismatch("collection '" + collection + "' has dim " +
                                std::to_string(c.dim) + ", got " +
                                std::to_string(entry.vector.dim()));
      }
      const PageKey key{entry.payload.doc_id, entry.payload.page_no, entry.payload.seq};
      // A different chunk already owning this key is superseded.
      if (auto k = c.by_key.find(key); k != c.by_key.end() && k->second != entry.chunk_id) {
        c.erase_at(c.by_id.at(k->second));
      }
      if (auto it = c.by_id.find(entry.chunk_id); it != c.by_id.end()) {
        auto& old = c.entries[it->second];
        c.by_key.erase({old.payload.doc_id, old.payload.page_no, old.payload.seq});
        old = std::move(entry);
        c.by_key[key] = old.chunk_id;
      } else {
        c.by_id[entry.chunk_id] = c.entries.size();
        c.by_key[key] = entry.chunk_id;
        c.next_id = std::max(c.next_id, entry.chunk_id + 1);
        c.entries.push_back(std::move(entry));
      }
    }

    // Existing id for (doc_id, page_no, seq), or a fresh one.
    std::uint64_t chunk_id_for(const std::string& collection, const std::string& doc_id,
                               std::int64_t page_no, std::int64_t seq) {
      std::unique_lock rw(index_->rw_mutex_);
      auto& c = index_->get(collection);
      if (auto it = c.by_key.find({doc_id, page_no, seq}); it != c.by_key.end()) {
        return it->second;
      }
      return c.next_id++;
    }

    // Drops chunks of one page whose seq >= from_seq. Returns how many.
    std::size_t erase_page_tail(const std::string& collection, const std::string& doc_id,
                                std::int64_t page_no, std::int64_t from_seq) {
      std::unique_lock rw(index_->rw_mutex_);
      auto& c = index_->get(collection);
      std::vector<std::uint64_t> doomed;
      for (auto it = c.by_key.lower_bound({doc_id, page_no, from_seq});
           it != c.by_key.end() && std::get<0>(it->first) == doc_id &&
           std::get<1>(it->first) == page_no;
           ++it) {
        doomed.push_back(it->second);
      }
      for (auto id : doomed) c.erase_at(c.by_id.at(id));
      return doomed.size();
    }

    bool erase(const std::string& collection, std::uint64_t chunk_id) {
      std::unique_lock rw(index_->rw_mutex_);
      auto& c = index_->get(collection);
      auto it = c.by_id.find(chunk_id);
      if (it == c.by_id.end()) return false;
      c.erase_at(it->second);
      return true;
    }

    // Replaces the whole index with the snapshot at path. On any error the
    // current contents are left untouched.
    void load(const std::filesystem::path& path) {
      auto loaded = read_snapshot(path);
      std::unique_lock rw(index_->rw_mutex_);
      index_->collections_ = std::move(loaded);
      index_->collections_[kPhysics];
      index_->collections_[kPersonal];
    }

   private:
    VectorIndex* index_;
    std::unique_lock<std::mutex> lock_;
  };

  Writer writer() { return Writer(*this); }

  void upsert(const std::string& collection, IndexEntry entry) {
    writer().upsert(collection, std::move(entry));
  }

  void load(const std::filesystem::path& path) { writer().load(path); }

  bool has_collection(const std::string& name) const {
    std::shared_lock rw(rw_mutex_);
    return collections_.count(name) != 0;
  }

  std::size_t size(const std::string& collection) const {
    std::shared_lock rw(rw_mutex_);
    return get(collection).entries.size();
  }

  std::size_t dim(const std::string& collection) const {
    std::shared_lock rw(rw_mutex_);
    return get(collection).dim;
  }

  std::vector<CollectionStats> stats() const {
    std::shared_lock rw(rw_mutex_);
    std::vector<CollectionStats> out;
    for (const auto& [name, c] : collections_) out.push_back({name, c.dim, c.entries.size()});
    return out;
  }

  std::optional<IndexEntry> get_entry(const std::string& collection,
                                      std::uint64_t chunk_id) const {
    std::shared_lock rw(rw_mutex_);
    const auto& c = get(collection);
    auto it = c.by_id.find(chunk_id);
    if (it == c.by_id.end()) return std::nullopt;
    return c.entries[it->second];
  }

  std::size_t count_doc(const std::string& collection, const std::string& doc_id) const {
    std::shared_lock rw(rw_mutex_);
    const auto& c = get(collection);
    std::size_t n = 0;
    for (auto it = c.by_key.lower_bound({doc_id, INT64_MIN, INT64_MIN});
         it != c.by_key.end() && std::get<0>(it->first) == doc_id; ++it) {
      ++n;
    }
    return n;
  }

  // Exact top-k by cosine; ties broken by ascending chunk_id.
  std::vector<ScoredChunk> search(const std::string& collection,
                                  const EmbeddingVector& query, std::size_t k) const {
    if (k == 0) throw std::invalid_argument("k must be >= 1");
    const EmbeddingVector q = normalize(query);
    std::shared_lock rw(rw_mutex_);
    const auto& c = get(collection);
    if (c.entries.empty()) return {};
    if (q.dim() != c.dim) {
      throw DimensionMismatch("query dim " + std::to_string(q.dim()) +
                              " does not match collection dim " + std::to_string(c.dim));
    }
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(c.entries.size());
    for (std::size_t i = 0; i < c.entries.size(); ++i) {
      scored.emplace_back(std::clamp(dot(q, c.entries[i].vector), -1.0, 1.0), i);
    }
    auto better = [&c](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return c.entries[a.second].chunk_id < c.entries[b.second].chunk_id;
    };
    const std::size_t n = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n),
                      scored.end(), better);
    std::vector<ScoredChunk> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& e = c.entries[scored[i].second];
      out.push_back({e.chunk_id, scored[i].first, e.payload});
    }
    return out;
  }

  // Writes a snapshot atomically (temp file + rename).
  void persist(const std::filesystem::path& path) const {
    std::string bytes;
    {
      std::shared_lock rw(rw_mutex_);
      bytes = encode(collections_);
    }
    auto tmp = path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw IndexIoError("cannot open " + tmp.string() + " for writing");
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      if (!out) throw IndexIoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IndexIoError("rename to " + path.string() + " failed: " + ec.message());
  }

 private:
  Collection& get(const std::string& name) {
    auto it = collections_.find(name);
    if (it == collections_.end()) throw UnknownCollection("unknown collection: " + name);
    return it->second;
  }
  const Collection& get(const std::string& name) const {
    auto it = collections_.find(name);
    if (it == collections_.end()) throw UnknownCollection("unknown collection: " + name);
    return it->second;
  }

  // Snapshot layout, all integers little-endian:
  //   magic[8] "JARVSVEC", u32 version, u32 collection_count
  //   per collection:
  //     u32 name_len, name, u32 dim, u64 count, u64 next_id
  //     count fixed-width records:
  //       u64 chunk_id, i64 page_no, i64 seq,
  //       u64 doc_off, u32 doc_len, u64 text_off, u32 text_len,
  //       f64[dim] vector (IEEE-754 bit patterns)
  //     u64 blob_len, blob (doc ids and texts referenced by offset)
  static void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  static void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }

  static std::string encode(const std::map<std::string, Collection>& collections) {
    std::string out(kIndexMagic, sizeof kIndexMagic);
    put_u32(out, kIndexFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(collections.size()));
    for (const auto& [name, c] : collections) {
      put_u32(out, static_cast<std::uint32_t>(name.size()));
      out += name;
      put_u32(out, static_cast<std::uint32_t>(c.dim));
      put_u64(out, c.entries.size());
      put_u64(out, c.next_id);
      std::vector<const IndexEntry*> sorted;
      for (const auto& e : c.entries) sorted.push_back(&e);
      std::sort(sorted.begin(), sorted.end(),
                [](auto* a, auto* b) { return a->chunk_id < b->chunk_id; });
      std::string blob;
      for (const auto* e : sorted) {
        put_u64(out, e->chunk_id);
        put_u64(out, static_cast<std::uint64_t>(e->payload.page_no));
        put_u64(out, static_cast<std::uint64_t>(e->payload.seq));
        put_u64(out, blob.size());
        put_u32(out, static_cast<std::uint32_t>(e->payload.doc_id.size()));
        blob += e->payload.doc_id;
        put_u64(out, blob.size());
        put_u32(out, static_cast<std::uint32_t>(e->payload.text.size()));
        blob += e->payload.text;
        for (double x : e->vector.values) put_u64(out, std::bit_cast<std::uint64_t>(x));
      }
      put_u64(out, blob.size());
      out += blob;
    }
    return out;
  }

  class Reader {
   public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}
    std::uint64_t u(int width) {
      need(static_cast<std::size_t>(width));
      std::uint64_t v = 0;
      for (int i = 0; i < width; ++i) {
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
      }
      pos_ += static_cast<std::size_t>(width);
      return v;
    }
    std::string take(std::size_t n) {
      need(n);
      std::string s = bytes_.substr(pos_, n);
      pos_ += n;
      return s;
    }
    bool done() const { return pos_ == bytes_.size(); }

   private:
    void need(std::size_t n) const {
      if (bytes_.size() - pos_ < n) throw IndexFormatError("truncated index snapshot");
    }
    const std::string& bytes_;
    std::size_t pos_ = 0;
  };

  static std::map<std::string, Collection> read_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IndexIoError("cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IndexIoError("read failed: " + path.string());

    std::map<std::string, Collection> out;
    if (bytes.empty()) return out;

    Reader r(bytes);
    if (r.take(sizeof kIndexMagic) != std::string(kIndexMagic, sizeof kIndexMagic)) {
      throw IndexFormatError("bad magic in " + path.string());
    }
    const auto version = r.u(4);
    if (version != kIndexFormatVersion) {
      throw IndexFormatError("unsupported index format version " + std::to_string(version));
    }
    const auto ncoll = r.u(4);
    for (std::uint64_t ci = 0; ci < ncoll; ++ci) {
      std::string name = r.take(r.u(4));
      Collection c;
      c.dim = r.u(4);
      const auto count = r.u(8);
      c.next_id = r.u(8);
      struct Pending {
        std::uint64_t doc_off, doc_len, text_off, text_len;
      };
      std::vector<Pending> refs;
      if (count > bytes.size()) throw IndexFormatError("implausible record count");
      c.entries.reserve(count);
      for (std::uint64_t i = 0; i < count; ++i) {
        IndexEntry e;
        e.chunk_id = r.u(8);
        e.payload.page_no = static_cast<std::int64_t>(r.u(8));
        e.payload.seq = static_cast<std::int64_t>(r.u(8));
        Pending p{};
        p.doc_off = r.u(8);
        p.doc_len = r.u(4);
        p.text_off = r.u(8);
        p.text_len = r.u(4);
        e.vector.values.resize(c.dim);
        for (auto& x : e.vector.values) x = std::bit_cast<double>(r.u(8));
        refs.push_back(p);
        c.entries.push_back(std::move(e));
      }
      const std::string blob = r.take(r.u(8));
      for (std::size_t i = 0; i < c.entries.size(); ++i) {
        const auto& p = refs[i];
        if (p.doc_off + p.doc_len > blob.size() || p.text_off + p.text_len > blob.size()) {
          throw IndexFormatError("payload offset out of range");
        }
        auto& e = c.entries[i];
        e.payload.doc_id = blob.substr(p.doc_off, p.doc_len);
        e.payload.text = blob.substr(p.text_off, p.text_len);
        if (!c.by_id.emplace(e.chunk_id, i).second) {
          throw IndexFormatError("duplicate chunk id " + std::to_string(e.chunk_id));
        }
        c.by_key[{e.payload.doc_id, e.payload.page_no, e.payload.seq}] = e.chunk_id;
      }
      out[name] = std::move(c);
    }
    if (!r.done()) throw IndexFormatError("trailing bytes after index snapshot");
    return out;
  }

  mutable std::shared_mutex rw_mutex_;
  std::mutex writer_mutex_;
  std::map<std::string, Collection> collections_;
};

}  // namespace jarvis
