#pragma once

// Short-term memory: schema-free personal records keyed by (collection, id),
// per-session conversation turns, and archival of aged turns into the
// "personal" vector collection. With a data directory attached every
// mutation is written through to JSON-lines files:
//
//   <dir>/<collection>.jsonl  {"_id": ..., "_updated_at": ms, <fields>...}
//   <dir>/turns.jsonl         {"session_id","turn_no","role","content","timestamp"}
//   <dir>/sessions.jsonl      {"session_id","next_turn_no"}
//
// Lines are canonical nlohmann dumps (object keys sorted).

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "jarvis/embedder.hpp"
#include "jarvis/text.hpp"
#include "jarvis/vector_index.hpp"

namespace jarvis {

using Json = nlohmann::json;
using Clock = std::function<std::int64_t()>;

inline std::int64_t system_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

inline constexpr std::array<std::string_view, 5> kRecordCollections{
    "profile", "schedule", "contacts", "documents", "preferences"};

inline bool is_record_collection(std::string_view name) {
  return std::find(kRecordCollections.begin(), kRecordCollections.end(), name) !=
         kRecordCollections.end();
}

struct PersonalRecord {
  std::string collection;
  std::string id;
  Json fields = Json::object();
  std::int64_t updated_at = 0;

  bool operator==(const PersonalRecord&) const = default;
};

enum class Role { User, Assistant };

inline std::string_view to_string(Role r) { return r == Role::User ? "user" : "assistant"; }

inline Role role_from_string(std::string_view s) {
  if (s == "user") return Role::User;
  if (s == "assistant") return Role::Assistant;
  throw std::invalid_argument("unknown role: " + std::string(s));
}

struct ChatTurn {
  std::string session_id;
  std::int64_t turn_no = 0;
  Role role = Role::User;
  std::string content;
  std::int64_t timestamp = 0;

  bool operator==(const ChatTurn&) const = default;
};

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MemoryStore {
 public:
  static constexpr std::size_t kContextTurns = 6;
  static constexpr std::size_t kMinMatchWordLength = 4;
  static constexpr const char* kEmptyProfileBanner = "[profile]\n(no profile on record)";

  explicit MemoryStore(std::optional<std::filesystem::path> dir = std::nullopt,
                       Clock clock = system_clock_ms)
      : dir_(std::move(dir)), clock_(std::move(clock)) {
    if (dir_) {
      std::filesystem::create_directories(*dir_);
      load_from(*dir_);
    }
  }

  MemoryStore(const MemoryStore&) = delete;
  MemoryStore& operator=(const MemoryStore&) = delete;

  // --- records -------------------------------------------------------------

  void upsert_record(PersonalRecord rec) {
    check_collection(rec.collection);
    if (rec.id.empty()) throw StoreError("record id must not be empty");
    if (!rec.fields.is_object()) throw StoreError("record fields must be a JSON object");
    std::unique_lock lock(mutex_);
    rec.updated_at = next_stamp();
    const auto coll = rec.collection;
    records_[coll][rec.id] = std::move(rec);
    write_collection(coll);
  }

  std::optional<PersonalRecord> get_record(std::string_view collection, const std::string& id) const {
    check_collection(collection);
    std::shared_lock lock(mutex_);
    auto c = records_.find(std::string(collection));
    if (c == records_.end()) return std::nullopt;
    auto it = c->second.find(id);
    if (it == c->second.end()) return std::nullopt;
    return it->second;
  }

  // Records ordered by id.
  std::vector<PersonalRecord> records(std::string_view collection) const {
    check_collection(collection);
    std::shared_lock lock(mutex_);
    std::vector<PersonalRecord> out;
    if (auto c = records_.find(std::string(collection)); c != records_.end()) {
      for (const auto& [id, rec] : c->second) out.push_back(rec);
    }
    return out;
  }

  // Records whose value at the dotted field path serializes identically to
  // `value`, ordered by id.
  std::vector<PersonalRecord> query_records(std::string_view collection, std::string_view field_path,
                                            const Json& value) const {
    if (field_path.empty()) throw std::invalid_argument("field path must not be empty");
    const std::string want = value.dump();
    std::vector<PersonalRecord> out;
    for (auto& rec : records(collection)) {
      const Json* node = &rec.fields;
      std::size_t start = 0;
      bool found = true;
      while (found && start <= field_path.size()) {
        auto dot = field_path.find('.', start);
        if (dot == std::string_view::npos) dot = field_path.size();
        const std::string key(field_path.substr(start, dot - start));
        if (!node->is_object() || !node->contains(key)) {
          found = false;
        } else {
          node = &(*node)[key];
        }
        start = dot + 1;
      }
      if (found && node->dump() == want) out.push_back(std::move(rec));
    }
    return out;
  }

  // --- conversation turns ----------------------------------------------------

  ChatTurn append_turn(const std::string& session_id, Role role, std::string content) {
    std::unique_lock lock(mutex_);
    auto& next = next_turn_[session_id];
    ChatTurn t{session_id, next++, role, std::move(content), clock_()};
    turns_[session_id].push_back(t);
    write_turns();
    return t;
  }

  // Last min(n, total) hot turns, oldest first.
  std::vector<ChatTurn> recent_turns(const std::string& session_id, std::size_t n) const {
    std::shared_lock lock(mutex_);
    auto it = turns_.find(session_id);
    if (it == turns_.end()) return {};
    const auto& dq = it->second;
    const std::size_t take = std::min(n, dq.size());
    return {dq.end() - static_cast<std::ptrdiff_t>(take), dq.end()};
  }

  std::size_t hot_turn_count(const std::string& session_id) const {
    std::shared_lock lock(mutex_);
    auto it = turns_.find(session_id);
    return it == turns_.end() ? 0 : it->second.size();
  }

  // Number of turns ever appended to the session (hot + archived).
  std::int64_t total_turns(const std::string& session_id) const {
    std::shared_lock lock(mutex_);
    auto it = next_turn_.find(session_id);
    return it == next_turn_.end() ? 0 : it->second;
  }

  // --- context ---------------------------------------------------------------

  // Labeled plain-text context: every profile record, other records sharing
  // a word of 4+ letters with the query, then the session's last 6 turns.
  // Truncated from the tail to budget_tokens.
  std::string build_personal_context(std::string_view query, std::size_t budget_tokens,
                                     const std::string& session_id = {}) const {
    if (budget_tokens == 0) throw std::invalid_argument("budget_tokens must be > 0");
    std::set<std::string> query_words;
    for (auto& w : text::words(query)) {
      if (w.size() >= kMinMatchWordLength) query_words.insert(std::move(w));
    }

    std::string out;
    {
      std::shared_lock lock(mutex_);
      auto profile = records_.find("profile");
      if (profile == records_.end() || profile->second.empty()) {
        out = kEmptyProfileBanner;
      } else {
        out = "[profile]";
        for (const auto& [id, rec] : profile->second) out += "\n" + render(rec);
      }

      std::string related;
      for (auto coll : kRecordCollections) {
        if (coll == "profile") continue;
        auto c = records_.find(std::string(coll));
        if (c == records_.end()) continue;
        for (const auto& [id, rec] : c->second) {
          const std::string line = render(rec);
          bool hit = false;
          for (const auto& w : text::words(line)) {
            if (query_words.count(w)) {
              hit = true;
              break;
            }
          }
          if (hit) related += "\n" + line;
        }
      }
      if (!related.empty()) out += "\n\n[related records]" + related;

      if (auto t = turns_.find(session_id); !session_id.empty() && t != turns_.end() && !t->second.empty()) {
        out += "\n\n[recent conversation]";
        const auto& dq = t->second;
        const std::size_t take = std::min(kContextTurns, dq.size());
        for (auto it = dq.end() - static_cast<std::ptrdiff_t>(take); it != dq.end(); ++it) {
          out += "\n" + std::string(to_string(it->role)) + ": " + it->content;
        }
      }
    }
    return truncate_to_tokens(out, budget_tokens);
  }

  // --- archival ----------------------------------------------------------------

  // Moves the session's hot turns with timestamp < older_than into the
  // "personal" collection (doc_id = session, page_no = turn_no, seq = 0).
  // All embeddings are computed before anything is mutated, so an embedder
  // failure leaves both stores untouched.
  std::size_t archive_old_turns(const std::string& session_id, std::int64_t older_than,
                                const Embedder& embedder, VectorIndex& index) {
    std::unique_lock lock(mutex_);
    auto it = turns_.find(session_id);
    if (it == turns_.end()) return 0;
    std::vector<IndexEntry> staged;
    for (const auto& t : it->second) {
      if (t.timestamp >= older_than) continue;
      std::string body = std::string(to_string(t.role)) + ": " + t.content;
      IndexEntry e;
      e.vector = embedder.embed(body);
      e.payload = ChunkPayload{session_id, t.turn_no, 0, std::move(body)};
      staged.push_back(std::move(e));
    }
    if (staged.empty()) return 0;

    {
      auto writer = index.writer();
      for (auto& e : staged) {
        e.chunk_id = writer.chunk_id_for(VectorIndex::kPersonal, e.payload.doc_id,
                                         e.payload.page_no, e.payload.seq);
        writer.upsert(VectorIndex::kPersonal, std::move(e));
      }
    }
    auto& dq = it->second;
    dq.erase(std::remove_if(dq.begin(), dq.end(),
                            [older_than](const ChatTurn& t) { return t.timestamp < older_than; }),
             dq.end());
    write_turns();
    return staged.size();
  }

  // --- persistence ---------------------------------------------------------------

  const std::optional<std::filesystem::path>& directory() const { return dir_; }

  // Writes every file to `dir` (independent of the attached directory).
  void save(const std::filesystem::path& dir) const {
    std::shared_lock lock(mutex_);
    std::filesystem::create_directories(dir);
    for (auto coll : kRecordCollections) write_collection_to(dir, std::string(coll));
    write_turns_to(dir);
  }

  // Replaces the in-memory state with the contents of `dir`.
  void load(const std::filesystem::path& dir) {
    std::unique_lock lock(mutex_);
    load_from(dir);
  }

  static std::string render(const PersonalRecord& rec) {
    std::string line = rec.collection + "/" + rec.id + ":";
    bool first = true;
    for (const auto& [key, value] : rec.fields.items()) {
      line += first ? " " : "; ";
      first = false;
      line += key + ": " + (value.is_string() ? value.get<std::string>() : value.dump());
    }
    return line;
  }

  static Json record_to_json(const PersonalRecord& rec) {
    Json j = rec.fields;
    j["_id"] = rec.id;
    j["_updated_at"] = rec.updated_at;
    return j;
  }

  static PersonalRecord record_from_json(std::string collection, Json j) {
    if (!j.is_object() || !j.contains("_id") || !j["_id"].is_string()) {
      throw StoreError("record line without string _id in " + collection);
    }
    PersonalRecord rec;
    rec.collection = std::move(collection);
    rec.id = j["_id"].get<std::string>();
    rec.updated_at = j.value("_updated_at", std::int64_t{0});
    j.erase("_id");
    j.erase("_updated_at");
    rec.fields = std::move(j);
    return rec;
  }

 private:
  static void check_collection(std::string_view c) {
    if (!is_record_collection(c)) throw StoreError("invalid record collection: " + std::string(c));
  }

  std::int64_t next_stamp() {
    last_stamp_ = std::max(clock_(), last_stamp_ + 1);
    return last_stamp_;
  }

  static void write_atomic(const std::filesystem::path& path, const std::string& body) {
    auto tmp = path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw StoreError("cannot write " + tmp.string());
      out << body;
    }
    std::filesystem::rename(tmp, path);
  }

  void write_collection(const std::string& coll) const {
    if (dir_) write_collection_to(*dir_, coll);
  }
  void write_turns() const {
    if (dir_) write_turns_to(*dir_);
  }

  void write_collection_to(const std::filesystem::path& dir, const std::string& coll) const {
    std::string body;
    if (auto c = records_.find(coll); c != records_.end()) {
      for (const auto& [id, rec] : c->second) body += record_to_json(rec).dump() + "\n";
    }
    write_atomic(dir / (coll + ".jsonl"), body);
  }

  void write_turns_to(const std::filesystem::path& dir) const {
    std::string turns;
    for (const auto& [session, dq] : turns_) {
      for (const auto& t : dq) {
        turns += Json{{"session_id", t.session_id},
                      {"turn_no", t.turn_no},
                      {"role", std::string(to_string(t.role))},
                      {"content", t.content},
                      {"timestamp", t.timestamp}}
                     .dump() +
                 "\n";
      }
    }
    std::string sessions;
    for (const auto& [session, next] : next_turn_) {
      sessions += Json{{"session_id", session}, {"next_turn_no", next}}.dump() + "\n";
    }
    write_atomic(dir / "turns.jsonl", turns);
    write_atomic(dir / "sessions.jsonl", sessions);
  }

  static std::vector<Json> read_jsonl(const std::filesystem::path& path) {
    std::vector<Json> out;
    std::ifstream in(path);
    if (!in) return out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (text::trim(line).empty()) continue;
      try {
        out.push_back(Json::parse(line));
      } catch (const Json::parse_error& e) {
        throw StoreError(path.string() + ":" + std::to_string(n) + ": " + e.what());
      }
    }
    return out;
  }

  void load_from(const std::filesystem::path& dir) {
    decltype(records_) records;
    for (auto coll : kRecordCollections) {
      const std::string name(coll);
      for (auto& j : read_jsonl(dir / (name + ".jsonl"))) {
        auto rec = record_from_json(name, std::move(j));
        last_stamp_ = std::max(last_stamp_, rec.updated_at);
        records[name][rec.id] = std::move(rec);
      }
    }
    decltype(turns_) turns;
    decltype(next_turn_) next;
    for (auto& j : read_jsonl(dir / "turns.jsonl")) {
      ChatTurn t;
      t.session_id = j.at("session_id").get<std::string>();
      t.turn_no = j.at("turn_no").get<std::int64_t>();
      t.role = role_from_string(j.at("role").get<std::string>());
      t.content = j.at("content").get<std::string>();
      t.timestamp = j.at("timestamp").get<std::int64_t>();
      next[t.session_id] = std::max(next[t.session_id], t.turn_no + 1);
      turns[t.session_id].push_back(std::move(t));
    }
    for (auto& j : read_jsonl(dir / "sessions.jsonl")) {
      auto& n = next[j.at("session_id").get<std::string>()];
      n = std::max(n, j.at("next_turn_no").get<std::int64_t>());
    }
    for (auto& [session, dq] : turns) {
      std::sort(dq.begin(), dq.end(),
                [](const ChatTurn& a, const ChatTurn& b) { return a.turn_no < b.turn_no; });
    }
    records_ = std::move(records);
    turns_ = std::move(turns);
    next_turn_ = std::move(next);
  }

  std::optional<std::filesystem::path> dir_;
  Clock clock_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::map<std::string, PersonalRecord>> records_;
  std::map<std::string, std::deque<ChatTurn>> turns_;
  std::map<std::string, std::int64_t> next_turn_;
  std::int64_t last_stamp_ = 0;
};

}  // namespace jarvis
