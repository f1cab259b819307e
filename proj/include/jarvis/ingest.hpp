#pragma once

// Corpus ingestion: per-page text cleaning (LaTeX markup, page numbers and
// running headers/footers), token-budgeted chunking and embedding into the
// vector index.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "jarvis/embedder.hpp"
#include "jarvis/text.hpp"
#include "jarvis/vector_index.hpp"

namespace jarvis {

struct RawPage {
  std::string doc_id;
  std::int64_t page_no = 1;
  std::string text;
};

struct Chunk {
  std::uint64_t chunk_id = 0;
  std::string doc_id;
  std::int64_t page_no = 0;
  std::int64_t seq = 0;
  std::string text;
  std::size_t token_estimate = 0;
};

struct IngestReport {
  std::size_t pages_in = 0;
  std::size_t chunks_out = 0;
  std::int64_t chars_removed = 0;
};

struct IngestOptions {
  std::size_t max_tokens = 512;
  std::size_t overlap_tokens = 64;
  std::string collection = VectorIndex::kPhysics;
  // A line repeated verbatim on at least this share of a document's pages
  // is treated as a running header/footer.
  double repeat_ratio = 0.6;
  // Repeat detection only applies to documents with at least this many pages.
  std::size_t repeat_min_pages = 3;
};

// Raised when embedding fails mid-ingest; chunks already written stay.
class IngestError : public std::runtime_error {
 public:
  IngestError(const std::string& what, std::size_t committed)
      : std::runtime_error(what), committed_(committed) {}
  std::size_t committed() const { return committed_; }

 private:
  std::size_t committed_;
};

namespace detail {

// Replaces control characters (other than newline) by spaces and folds
// CR/CRLF line endings into LF.
inline std::string scrub_controls(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto c = static_cast<unsigned char>(raw[i]);
    if (c == '\r') {
      out.push_back('\n');
      if (i + 1 < raw.size() && raw[i + 1] == '\n') ++i;
    } else if (c == '\n') {
      out.push_back('\n');
    } else if (c < 0x20 || c == 0x7F) {
      out.push_back(' ');
    } else if (c == 0xC2 && i + 1 < raw.size() &&
               static_cast<unsigned char>(raw[i + 1]) >= 0x80 &&
               static_cast<unsigned char>(raw[i + 1]) <= 0x9F) {
      out.push_back(' ');  // C1 control
      ++i;
    } else {
      out.push_back(raw[i]);
    }
  }
  return out;
}

// Offset one past the '}' matching the '{' at `open`, or npos.
inline std::size_t match_brace(std::string_view s, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      ++i;
      continue;
    }
    if (s[i] == '{') ++depth;
    if (s[i] == '}' && --depth == 0) return i + 1;
  }
  return std::string_view::npos;
}

// \name{a}{b} -> "a b" (arguments cleaned recursively), bare \name -> "",
// \\ -> " ", \<punct> -> <punct>. The result contains no backslashes.
inline std::string strip_latex(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] != '\\') {
      out.push_back(s[i++]);
      continue;
    }
    if (i + 1 >= s.size()) {
      ++i;
      continue;
    }
    const char next = s[i + 1];
    if (!text::is_alpha(next)) {
      if (next == '\\' || text::is_space(next)) {
        out.push_back(' ');
      } else if (std::string_view("\"'`^~=.").find(next) != std::string_view::npos) {
        // accent on the following letter: keep the letter only
      } else {
        out.push_back(next);
      }
      i += 2;
      continue;
    }
    std::size_t j = i + 1;
    while (j < s.size() && text::is_alpha(s[j])) ++j;
    if (j < s.size() && s[j] == '*') ++j;
    std::size_t after_name = j;
    // Optional [..] argument, only honored when a {..} group follows it.
    if (j < s.size() && s[j] == '[') {
      auto close = s.find(']', j);
      if (close != std::string_view::npos && close + 1 < s.size() && s[close + 1] == '{') {
        j = close + 1;
      }
    }
    std::vector<std::string> args;
    while (j < s.size() && s[j] == '{') {
      auto end = match_brace(s, j);
      if (end == std::string_view::npos) break;
      args.push_back(strip_latex(s.substr(j + 1, end - j - 2)));
      j = end;
    }
    if (args.empty()) {
      i = after_name;
      continue;
    }
    for (std::size_t a = 0; a < args.size(); ++a) {
      if (a > 0) out.push_back(' ');
      out += args[a];
    }
    i = j;
  }
  return out;
}

inline std::string collapse_spaces(std::string_view line) {
  std::string out;
  bool pending = false;
  for (char c : line) {
    if (text::is_space(c)) {
      pending = true;
      continue;
    }
    if (pending && !out.empty()) out.push_back(' ');
    pending = false;
    out.push_back(c);
  }
  return out;
}

inline bool is_page_number_line(std::string_view line) {
  static const std::regex re(R"(^[-\s]*(page\s*)?\d{1,5}(\s*(of|/)\s*\d{1,5})?[-\s]*$)",
                             std::regex::icase | std::regex::optimize);
  return std::regex_match(line.begin(), line.end(), re);
}

inline std::vector<std::string> normalized_lines(std::string_view raw) {
  std::vector<std::string> out;
  std::string body = strip_latex(scrub_controls(raw));
  std::size_t start = 0;
  while (start <= body.size()) {
    auto nl = body.find('\n', start);
    if (nl == std::string::npos) nl = body.size();
    out.push_back(collapse_spaces(std::string_view(body).substr(start, nl - start)));
    start = nl + 1;
  }
  return out;
}

}  // namespace detail

// Cleans one page. Lines equal (after normalization) to an entry of
// `boilerplate` are dropped along with bare page-number lines. Paragraphs are
// separated by a blank line; all other whitespace runs become one space.
inline std::string clean_text(std::string_view raw,
                              const std::set<std::string>& boilerplate = {}) {
  std::vector<std::string> paragraphs;
  std::string current;
  for (auto& line : detail::normalized_lines(raw)) {
    if (line.empty()) {
      if (!current.empty()) paragraphs.push_back(std::move(current));
      current.clear();
      continue;
    }
    if (detail::is_page_number_line(line) || boilerplate.count(line)) continue;
    if (!current.empty()) current.push_back(' ');
    current += line;
  }
  if (!current.empty()) paragraphs.push_back(std::move(current));

  std::string out;
  for (std::size_t i = 0; i < paragraphs.size(); ++i) {
    if (i > 0) out += "\n\n";
    out += paragraphs[i];
  }
  return out;
}

// Lines that repeat verbatim on at least `ratio` of the given pages (which
// should all belong to one document).
inline std::set<std::string> detect_boilerplate(const std::vector<const RawPage*>& pages,
                                                double ratio = 0.6,
                                                std::size_t min_pages = 3) {
  std::set<std::string> out;
  if (pages.size() < min_pages || pages.empty()) return out;
  std::map<std::string, std::size_t> seen_on;
  for (const auto* page : pages) {
    std::set<std::string> lines;
    for (auto& line : detail::normalized_lines(page->text)) {
      if (!line.empty()) lines.insert(std::move(line));
    }
    for (const auto& line : lines) ++seen_on[line];
  }
  const double threshold = ratio * static_cast<double>(pages.size());
  for (const auto& [line, n] : seen_on) {
    if (static_cast<double>(n) >= threshold - 1e-9) out.insert(line);
  }
  return out;
}

namespace detail {

// Splits an over-long paragraph into word windows of at most max_tokens,
// with consecutive windows sharing up to overlap_tokens of text.
inline std::vector<std::string> hard_split(std::string_view paragraph, std::size_t max_tokens,
                                           std::size_t overlap_tokens) {
  const std::size_t max_chars = max_tokens * 4;
  const std::size_t overlap_chars = overlap_tokens * 4;
  std::vector<std::string_view> words;
  for (auto w : text::split_whitespace(paragraph)) {
    while (text::char_count(w) > max_chars) {
      auto head = text::prefix_chars(w, max_chars);
      words.push_back(head);
      w.remove_prefix(head.size());
    }
    if (!w.empty()) words.push_back(w);
  }
  auto joined_chars = [&](std::size_t b, std::size_t e) {
    std::size_t n = 0;
    for (std::size_t i = b; i < e; ++i) n += text::char_count(words[i]) + (i > b ? 1 : 0);
    return n;
  };

  std::vector<std::string> out;
  std::size_t start = 0;
  while (start < words.size()) {
    std::size_t end = start + 1;
    std::size_t chars = text::char_count(words[start]);
    while (end < words.size() && chars + 1 + text::char_count(words[end]) <= max_chars) {
      chars += 1 + text::char_count(words[end]);
      ++end;
    }
    std::string window;
    for (std::size_t i = start; i < end; ++i) {
      if (i > start) window.push_back(' ');
      window += words[i];
    }
    out.push_back(std::move(window));
    if (end == words.size()) break;
    std::size_t next = end;
    while (next > start + 1 && joined_chars(next - 1, end) <= overlap_chars) --next;
    start = next;
  }
  return out;
}

}  // namespace detail

// Splits a page into chunks of at most max_tokens (by estimate_tokens),
// packing whole paragraphs greedily. chunk_id is left 0 for the caller to
// assign.
inline std::vector<Chunk> chunk_page(const RawPage& page, std::size_t max_tokens,
                                     std::size_t overlap_tokens,
                                     const std::set<std::string>& boilerplate = {}) {
  if (max_tokens <= overlap_tokens) {
    throw std::invalid_argument("max_tokens must exceed overlap_tokens");
  }
  const std::string cleaned = clean_text(page.text, boilerplate);
  std::vector<std::string> pieces;
  std::size_t pos = 0;
  while (pos < cleaned.size()) {
    auto sep = cleaned.find("\n\n", pos);
    if (sep == std::string::npos) sep = cleaned.size();
    std::string_view para(cleaned.data() + pos, sep - pos);
    if (estimate_tokens(para) <= max_tokens) {
      pieces.emplace_back(para);
    } else {
      for (auto& w : detail::hard_split(para, max_tokens, overlap_tokens)) {
        pieces.push_back(std::move(w));
      }
    }
    pos = sep + 2;
  }

  std::vector<std::string> segments;
  std::string current;
  for (auto& piece : pieces) {
    if (current.empty()) {
      current = std::move(piece);
      continue;
    }
    std::string candidate = current + "\n\n" + piece;
    if (estimate_tokens(candidate) <= max_tokens) {
      current = std::move(candidate);
    } else {
      segments.push_back(std::move(current));
      current = std::move(piece);
    }
  }
  if (!current.empty()) segments.push_back(std::move(current));

  std::vector<Chunk> chunks;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    Chunk c;
    c.doc_id = page.doc_id;
    c.page_no = page.page_no;
    c.seq = static_cast<std::int64_t>(i);
    c.token_estimate = estimate_tokens(segments[i]);
    c.text = std::move(segments[i]);
    chunks.push_back(std::move(c));
  }
  return chunks;
}

// Cleans, chunks, embeds and upserts every page. Re-ingesting a page
// replaces its chunks under their existing (doc_id, page_no, seq) ids.
inline IngestReport ingest_corpus(const std::vector<RawPage>& pages, const Embedder& embedder,
                                  VectorIndex& index, const IngestOptions& options = {}) {
  if (options.max_tokens <= options.overlap_tokens) {
    throw std::invalid_argument("max_tokens must exceed overlap_tokens");
  }
  std::map<std::string, std::vector<const RawPage*>> by_doc;
  for (const auto& p : pages) by_doc[p.doc_id].push_back(&p);
  std::map<std::string, std::set<std::string>> boilerplate;
  for (const auto& [doc, doc_pages] : by_doc) {
    boilerplate[doc] = detect_boilerplate(doc_pages, options.repeat_ratio, options.repeat_min_pages);
  }

  IngestReport report;
  auto writer = index.writer();
  writer.create_collection(options.collection);
  for (const auto& page : pages) {
    const auto& bp = boilerplate[page.doc_id];
    auto chunks = chunk_page(page, options.max_tokens, options.overlap_tokens, bp);
    report.chars_removed += static_cast<std::int64_t>(text::char_count(page.text)) -
                            static_cast<std::int64_t>(text::char_count(clean_text(page.text, bp)));
    for (auto& chunk : chunks) {
      EmbeddingVector vec;
      try {
        vec = embedder.embed(chunk.text);
      } catch (const std::exception& e) {
        throw IngestError(std::string("embedding failed for ") + page.doc_id + " page " +
                              std::to_string(page.page_no) + ": " + e.what(),
                          report.chunks_out);
      }
      chunk.chunk_id = writer.chunk_id_for(options.collection, chunk.doc_id, chunk.page_no, chunk.seq);
      writer.upsert(options.collection,
                    IndexEntry{chunk.chunk_id, std::move(vec),
                               ChunkPayload{chunk.doc_id, chunk.page_no, chunk.seq, chunk.text}});
      ++report.chunks_out;
    }
    writer.erase_page_tail(options.collection, page.doc_id, page.page_no,
                           static_cast<std::int64_t>(chunks.size()));
    ++report.pages_in;
  }
  return report;
}

// Reads <root>/<doc_id>/<page_no>.txt files, ordered by doc_id then page_no.
inline std::vector<RawPage> load_corpus_dir(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw std::runtime_error("not a directory: " + root.string());
  std::vector<RawPage> pages;
  for (const auto& doc : fs::directory_iterator(root)) {
    if (!doc.is_directory()) continue;
    for (const auto& file : fs::directory_iterator(doc.path())) {
      if (!file.is_regular_file() || file.path().extension() != ".txt") continue;
      const auto stem = file.path().stem().string();
      if (stem.empty() || !std::all_of(stem.begin(), stem.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        continue;
      }
      std::ifstream in(file.path(), std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      pages.push_back({doc.path().filename().string(), std::stoll(stem), ss.str()});
    }
  }
  std::sort(pages.begin(), pages.end(), [](const RawPage& a, const RawPage& b) {
    return std::tie(a.doc_id, a.page_no) < std::tie(b.doc_id, b.page_no);
  });
  return pages;
}

inline std::vector<RawPage> parse_corpus_jsonl(std::istream& in) {
  std::vector<RawPage> pages;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      RawPage p;
      p.doc_id = j.at("doc_id").get<std::string>();
      p.page_no = j.at("page_no").get<std::int64_t>();
      p.text = j.at("text").get<std::string>();
      if (p.page_no < 1) throw std::invalid_argument("page_no must be >= 1");
      pages.push_back(std::move(p));
    } catch (const std::exception& e) {
      throw std::runtime_error("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return pages;
}

inline std::vector<RawPage> load_corpus(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) return load_corpus_dir(path);
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return parse_corpus_jsonl(in);
}

}  // namespace jarvis
