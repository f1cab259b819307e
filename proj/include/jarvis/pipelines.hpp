#pragma once

// Answer pipelines over a chat-completions client.
//
//   Standard  one call, history only
//   RAG       embed(query) -> top-k search -> one call with context blocks
//   HyDE      call 1 writes a hypothetical passage, embed(passage) -> top-k
//             search -> call 2 answers with the retrieved (real) documents
//
// Physics queries retrieve from the "physics" collection; Personal queries
// get the memory-store context plus archived turns from "personal";
// Standard-mode queries never retrieve. Failures walk down the ladder
// HyDE -> RAG -> Standard and the applied pipeline is what gets reported.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "jarvis/embedder.hpp"
#include "jarvis/llm.hpp"
#include "jarvis/memory_store.hpp"
#include "jarvis/router.hpp"
#include "jarvis/text.hpp"
#include "jarvis/vector_index.hpp"

namespace jarvis {

enum class PipelineKind { Standard, RAG, HyDE };

inline std::string_view to_string(PipelineKind k) {
  switch (k) {
    case PipelineKind::Standard: return "Standard";
    case PipelineKind::RAG: return "RAG";
    case PipelineKind::HyDE: return "HyDE";
  }
  return "Standard";
}

inline PipelineKind pipeline_from_string(std::string_view s) {
  if (text::iequals(s, "standard")) return PipelineKind::Standard;
  if (text::iequals(s, "rag")) return PipelineKind::RAG;
  if (text::iequals(s, "hyde")) return PipelineKind::HyDE;
  throw std::invalid_argument("unknown pipeline: " + std::string(s));
}

// Pipeline used when the request says "auto".
inline PipelineKind auto_pipeline(Mode mode) {
  return mode == Mode::Standard ? PipelineKind::Standard : PipelineKind::RAG;
}

inline constexpr std::size_t kContextBudget = 4096;

struct ChatResponse {
  std::string answer;
  Mode mode = Mode::Standard;
  PipelineKind pipeline = PipelineKind::Standard;
  PipelineKind requested = PipelineKind::Standard;
  std::vector<ScoredChunk> retrieved;
  int llm_calls = 0;
  double latency_s = 0.0;
  std::size_t prompt_tokens_est = 0;
  bool degraded = false;
  std::vector<std::string> notes;
};

struct Prompt {
  std::vector<ChatMessage> messages;
  std::size_t tokens_est = 0;
  std::size_t blocks_kept = 0;
  std::size_t history_kept = 0;
  bool query_truncated = false;
};

inline std::string wrap_context(std::string_view block) {
  return "<context>\n" + std::string(block) + "\n</context>";
}

// [system, context blocks (best first), history, user query]. Over budget,
// context blocks are dropped from the tail, then history from the oldest
// end; as a last resort the query itself is cut to fit.
inline Prompt assemble_prompt(std::string_view system, std::string_view query,
                              const std::vector<std::string>& blocks,
                              const std::vector<ChatTurn>& history,
                              std::size_t budget = kContextBudget) {
  const std::size_t system_tokens = estimate_tokens(system);
  if (budget <= system_tokens) {
    throw std::invalid_argument("context budget does not cover the system prompt");
  }
  std::vector<std::string> wrapped;
  std::vector<std::size_t> block_tokens;
  for (const auto& b : blocks) {
    wrapped.push_back(wrap_context(b));
    block_tokens.push_back(estimate_tokens(wrapped.back()));
  }
  std::vector<std::size_t> history_tokens;
  for (const auto& t : history) history_tokens.push_back(estimate_tokens(t.content));

  std::size_t n_blocks = wrapped.size();
  std::size_t first_turn = 0;
  std::size_t total = system_tokens + estimate_tokens(query);
  for (auto t : block_tokens) total += t;
  for (auto t : history_tokens) total += t;
  while (total > budget && n_blocks > 0) total -= block_tokens[--n_blocks];
  while (total > budget && first_turn < history.size()) total -= history_tokens[first_turn++];

  Prompt p;
  p.messages.push_back({"system", std::string(system)});
  for (std::size_t i = 0; i < n_blocks; ++i) p.messages.push_back({"system", wrapped[i]});
  for (std::size_t i = first_turn; i < history.size(); ++i) {
    p.messages.push_back({std::string(to_string(history[i].role)), history[i].content});
  }
  std::string q(query);
  if (total > budget) {
    q = truncate_to_tokens(q, budget - (total - estimate_tokens(query)));
    p.query_truncated = true;
  }
  p.messages.push_back({"user", std::move(q)});
  p.blocks_kept = n_blocks;
  p.history_kept = history.size() - first_turn;
  for (const auto& m : p.messages) p.tokens_est += estimate_tokens(m.content);
  return p;
}

struct PipelineConfig {
  std::size_t k = 5;
  std::size_t context_budget = kContextBudget;
  // Share of the budget granted to the memory-store context in Personal mode.
  std::size_t personal_context_tokens = 1024;
  std::size_t history_turns = MemoryStore::kContextTurns;
  std::string system_prompt =
      "You are Jarvis, a private on-device assistant. Use the context blocks when they are "
      "relevant. Do not invent personal details that are not stated in the context.";
  std::string hyde_instruction =
      "Write a short passage that would answer the following question as if from a textbook.";
};

class Assistant {
 public:
  Assistant(Router router, const Embedder& embedder, VectorIndex& index, MemoryStore& store,
            LlmClient& llm, PipelineConfig config = {})
      : router_(std::move(router)),
        embedder_(embedder),
        index_(index),
        store_(store),
        llm_(llm),
        config_(std::move(config)) {
    if (config_.k == 0) throw std::invalid_argument("k must be >= 1");
    if (config_.context_budget == 0) throw std::invalid_argument("context budget must be > 0");
  }

  const Router& router() const { return router_; }
  const PipelineConfig& config() const { return config_; }

  ChatResponse run_standard(const RoutedQuery& q, const std::string& session) {
    return timed(q, PipelineKind::Standard, [&](ChatResponse& r) { standard(q, session, r); });
  }

  ChatResponse run_rag(const RoutedQuery& q, const std::string& session) {
    return timed(q, PipelineKind::RAG, [&](ChatResponse& r) { rag(q, session, r); });
  }

  ChatResponse run_hyde(const RoutedQuery& q, const std::string& session) {
    return timed(q, PipelineKind::HyDE, [&](ChatResponse& r) { hyde(q, session, r); });
  }

  ChatResponse run(const RoutedQuery& q, PipelineKind kind, const std::string& session) {
    switch (kind) {
      case PipelineKind::Standard: return run_standard(q, session);
      case PipelineKind::RAG: return run_rag(q, session);
      case PipelineKind::HyDE: return run_hyde(q, session);
    }
    return run_standard(q, session);
  }

  // Routes the message, answers with `kind` (or the auto policy when empty)
  // and records both turns in the session history.
  ChatResponse chat(const std::string& session, std::string_view message,
                    std::optional<PipelineKind> kind = std::nullopt) {
    if (text::trim(message).empty()) throw std::invalid_argument("message must not be empty");
    const auto q = router_.route(message);
    auto response = run(q, kind.value_or(auto_pipeline(q.mode)), session);
    store_.append_turn(session, Role::User, std::string(message));
    store_.append_turn(session, Role::Assistant, response.answer);
    return response;
  }

 private:
  template <typename Body>
  ChatResponse timed(const RoutedQuery& q, PipelineKind requested, Body&& body) {
    const auto start = std::chrono::steady_clock::now();
    ChatResponse r;
    r.mode = q.mode;
    r.requested = requested;
    body(r);
    r.latency_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
  }

  std::vector<ChatTurn> history(const std::string& session) const {
    if (session.empty()) return {};
    return store_.recent_turns(session, config_.history_turns);
  }

  void standard(const RoutedQuery& q, const std::string& session, ChatResponse& r) {
    auto prompt = assemble_prompt(config_.system_prompt, q.normalized, {}, history(session),
                                  config_.context_budget);
    r.answer = llm_.chat(prompt.messages);
    r.pipeline = PipelineKind::Standard;
    r.llm_calls = 1;
    r.retrieved.clear();
    r.prompt_tokens_est = prompt.tokens_est;
  }

  struct Retrieval {
    std::vector<std::string> blocks;
    std::vector<ScoredChunk> hits;
  };

  // Context for a retrieval-backed answer; `probe` is the text whose
  // embedding drives the vector search.
  Retrieval retrieve(const RoutedQuery& q, std::string_view probe, const std::string& session) {
    Retrieval out;
    const char* collection = VectorIndex::kPhysics;
    if (q.mode == Mode::Personal) {
      collection = VectorIndex::kPersonal;
      out.blocks.push_back(
          store_.build_personal_context(q.normalized, config_.personal_context_tokens, session));
    }
    out.hits = index_.search(collection, embedder_.embed(probe), config_.k);
    for (const auto& h : out.hits) {
      out.blocks.push_back("[" + h.payload.doc_id + " p." + std::to_string(h.payload.page_no) + "]\n" +
                           h.payload.text);
    }
    return out;
  }

  void answer_with(const RoutedQuery& q, const std::string& session, Retrieval retrieval,
                   ChatResponse& r) {
    auto prompt = assemble_prompt(config_.system_prompt, q.normalized, retrieval.blocks,
                                  history(session), config_.context_budget);
    // Hits whose block was dropped for budget reasons were not shown to the model.
    const std::size_t leading = retrieval.blocks.size() - retrieval.hits.size();
    const std::size_t shown = prompt.blocks_kept > leading ? prompt.blocks_kept - leading : 0;
    retrieval.hits.resize(std::min(retrieval.hits.size(), shown));
    r.answer = llm_.chat(prompt.messages);
    r.llm_calls += 1;
    r.retrieved = std::move(retrieval.hits);
    r.prompt_tokens_est = std::max(r.prompt_tokens_est, prompt.tokens_est);
  }

  void rag(const RoutedQuery& q, const std::string& session, ChatResponse& r) {
    if (q.mode == Mode::Standard) {
      r.notes.push_back("standard mode: no retrieval");
      standard(q, session, r);
      return;
    }
    Retrieval retrieval;
    try {
      retrieval = retrieve(q, q.normalized, session);
    } catch (const std::exception& e) {
      r.degraded = true;
      r.notes.push_back(std::string("retrieval failed, answered without context: ") + e.what());
      standard(q, session, r);
      return;
    }
    r.pipeline = PipelineKind::RAG;
    answer_with(q, session, std::move(retrieval), r);
  }

  void hyde(const RoutedQuery& q, const std::string& session, ChatResponse& r) {
    if (q.mode == Mode::Standard) {
      r.notes.push_back("standard mode: no retrieval");
      standard(q, session, r);
      return;
    }
    std::string hypothetical;
    try {
      auto first = assemble_prompt(config_.hyde_instruction, q.normalized, {}, {},
                                   config_.context_budget);
      r.prompt_tokens_est = first.tokens_est;
      hypothetical = llm_.chat(first.messages);
    } catch (const LlmError& e) {
      r.degraded = true;
      r.prompt_tokens_est = 0;
      r.notes.push_back(std::string("hypothetical document step failed, fell back to RAG: ") + e.what());
      rag(q, session, r);
      return;
    }
    r.llm_calls = 1;
    r.pipeline = PipelineKind::HyDE;
    Retrieval retrieval;
    try {
      retrieval = retrieve(q, hypothetical, session);
    } catch (const std::exception& e) {
      r.degraded = true;
      r.notes.push_back(std::string("retrieval failed, answered without context: ") + e.what());
    }
    answer_with(q, session, std::move(retrieval), r);
  }

  Router router_;
  const Embedder& embedder_;
  VectorIndex& index_;
  MemoryStore& store_;
  LlmClient& llm_;
  PipelineConfig config_;
};

}  // namespace jarvis
