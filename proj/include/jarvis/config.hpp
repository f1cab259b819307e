#pragma once

// Service configuration: JSON file, then environment overrides.
//
//   JARVIS_LLM_ENDPOINT   "mock" selects the scripted mock
//   JARVIS_LLM_MODEL, JARVIS_MOCK_RULES, JARVIS_DATA_DIR, JARVIS_PORT,
//   JARVIS_HOST, JARVIS_CONTEXT_BUDGET, JARVIS_K,
//   JARVIS_MODE_TOKENS (comma separated), JARVIS_PHYSICS_PREFIX,
//   JARVIS_EMBED_ENDPOINT (or EMBED_ENDPOINT), EMBED_MODEL, EMBED_DIM

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "jarvis/embedder.hpp"
#include "jarvis/router.hpp"

namespace jarvis {

struct ServiceConfig {
  std::string llm_endpoint = "mock";
  std::string llm_model = "gemma-3-1b-it";
  double llm_timeout_s = 120.0;
  std::string mock_rules;  // path to a ScriptedMock rules file
  std::string embed_endpoint;  // empty: deterministic hashed embedder
  std::string embed_model = "all-MiniLM-L6-v2";
  std::size_t embed_dim = kDefaultEmbeddingDim;
  std::uint64_t embed_seed = 0;
  std::string data_dir = "jarvis-data";
  std::string webui_dir;
  std::size_t context_budget = 4096;
  std::size_t k = 5;
  std::vector<std::string> mode_tokens = RouterConfig{}.personal_tokens;
  std::string physics_prefix = RouterConfig{}.physics_prefix;
  std::string host = "127.0.0.1";
  int port = 8000;
  std::size_t max_tokens = 512;
  std::size_t overlap_tokens = 64;
  std::string hyde_instruction;  // empty: built-in default
  std::string system_prompt;     // empty: built-in default

  void validate() const {
    if (context_budget == 0) throw std::invalid_argument("context_budget must be > 0");
    if (k == 0) throw std::invalid_argument("k must be >= 1");
    if (embed_dim == 0) throw std::invalid_argument("embed_dim must be > 0");
    if (max_tokens <= overlap_tokens) throw std::invalid_argument("max_tokens must exceed overlap_tokens");
    if (physics_prefix.empty()) throw std::invalid_argument("physics_prefix must not be empty");
  }

  RouterConfig router_config() const { return RouterConfig{mode_tokens, physics_prefix}; }
};

inline void from_json(const nlohmann::json& j, ServiceConfig& c) {
  c.llm_endpoint = j.value("llm_endpoint", c.llm_endpoint);
  c.llm_model = j.value("llm_model", c.llm_model);
  c.llm_timeout_s = j.value("llm_timeout_s", c.llm_timeout_s);
  c.mock_rules = j.value("mock_rules", c.mock_rules);
  c.embed_endpoint = j.value("embed_endpoint", c.embed_endpoint);
  c.embed_model = j.value("embed_model", c.embed_model);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.embed_seed = j.value("embed_seed", c.embed_seed);
  c.data_dir = j.value("data_dir", c.data_dir);
  c.webui_dir = j.value("webui_dir", c.webui_dir);
  c.context_budget = j.value("context_budget", c.context_budget);
  c.k = j.value("k", c.k);
  c.mode_tokens = j.value("mode_tokens", c.mode_tokens);
  c.physics_prefix = j.value("physics_prefix", c.physics_prefix);
  c.host = j.value("host", c.host);
  c.port = j.value("port", c.port);
  c.max_tokens = j.value("max_tokens", c.max_tokens);
  c.overlap_tokens = j.value("overlap_tokens", c.overlap_tokens);
  c.hyde_instruction = j.value("hyde_instruction", c.hyde_instruction);
  c.system_prompt = j.value("system_prompt", c.system_prompt);
}

using EnvLookup = std::function<std::optional<std::string>(const char*)>;

inline std::optional<std::string> process_env(const char* name) {
  if (const char* v = std::getenv(name)) return std::string(v);
  return std::nullopt;
}

inline void apply_env(ServiceConfig& c, const EnvLookup& env = process_env) {
  auto str = [&](const char* name, std::string& field) {
    if (auto v = env(name)) field = *v;
  };
  auto num = [&](const char* name, auto& field) {
    if (auto v = env(name)) {
      try {
        field = static_cast<std::remove_reference_t<decltype(field)>>(std::stoll(*v));
      } catch (const std::exception&) {
        throw std::invalid_argument(std::string(name) + " is not an integer: " + *v);
      }
    }
  };
  str("JARVIS_LLM_ENDPOINT", c.llm_endpoint);
  str("JARVIS_LLM_MODEL", c.llm_model);
  str("JARVIS_MOCK_RULES", c.mock_rules);
  str("EMBED_ENDPOINT", c.embed_endpoint);
  str("JARVIS_EMBED_ENDPOINT", c.embed_endpoint);
  str("EMBED_MODEL", c.embed_model);
  num("EMBED_DIM", c.embed_dim);
  str("JARVIS_DATA_DIR", c.data_dir);
  str("JARVIS_WEBUI_DIR", c.webui_dir);
  str("JARVIS_HOST", c.host);
  num("JARVIS_PORT", c.port);
  num("JARVIS_CONTEXT_BUDGET", c.context_budget);
  num("JARVIS_K", c.k);
  str("JARVIS_PHYSICS_PREFIX", c.physics_prefix);
  if (auto v = env("JARVIS_MODE_TOKENS")) {
    c.mode_tokens.clear();
    std::size_t start = 0;
    while (start <= v->size()) {
      auto comma = v->find(',', start);
      if (comma == std::string::npos) comma = v->size();
      auto token = std::string(text::trim(std::string_view(*v).substr(start, comma - start)));
      if (!token.empty()) c.mode_tokens.push_back(token);
      start = comma + 1;
    }
  }
}

inline ServiceConfig load_config(const std::optional<std::filesystem::path>& file,
                                 const EnvLookup& env = process_env) {
  ServiceConfig c;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw std::runtime_error("cannot open config " + file->string());
    from_json(nlohmann::json::parse(in), c);
  }
  apply_env(c, env);
  c.validate();
  return c;
}

}  // namespace jarvis
