#pragma once

// Service facade binding router, memory, index, pipelines and benchmark,
// plus its HTTP/1.1 JSON binding:
//
//   POST /chat                 {session_id, message, pipeline} -> ChatResponse
//   POST /ingest               JSON-lines or multipart pages   -> IngestReport
//   GET  /history/{session}?n=                                 -> [ChatTurn]
//   GET  /healthz                                              -> reachability flags
//   POST /bench/run            suite config                    -> {run_id, summary}
//   GET  /bench/report/{run_id}                                -> summary
//
// /bench/run holds an exclusive lock for its whole duration; chat and
// ingest requests arriving meanwhile get 409.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <thread>
#include <utility>

#include "httplib.h"
#include "json.hpp"
#include "jarvis/benchmark.hpp"
#include "jarvis/config.hpp"
#include "jarvis/embedder.hpp"
#include "jarvis/ingest.hpp"
#include "jarvis/llm.hpp"
#include "jarvis/memory_store.hpp"
#include "jarvis/pipelines.hpp"
#include "jarvis/remote.hpp"
#include "jarvis/router.hpp"
#include "jarvis/vector_index.hpp"

namespace jarvis {

using nlohmann::json;

inline json to_json(const ScoredChunk& c, std::size_t rank) {
  return {{"rank", rank},
          {"chunk_id", c.chunk_id},
          {"score", c.score},
          {"doc_id", c.payload.doc_id},
          {"page_no", c.payload.page_no},
          {"seq", c.payload.seq},
          {"text", c.payload.text}};
}

inline json to_json(const ChatResponse& r) {
  json retrieved = json::array();
  for (std::size_t i = 0; i < r.retrieved.size(); ++i) retrieved.push_back(to_json(r.retrieved[i], i + 1));
  return {{"answer", r.answer},
          {"mode", std::string(to_string(r.mode))},
          {"pipeline", std::string(to_string(r.pipeline))},
          {"requested_pipeline", std::string(to_string(r.requested))},
          {"retrieved", retrieved},
          {"llm_calls", r.llm_calls},
          {"latency_s", r.latency_s},
          {"prompt_tokens_est", r.prompt_tokens_est},
          {"degraded", r.degraded},
          {"notes", r.notes}};
}

inline json to_json(const ChatTurn& t) {
  return {{"session_id", t.session_id},
          {"turn_no", t.turn_no},
          {"role", std::string(to_string(t.role))},
          {"content", t.content},
          {"timestamp", t.timestamp}};
}

inline json to_json(const IngestReport& r) {
  return {{"pages_in", r.pages_in}, {"chunks_out", r.chunks_out}, {"chars_removed", r.chars_removed}};
}

// Rules used when llm_endpoint is "mock" and no rules file is configured.
inline ScriptedMock default_mock() {
  return ScriptedMock({
      MockRule{"*Write a short passage*", "A hypothetical passage about the question.", {}, {}},
      MockRule{"*", "This is a scripted reply.", {}, {}},
  });
}

inline std::unique_ptr<LlmClient> make_llm(const ServiceConfig& c) {
  if (c.llm_endpoint == "mock") {
    if (c.mock_rules.empty()) return std::make_unique<ScriptedMock>(default_mock());
    std::ifstream in(c.mock_rules);
    if (!in) throw std::runtime_error("cannot open mock rules " + c.mock_rules);
    return std::make_unique<ScriptedMock>(ScriptedMock::from_json(json::parse(in)));
  }
  LlmConfig lc;
  lc.endpoint = c.llm_endpoint;
  lc.model = c.llm_model;
  lc.timeout = std::chrono::milliseconds(static_cast<std::int64_t>(c.llm_timeout_s * 1000));
  return std::make_unique<RemoteLlmClient>(lc);
}

// A suite "models" entry: {"label", "mock": {rules...}} | {"label", "endpoint", "model"}.
// Entries with neither use the service's own client.
inline std::unique_ptr<LlmClient> make_llm(const json& model_spec, const ServiceConfig& base) {
  if (model_spec.contains("mock")) return std::make_unique<ScriptedMock>(ScriptedMock::from_json(model_spec["mock"]));
  if (!model_spec.contains("endpoint") && !model_spec.contains("model")) return nullptr;
  ServiceConfig c = base;
  c.llm_endpoint = model_spec.value("endpoint", base.llm_endpoint);
  c.llm_model = model_spec.value("model", base.llm_model);
  return make_llm(c);
}

inline std::unique_ptr<Embedder> make_embedder(const ServiceConfig& c) {
  if (c.embed_endpoint.empty()) return std::make_unique<HashEmbedder>(c.embed_dim, c.embed_seed);
  RemoteEmbedderConfig ec;
  ec.endpoint = c.embed_endpoint;
  ec.model = c.embed_model;
  ec.dim = c.embed_dim;
  return std::make_unique<RemoteEmbedder>(ec);
}

struct HttpResult {
  int status = 200;
  json body;
};

class Service {
 public:
  explicit Service(ServiceConfig config)
      : Service(config, make_embedder(config), make_llm(config)) {}

  Service(ServiceConfig config, std::unique_ptr<Embedder> embedder, std::unique_ptr<LlmClient> llm)
      : config_(std::move(config)),
        embedder_(std::move(embedder)),
        llm_(std::move(llm)),
        store_(std::filesystem::path(config_.data_dir) / "store") {
    config_.validate();
    if (std::filesystem::exists(index_path())) index_.load(index_path());
    assistant_ = std::make_unique<Assistant>(Router(config_.router_config()), *embedder_, index_, store_, *llm_,
                                             pipeline_config());
  }

  const ServiceConfig& config() const { return config_; }
  VectorIndex& index() { return index_; }
  MemoryStore& store() { return store_; }
  Assistant& assistant() { return *assistant_; }
  const Embedder& embedder() const { return *embedder_; }

  std::filesystem::path index_path() const { return std::filesystem::path(config_.data_dir) / "index.bin"; }
  std::filesystem::path bench_dir() const { return std::filesystem::path(config_.data_dir) / "bench"; }

  PipelineConfig pipeline_config() const {
    PipelineConfig p;
    p.k = config_.k;
    p.context_budget = config_.context_budget;
    p.personal_context_tokens = std::max<std::size_t>(1, config_.context_budget / 4);
    if (!config_.hyde_instruction.empty()) p.hyde_instruction = config_.hyde_instruction;
    if (!config_.system_prompt.empty()) p.system_prompt = config_.system_prompt;
    return p;
  }

  // --- handlers --------------------------------------------------------------

  HttpResult chat(const json& body) {
    if (!body.is_object() || !body.contains("message") || !body["message"].is_string() ||
        text::trim(body["message"].get<std::string>()).empty()) {
      return error(400, "message must be a non-empty string");
    }
    const std::string pipeline = body.value("pipeline", std::string("auto"));
    std::optional<PipelineKind> kind;
    if (!text::iequals(pipeline, "auto")) {
      try {
        kind = pipeline_from_string(pipeline);
      } catch (const std::invalid_argument&) {
        return error(422, "unknown pipeline: " + pipeline);
      }
    }
    const std::string session = body.value("session_id", std::string("default"));

    std::shared_lock bench(bench_mutex_, std::try_to_lock);
    if (!bench.owns_lock()) return error(409, "a benchmark run is in progress");
    try {
      auto response = assistant_->chat(session, body["message"].get<std::string>(), kind);
      json out = to_json(response);
      out["session_id"] = session;
      return {200, out};
    } catch (const LlmError& e) {
      return error(502, std::string("language model failure: ") + e.what());
    } catch (const std::exception& e) {
      return error(500, e.what());
    }
  }

  HttpResult ingest(const std::vector<RawPage>& pages) {
    std::shared_lock bench(bench_mutex_, std::try_to_lock);
    if (!bench.owns_lock()) return error(409, "a benchmark run is in progress");
    IngestOptions opts;
    opts.max_tokens = config_.max_tokens;
    opts.overlap_tokens = config_.overlap_tokens;
    try {
      auto report = ingest_corpus(pages, *embedder_, index_, opts);
      index_.persist(index_path());
      return {200, to_json(report)};
    } catch (const IngestError& e) {
      index_.persist(index_path());
      auto r = error(503, e.what());
      r.body["committed"] = e.committed();
      return r;
    }
  }

  HttpResult history(const std::string& session, std::optional<std::size_t> n) {
    json out = json::array();
    for (const auto& t : store_.recent_turns(session, n.value_or(SIZE_MAX))) out.push_back(to_json(t));
    return {200, out};
  }

  HttpResult healthz() {
    json flags{{"llm", llm_->reachable()},
               {"embedder", embedder_->reachable()},
               {"index", true},
               {"store", store_writable()}};
    bool all = true;
    for (const auto& [k, v] : flags.items()) all = all && v.get<bool>();
    flags["status"] = all ? "ok" : "degraded";
    return {200, flags};
  }

  // Suite config as accepted by SuiteConfig::from_json, plus optional
  // "corpus" (pages to ingest) and "persona_dir" (record fixtures): when
  // either is present the run uses a throw-away index and store seeded from
  // them instead of the live data. Relative paths resolve against base_dir.
  HttpResult bench_run(const json& suite, const std::filesystem::path& base_dir = {},
                       std::optional<std::filesystem::path> out_dir = std::nullopt) {
    std::unique_lock bench(bench_mutex_, std::try_to_lock);
    if (!bench.owns_lock()) return error(409, "a benchmark run is already in progress");
    SuiteConfig config;
    try {
      config = SuiteConfig::from_json(suite);
    } catch (const std::exception& e) {
      return error(400, std::string("invalid suite config: ") + e.what());
    }
    try {
      auto report = run_bench(config, suite, base_dir);
      const std::string run_id = next_run_id(config.name);
      const auto dir = out_dir.value_or(bench_dir() / run_id);
      write_report(report, dir);
      json summary = report.summary;
      summary.erase("series");
      return {200, {{"run_id", run_id}, {"dir", dir.string()}, {"summary", summary}}};
    } catch (const std::exception& e) {
      return error(500, e.what());
    }
  }

  HttpResult bench_report(const std::string& run_id) {
    if (run_id.empty() || run_id.find("..") != std::string::npos || run_id.find('/') != std::string::npos) {
      return error(404, "unknown run id");
    }
    const auto dir = bench_dir() / run_id;
    if (!std::filesystem::exists(dir / "samples.csv")) return error(404, "unknown run id: " + run_id);
    auto summary = load_report(dir);
    summary["run_id"] = run_id;
    return {200, summary};
  }

  static HttpResult error(int status, const std::string& message) {
    return {status, {{"error", message}, {"status", status}}};
  }

 private:
  bool store_writable() const {
    std::error_code ec;
    const auto dir = std::filesystem::path(config_.data_dir) / "store";
    return std::filesystem::is_directory(dir, ec);
  }

  std::string next_run_id(const std::string& name) {
    std::string clean;
    for (char c : name) clean.push_back(text::is_alnum(c) || c == '-' || c == '_' ? c : '-');
    if (clean.empty()) clean = "suite";
    for (;;) {
      std::string id = clean + "-" + std::to_string(system_clock_ms()) + "-" + std::to_string(run_counter_++);
      if (!std::filesystem::exists(bench_dir() / id)) return id;
    }
  }

  SuiteReport run_bench(const SuiteConfig& config, const json& suite, const std::filesystem::path& base_dir) {
    auto resolve = [&](const std::string& p) {
      std::filesystem::path path(p);
      return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
    };

    std::unique_ptr<VectorIndex> scratch_index;
    std::unique_ptr<MemoryStore> scratch_store;
    VectorIndex* index = &index_;
    MemoryStore* store = &store_;
    if (suite.contains("corpus") || suite.contains("persona_dir")) {
      scratch_index = std::make_unique<VectorIndex>();
      scratch_store = std::make_unique<MemoryStore>();
      index = scratch_index.get();
      store = scratch_store.get();
      if (suite.contains("corpus")) {
        IngestOptions opts;
        opts.max_tokens = config_.max_tokens;
        opts.overlap_tokens = config_.overlap_tokens;
        ingest_corpus(load_corpus(resolve(suite["corpus"].get<std::string>())), *embedder_, *index, opts);
      }
      if (suite.contains("persona_dir")) store->load(resolve(suite["persona_dir"].get<std::string>()));
    }

    std::map<std::string, std::unique_ptr<LlmClient>> clients;
    std::map<std::string, std::unique_ptr<Assistant>> assistants;
    const auto models = suite.value("models", json::array());
    for (const auto& label : config.model_labels) {
      LlmClient* client = llm_.get();
      for (const auto& m : models) {
        if (m.value("label", std::string()) != label) continue;
        if (auto c = make_llm(m, config_)) {
          client = c.get();
          clients[label] = std::move(c);
        }
      }
      assistants[label] = std::make_unique<Assistant>(Router(config_.router_config()), *embedder_, *index, *store,
                                                      *client, pipeline_config());
    }
    return run_suite(config, [&](const SuiteCase& c, PipelineKind variant, const std::string& label) {
      auto& a = *assistants.at(label);
      return a.run(a.router().route(c.prompt), variant, "");
    });
  }

  ServiceConfig config_;
  std::unique_ptr<Embedder> embedder_;
  std::unique_ptr<LlmClient> llm_;
  VectorIndex index_;
  MemoryStore store_;
  std::unique_ptr<Assistant> assistant_;
  std::shared_mutex bench_mutex_;
  std::atomic<std::uint64_t> run_counter_{0};
};

// Multipart uploads: each file is one page named "<doc_id>/<page_no>.txt"
// (the form field name is used when the filename has no directory part).
inline std::vector<RawPage> pages_from_multipart(const httplib::MultipartFormDataMap& files) {
  std::vector<RawPage> pages;
  for (const auto& [field, file] : files) {
    std::string name = file.filename.find('/') != std::string::npos ? file.filename : field;
    if (name.size() > 4 && name.compare(name.size() - 4, 4, ".txt") == 0) name.resize(name.size() - 4);
    const auto slash = name.rfind('/');
    if (slash == std::string::npos) throw std::invalid_argument("multipart page name must be <doc_id>/<page_no>.txt");
    RawPage p;
    p.doc_id = name.substr(0, slash);
    p.page_no = std::stoll(name.substr(slash + 1));
    p.text = file.content;
    pages.push_back(std::move(p));
  }
  std::sort(pages.begin(), pages.end(), [](const RawPage& a, const RawPage& b) {
    return std::tie(a.doc_id, a.page_no) < std::tie(b.doc_id, b.page_no);
  });
  return pages;
}

class HttpServer {
 public:
  explicit HttpServer(Service& service) : service_(service) { routes(); }

  ~HttpServer() { stop(); }

  // Binds host:port (port 0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port) {
    if (port == 0) return server_.bind_to_any_port(host);
    return server_.bind_to_port(host, port) ? port : -1;
  }

  // Blocks until stop().
  bool run() { return server_.listen_after_bind(); }

  void start_background() {
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  static void reply(httplib::Response& res, const HttpResult& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  }

  void routes() {
    server_.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server_.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });

    server_.Post("/chat", [this](const httplib::Request& req, httplib::Response& res) {
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::parse_error& e) {
        return reply(res, Service::error(400, std::string("invalid JSON: ") + e.what()));
      }
      reply(res, service_.chat(body));
    });

    server_.Post("/ingest", [this](const httplib::Request& req, httplib::Response& res) {
      std::vector<RawPage> pages;
      try {
        if (req.is_multipart_form_data()) {
          pages = pages_from_multipart(req.files);
        } else {
          std::istringstream in(req.body);
          pages = parse_corpus_jsonl(in);
        }
      } catch (const std::exception& e) {
        return reply(res, Service::error(400, e.what()));
      }
      reply(res, service_.ingest(pages));
    });

    server_.Get(R"(/history/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      std::optional<std::size_t> n;
      if (req.has_param("n")) {
        try {
          n = static_cast<std::size_t>(std::stoull(req.get_param_value("n")));
        } catch (const std::exception&) {
          return reply(res, Service::error(400, "n must be a non-negative integer"));
        }
      }
      reply(res, service_.history(req.matches[1], n));
    });

    server_.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
      reply(res, service_.healthz());
    });

    server_.Post("/bench/run", [this](const httplib::Request& req, httplib::Response& res) {
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::parse_error& e) {
        return reply(res, Service::error(400, std::string("invalid JSON: ") + e.what()));
      }
      std::filesystem::path base;
      if (body.contains("config_path")) {
        const std::filesystem::path path = body["config_path"].get<std::string>();
        std::ifstream in(path);
        if (!in) return reply(res, Service::error(400, "cannot open " + path.string()));
        try {
          body = json::parse(in);
        } catch (const json::parse_error& e) {
          return reply(res, Service::error(400, std::string("invalid suite file: ") + e.what()));
        }
        base = path.parent_path();
      }
      reply(res, service_.bench_run(body, base));
    });

    server_.Get(R"(/bench/report/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      reply(res, service_.bench_report(req.matches[1]));
    });

    if (const auto& ui = service_.config().webui_dir; !ui.empty() && std::filesystem::is_directory(ui)) {
      server_.set_mount_point("/", ui);
    }
  }

  Service& service_;
  httplib::Server server_;
  std::thread thread_;
};

}  // namespace jarvis
