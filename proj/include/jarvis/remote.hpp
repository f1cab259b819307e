#pragma once

// HTTP-backed providers speaking the OpenAI-compatible wire protocol:
//   POST {base}/v1/chat/completions  {model, messages, temperature}
//   POST {base}/v1/embeddings        {model, input: [text]}

#include <chrono>
#include <memory>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "jarvis/embedder.hpp"
#include "jarvis/llm.hpp"

namespace jarvis {

struct HttpEndpoint {
  std::string origin;     // scheme://host[:port]
  std::string base_path;  // "" or "/prefix", never ending in '/' or "/v1"
};

inline HttpEndpoint parse_endpoint(std::string url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) url = "http://" + url;
  const auto host_start = url.find("://") + 3;
  const auto slash = url.find('/', host_start);
  HttpEndpoint ep;
  ep.origin = url.substr(0, slash);
  ep.base_path = slash == std::string::npos ? "" : url.substr(slash);
  while (!ep.base_path.empty() && ep.base_path.back() == '/') ep.base_path.pop_back();
  if (ep.base_path.size() >= 3 && ep.base_path.compare(ep.base_path.size() - 3, 3, "/v1") == 0) {
    ep.base_path.resize(ep.base_path.size() - 3);
  }
  if (ep.origin.rfind("http://", 0) != 0) {
    throw std::invalid_argument("only plain http endpoints are supported: " + url);
  }
  return ep;
}

struct LlmConfig {
  std::string endpoint = "http://localhost:1234";
  std::string model = "gemma-3-1b-it";
  std::chrono::milliseconds timeout{120000};
  double temperature = 0.0;
  int max_retries = 1;
  std::chrono::milliseconds retry_backoff{200};
};

class RemoteLlmClient final : public LlmClient {
 public:
  explicit RemoteLlmClient(LlmConfig config)
      : config_(std::move(config)), endpoint_(parse_endpoint(config_.endpoint)) {}

  std::string chat(const std::vector<ChatMessage>& messages) override {
    if (messages.empty()) throw std::invalid_argument("chat requires at least one message");
    nlohmann::json body{{"model", config_.model},
                        {"temperature", config_.temperature},
                        {"messages", nlohmann::json::array()}};
    for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    const std::string payload = body.dump();

    for (int attempt = 0;; ++attempt) {
      try {
        return post_once(payload);
      } catch (const LlmError& e) {
        if (!e.retryable() || attempt >= config_.max_retries) throw;
        std::this_thread::sleep_for(config_.retry_backoff * (attempt + 1));
      }
    }
  }

  bool reachable() override {
    auto cli = client(std::chrono::milliseconds(2000));
    return static_cast<bool>(cli.Get(endpoint_.base_path + "/v1/models"));
  }

  std::string model_name() const override { return config_.model; }

 private:
  httplib::Client client(std::chrono::milliseconds timeout) const {
    httplib::Client cli(endpoint_.origin);
    cli.set_connection_timeout(timeout);
    cli.set_read_timeout(timeout);
    cli.set_write_timeout(timeout);
    return cli;
  }

  std::string post_once(const std::string& payload) {
    auto cli = client(config_.timeout);
    auto res = cli.Post(endpoint_.base_path + "/v1/chat/completions", payload, "application/json");
    if (!res) {
      const auto err = res.error();
      const auto kind = (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
                            ? LlmErrorKind::Timeout
                            : LlmErrorKind::Transport;
      throw LlmError(kind, "chat completion request failed: " + httplib::to_string(err));
    }
    if (res->status < 200 || res->status >= 300) {
      throw LlmError(LlmErrorKind::HttpStatus,
                     "chat completion returned HTTP " + std::to_string(res->status), res->status);
    }
    try {
      auto j = nlohmann::json::parse(res->body);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const std::exception& e) {
      throw LlmError(LlmErrorKind::Malformed, std::string("malformed chat completion body: ") + e.what(),
                     res->status);
    }
  }

  LlmConfig config_;
  HttpEndpoint endpoint_;
};

struct RemoteEmbedderConfig {
  std::string endpoint = "http://localhost:1234";
  std::string model = "all-MiniLM-L6-v2";
  std::size_t dim = kDefaultEmbeddingDim;
  std::chrono::milliseconds timeout{30000};
  std::ptrdiff_t max_in_flight = 4;
};

class RemoteEmbedder final : public Embedder {
 public:
  explicit RemoteEmbedder(RemoteEmbedderConfig config)
      : config_(std::move(config)),
        endpoint_(parse_endpoint(config_.endpoint)),
        slots_(std::make_unique<std::counting_semaphore<>>(std::max<std::ptrdiff_t>(1, config_.max_in_flight))) {
    if (config_.dim == 0) throw std::invalid_argument("embedding dim must be > 0");
  }

  EmbeddingVector embed(std::string_view text) const override {
    if (text::trim(text).empty()) return unit_basis(config_.dim);
    const nlohmann::json body{{"model", config_.model}, {"input", nlohmann::json::array({std::string(text)})}};

    slots_->acquire();
    struct Release {
      std::counting_semaphore<>* s;
      ~Release() { s->release(); }
    } release{slots_.get()};

    httplib::Client cli(endpoint_.origin);
    cli.set_connection_timeout(config_.timeout);
    cli.set_read_timeout(config_.timeout);
    auto res = cli.Post(endpoint_.base_path + "/v1/embeddings", body.dump(), "application/json");
    if (!res) {
      throw EmbedError("embedding request failed: " + httplib::to_string(res.error()), true, 0);
    }
    if (res->status < 200 || res->status >= 300) {
      throw EmbedError("embedding endpoint returned HTTP " + std::to_string(res->status), true, res->status);
    }
    EmbeddingVector v;
    try {
      auto j = nlohmann::json::parse(res->body);
      v.values = j.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const std::exception& e) {
      throw EmbedError(std::string("malformed embedding body: ") + e.what(), false, res->status);
    }
    if (v.dim() != config_.dim) {
      throw EmbedError("embedding endpoint returned dim " + std::to_string(v.dim()) + ", expected " +
                           std::to_string(config_.dim),
                       false, res->status);
    }
    for (double x : v.values) {
      if (!std::isfinite(x)) throw EmbedError("non-finite embedding component", false, res->status);
    }
    return normalize(v);
  }

  std::size_t dim() const override { return config_.dim; }

  bool reachable() const override {
    httplib::Client cli(endpoint_.origin);
    cli.set_connection_timeout(std::chrono::milliseconds(2000));
    cli.set_read_timeout(std::chrono::milliseconds(2000));
    return static_cast<bool>(cli.Get(endpoint_.base_path + "/v1/models"));
  }

 private:
  RemoteEmbedderConfig config_;
  HttpEndpoint endpoint_;
  std::unique_ptr<std::counting_semaphore<>> slots_;
};

}  // namespace jarvis
