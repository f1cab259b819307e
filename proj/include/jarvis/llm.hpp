#pragma once

#include <chrono>
#include <cstdint>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "json.hpp"

namespace jarvis {

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

enum class LlmErrorKind { Timeout, Transport, HttpStatus, Malformed, NoScript };

inline std::string_view to_string(LlmErrorKind k) {
  switch (k) {
    case LlmErrorKind::Timeout: return "timeout";
    case LlmErrorKind::Transport: return "transport";
    case LlmErrorKind::HttpStatus: return "http_status";
    case LlmErrorKind::Malformed: return "malformed";
    case LlmErrorKind::NoScript: return "no_script";
  }
  return "transport";
}

class LlmError : public std::runtime_error {
 public:
  LlmError(LlmErrorKind kind, const std::string& what, int status = 0)
      : std::runtime_error(what), kind_(kind), status_(status) {}

  LlmErrorKind kind() const { return kind_; }
  int status() const { return status_; }

  bool retryable() const {
    switch (kind_) {
      case LlmErrorKind::Timeout:
      case LlmErrorKind::Transport: return true;
      case LlmErrorKind::HttpStatus: return status_ == 429 || status_ >= 500;
      default: return false;
    }
  }

 private:
  LlmErrorKind kind_;
  int status_;
};

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  // Returns the assistant text of the first choice.
  virtual std::string chat(const std::vector<ChatMessage>& messages) = 0;
  virtual bool reachable() { return true; }
  virtual std::string model_name() const = 0;
};

// Shell-style glob over the whole string: '*' any run, '?' any byte.
inline bool glob_match(std::string_view pattern, std::string_view s) {
  std::size_t p = 0, i = 0;
  std::size_t star = std::string_view::npos, mark = 0;
  while (i < s.size()) {
    if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == s[i])) {
      ++p;
      ++i;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = i;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      i = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

// Flattens a message list into the text mock rules are matched against:
// one "role: content" block per message, joined by newlines.
inline std::string transcript(const std::vector<ChatMessage>& messages) {
  std::string out;
  for (std::size_t i = 0; i < messages.size(); ++i) {
    if (i > 0) out.push_back('\n');
    out += messages[i].role + ": " + messages[i].content;
  }
  return out;
}

struct MockRule {
  std::string pattern = "*";
  std::string reply;
  std::chrono::microseconds delay{0};
  std::optional<LlmErrorKind> fail;
};

// Deterministic stand-in for a chat-completions endpoint. The first rule
// whose pattern matches the transcript wins; its delay is slept before the
// reply (or the configured failure) is produced.
class ScriptedMock final : public LlmClient {
 public:
  explicit ScriptedMock(std::vector<MockRule> rules, std::string model = "scripted-mock")
      : rules_(std::move(rules)), model_(std::move(model)) {}

  ScriptedMock(ScriptedMock&& other) noexcept
      : rules_(std::move(other.rules_)), model_(std::move(other.model_)), log_(std::move(other.log_)) {}

  // {"model": "...", "rules": [{"match", "reply", "delay_ms", "fail"}]}
  static ScriptedMock from_json(const nlohmann::json& j) {
    std::vector<MockRule> rules;
    for (const auto& r : j.at("rules")) {
      MockRule rule;
      rule.pattern = r.value("match", std::string("*"));
      rule.reply = r.value("reply", std::string());
      rule.delay = std::chrono::microseconds(
          static_cast<std::int64_t>(r.value("delay_ms", 0.0) * 1000.0));
      if (r.contains("fail")) {
        const auto f = r.at("fail").get<std::string>();
        if (f == "timeout") rule.fail = LlmErrorKind::Timeout;
        else if (f == "transport") rule.fail = LlmErrorKind::Transport;
        else if (f == "http_status") rule.fail = LlmErrorKind::HttpStatus;
        else if (f == "malformed") rule.fail = LlmErrorKind::Malformed;
        else throw std::invalid_argument("unknown mock failure kind: " + f);
      }
      rules.push_back(std::move(rule));
    }
    return ScriptedMock(std::move(rules), j.value("model", std::string("scripted-mock")));
  }

  std::string chat(const std::vector<ChatMessage>& messages) override {
    if (messages.empty()) throw std::invalid_argument("chat requires at least one message");
    const std::string prompt = transcript(messages);
    {
      std::lock_guard lock(mutex_);
      log_.push_back(messages);
    }
    for (const auto& rule : rules_) {
      if (!glob_match(rule.pattern, prompt)) continue;
      if (rule.delay.count() > 0) std::this_thread::sleep_for(rule.delay);
      if (rule.fail) {
        throw LlmError(*rule.fail, "scripted failure (" + std::string(to_string(*rule.fail)) + ")",
                       *rule.fail == LlmErrorKind::HttpStatus ? 500 : 0);
      }
      return rule.reply;
    }
    throw LlmError(LlmErrorKind::NoScript, "no scripted reply matches the prompt");
  }

  std::string model_name() const override { return model_; }

  std::size_t calls() const {
    std::lock_guard lock(mutex_);
    return log_.size();
  }

  std::vector<std::vector<ChatMessage>> call_log() const {
    std::lock_guard lock(mutex_);
    return log_;
  }

  void clear_log() {
    std::lock_guard lock(mutex_);
    log_.clear();
  }

 private:
  std::vector<MockRule> rules_;
  std::string model_;
  mutable std::mutex mutex_;
  std::vector<std::vector<ChatMessage>> log_;
};

}  // namespace jarvis
