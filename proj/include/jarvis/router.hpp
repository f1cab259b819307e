#pragma once

// Rule-based mode routing. A prompt is Physics when it starts (after
// optional whitespace) with the physics prefix, Personal when it contains a
// self-referential token as a whole word, and Standard otherwise. Both
// checks are case-insensitive; the prefix check wins.

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "jarvis/text.hpp"

namespace jarvis {

enum class Mode { Personal, Physics, Standard };

inline std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::Personal: return "Personal";
    case Mode::Physics: return "Physics";
    case Mode::Standard: return "Standard";
  }
  return "Standard";
}

inline Mode mode_from_string(std::string_view s) {
  if (text::iequals(s, "personal")) return Mode::Personal;
  if (text::iequals(s, "physics")) return Mode::Physics;
  if (text::iequals(s, "standard")) return Mode::Standard;
  throw std::invalid_argument("unknown mode: " + std::string(s));
}

struct RoutedQuery {
  std::string original;
  std::string normalized;
  Mode mode = Mode::Standard;
};

struct RouterConfig {
  std::vector<std::string> personal_tokens{"I", "me", "my", "mine", "we", "our"};
  std::string physics_prefix = "phy:";
};

class Router {
 public:
  Router() = default;
  explicit Router(RouterConfig config) : config_(std::move(config)) {
    if (config_.physics_prefix.empty()) {
      throw std::invalid_argument("physics prefix must not be empty");
    }
  }

  const RouterConfig& config() const { return config_; }

  Mode classify(std::string_view prompt) const {
    if (physics_prefix_end(prompt)) return Mode::Physics;
    if (has_personal_token(prompt)) return Mode::Personal;
    return Mode::Standard;
  }

  // Strips exactly one physics prefix (when present) and the surrounding
  // whitespace.
  RoutedQuery route(std::string_view prompt) const {
    RoutedQuery q;
    q.original = std::string(prompt);
    q.mode = classify(prompt);
    if (auto end = physics_prefix_end(prompt)) {
      q.normalized = std::string(text::trim(prompt.substr(end)));
    } else {
      q.normalized = std::string(text::trim(prompt));
    }
    return q;
  }

  bool has_personal_token(std::string_view prompt) const {
    for (const auto& token : config_.personal_tokens) {
      if (contains_whole_word(prompt, token)) return true;
    }
    return false;
  }

 private:
  // Offset just past the matched prefix, or 0 when absent.
  std::size_t physics_prefix_end(std::string_view prompt) const {
    std::size_t i = 0;
    while (i < prompt.size() && text::is_space(prompt[i])) ++i;
    const auto& prefix = config_.physics_prefix;
    if (prompt.size() - i < prefix.size()) return 0;
    if (!text::iequals(prompt.substr(i, prefix.size()), prefix)) return 0;
    return i + prefix.size();
  }

  // Equivalent to a case-insensitive \btoken\b search.
  static bool contains_whole_word(std::string_view hay, std::string_view token) {
    if (token.empty() || token.size() > hay.size()) return false;
    const bool word_start = text::is_word_char(token.front());
    const bool word_end = text::is_word_char(token.back());
    for (std::size_t i = 0; i + token.size() <= hay.size(); ++i) {
      if (!text::iequals(hay.substr(i, token.size()), token)) continue;
      const bool before_word = i > 0 && text::is_word_char(hay[i - 1]);
      const std::size_t j = i + token.size();
      const bool after_word = j < hay.size() && text::is_word_char(hay[j]);
      if (before_word == word_start) continue;
      if (after_word == word_end) continue;
      return true;
    }
    return false;
  }

  RouterConfig config_;
};

}  // namespace jarvis
