#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "jarvis/text.hpp"

namespace jarvis {

inline constexpr std::size_t kDefaultEmbeddingDim = 384;

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

// Raised by embedding providers. `status` is the HTTP status for remote
// failures (0 for transport errors).
class EmbedError : public std::runtime_error {
 public:
  EmbedError(const std::string& what, bool retryable, int status = 0)
      : std::runtime_error(what), retryable_(retryable), status_(status) {}

  bool retryable() const { return retryable_; }
  int status() const { return status_; }

 private:
  bool retryable_;
  int status_;
};

inline EmbeddingVector unit_basis(std::size_t dim) {
  EmbeddingVector v;
  v.values.assign(dim, 0.0);
  if (dim > 0) v.values[0] = 1.0;
  return v;
}

inline double l2_norm(const EmbeddingVector& v) {
  double s = 0.0;
  for (double x : v.values) s += x * x;
  return std::sqrt(s);
}

// Unit-length copy of v; the all-zero (or non-finite) vector maps to e1.
inline EmbeddingVector normalize(const EmbeddingVector& v) {
  const double norm = l2_norm(v);
  if (!(norm > 0.0) || !std::isfinite(norm)) return unit_basis(v.dim());
  EmbeddingVector out;
  out.values.reserve(v.dim());
  for (double x : v.values) out.values.push_back(x / norm);
  return out;
}

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual EmbeddingVector embed(std::string_view text) const = 0;
  virtual std::size_t dim() const = 0;
  // Cheap reachability probe for health reporting.
  virtual bool reachable() const { return true; }
};

// Seeded hashed bag-of-words. Each whitespace token is lower-cased, stripped
// of surrounding ASCII punctuation and hashed (64-bit FNV-1a over the seed
// bytes followed by the token) into one of `dim` buckets. Bucket counts are
// L2-normalized, so texts that share tokens share mass and score higher.
class HashEmbedder final : public Embedder {
 public:
  explicit HashEmbedder(std::size_t dim = kDefaultEmbeddingDim,
                        std::uint64_t seed = 0)
      : dim_(dim), seed_(seed) {
    if (dim_ == 0) throw std::invalid_argument("embedding dim must be > 0");
  }

  EmbeddingVector embed(std::string_view input) const override {
    EmbeddingVector v;
    v.values.assign(dim_, 0.0);
    for (auto raw : text::split_whitespace(input)) {
      const std::string token = canonical_token(raw);
      if (token.empty()) continue;
      v.values[bucket(token)] += 1.0;
    }
    return normalize(v);
  }

  std::size_t dim() const override { return dim_; }
  std::uint64_t seed() const { return seed_; }

  std::size_t bucket(std::string_view token) const {
    std::uint64_t h = 14695981039346656037ULL;
    auto mix = [&h](unsigned char b) {
      h ^= b;
      h *= 1099511628211ULL;
    };
    for (int i = 0; i < 8; ++i) mix(static_cast<unsigned char>(seed_ >> (8 * i)));
    for (char c : token) mix(static_cast<unsigned char>(c));
    return static_cast<std::size_t>(h % dim_);
  }

  static std::string canonical_token(std::string_view raw) {
    auto is_punct = [](char c) {
      auto u = static_cast<unsigned char>(c);
      return u < 0x80 && !text::is_alnum(c);
    };
    std::size_t b = 0;
    std::size_t e = raw.size();
    while (b < e && is_punct(raw[b])) ++b;
    while (e > b && is_punct(raw[e - 1])) --e;
    return text::lower(raw.substr(b, e - b));
  }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

}  // namespace jarvis
