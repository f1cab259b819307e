#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace testing_support {

inline std::filesystem::path data_path(const std::string& rel) { return std::filesystem::path(JARVIS_DATA_DIR) / rel; }

inline std::filesystem::path schema_path(const std::string& rel) {
  return std::filesystem::path(JARVIS_SCHEMA_DIR) / rel;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    std::mt19937_64 gen(rd());
    for (;;) {
      path_ = std::filesystem::temp_directory_path() / ("jarvis-test-" + std::to_string(gen()));
      if (std::filesystem::create_directory(path_)) break;
    }
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

// Seeded generator helpers for property tests.
struct Gen {
  std::mt19937_64 rng;
  explicit Gen(std::uint64_t seed) : rng(seed) {}

  std::size_t size(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  }
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng); }
  bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(rng); }

  template <typename T>
  const T& pick(const std::vector<T>& xs) {
    return xs[size(0, xs.size() - 1)];
  }

  std::string word(std::size_t lo = 1, std::size_t hi = 8) {
    static const std::string letters = "abcdefghijklmnopqrstuvwxyz";
    std::string w;
    const auto n = size(lo, hi);
    for (std::size_t i = 0; i < n; ++i) w.push_back(letters[size(0, letters.size() - 1)]);
    return w;
  }

  std::vector<double> gaussian_vector(std::size_t dim) {
    std::vector<double> v(dim);
    for (auto& x : v) x = normal();
    return v;
  }
};

// Enough of JSON Schema for the shipped response schema: type, enum,
// required, properties, additionalProperties:false, items, minimum, maximum.
inline void validate_schema(const nlohmann::json& schema, const nlohmann::json& value, const std::string& where,
                            std::vector<std::string>& errors) {
  if (schema.contains("type")) {
    const auto t = schema["type"].get<std::string>();
    bool ok = (t == "object" && value.is_object()) || (t == "array" && value.is_array()) ||
              (t == "string" && value.is_string()) || (t == "boolean" && value.is_boolean()) ||
              (t == "integer" && value.is_number_integer()) || (t == "number" && value.is_number()) ||
              (t == "null" && value.is_null());
    if (!ok) {
      errors.push_back(where + ": expected " + t);
      return;
    }
  }
  if (schema.contains("enum")) {
    bool found = false;
    for (const auto& e : schema["enum"]) found = found || e == value;
    if (!found) errors.push_back(where + ": value not in enum");
  }
  if (value.is_number()) {
    if (schema.contains("minimum") && value.get<double>() < schema["minimum"].get<double>()) {
      errors.push_back(where + ": below minimum");
    }
    if (schema.contains("maximum") && value.get<double>() > schema["maximum"].get<double>()) {
      errors.push_back(where + ": above maximum");
    }
  }
  if (value.is_object()) {
    for (const auto& r : schema.value("required", nlohmann::json::array())) {
      if (!value.contains(r.get<std::string>())) errors.push_back(where + ": missing " + r.get<std::string>());
    }
    const auto props = schema.value("properties", nlohmann::json::object());
    for (const auto& [k, v] : value.items()) {
      if (props.contains(k)) {
        validate_schema(props[k], v, where + "." + k, errors);
      } else if (schema.contains("additionalProperties") && schema["additionalProperties"] == false) {
        errors.push_back(where + ": unexpected property " + k);
      }
    }
  }
  if (value.is_array() && schema.contains("items")) {
    for (std::size_t i = 0; i < value.size(); ++i) {
      validate_schema(schema["items"], value[i], where + "[" + std::to_string(i) + "]", errors);
    }
  }
}

inline std::vector<std::string> validate_schema(const nlohmann::json& schema, const nlohmann::json& value) {
  std::vector<std::string> errors;
  validate_schema(schema, value, "$", errors);
  return errors;
}

}  // namespace testing_support
