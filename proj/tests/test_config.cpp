#include <gtest/gtest.h>

#include <map>

#include "jarvis/config.hpp"
#include "support.hpp"

using namespace jarvis;

namespace {

EnvLookup env_of(std::map<std::string, std::string> vars) {
  return [vars = std::move(vars)](const char* name) -> std::optional<std::string> {
    auto it = vars.find(name);
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

}  // namespace

TEST(Config, Defaults) {
  auto c = load_config(std::nullopt, env_of({}));
  EXPECT_EQ(c.llm_endpoint, "mock");
  EXPECT_EQ(c.context_budget, 4096u);
  EXPECT_EQ(c.k, 5u);
  EXPECT_EQ(c.embed_dim, 384u);
  EXPECT_EQ(c.max_tokens, 512u);
  EXPECT_EQ(c.overlap_tokens, 64u);
  EXPECT_EQ(c.physics_prefix, "phy:");
  EXPECT_EQ(c.mode_tokens, (std::vector<std::string>{"I", "me", "my", "mine", "we", "our"}));
}

TEST(Config, FileThenEnvironment) {
  testing_support::TempDir dir;
  {
    std::ofstream out(dir / "c.json");
    out << R"({"k": 3, "port": 9000, "data_dir": "from-file", "embed_dim": 16})";
  }
  auto c = load_config(dir / "c.json", env_of({{"JARVIS_K", "7"},
                                               {"EMBED_ENDPOINT", "http://embed:1"},
                                               {"EMBED_MODEL", "bge-small"},
                                               {"EMBED_DIM", "32"},
                                               {"JARVIS_MODE_TOKENS", " I , my,,ours "}}));
  EXPECT_EQ(c.k, 7u);
  EXPECT_EQ(c.port, 9000);
  EXPECT_EQ(c.data_dir, "from-file");
  EXPECT_EQ(c.embed_endpoint, "http://embed:1");
  EXPECT_EQ(c.embed_model, "bge-small");
  EXPECT_EQ(c.embed_dim, 32u);
  EXPECT_EQ(c.mode_tokens, (std::vector<std::string>{"I", "my", "ours"}));

  auto d = load_config(std::nullopt, env_of({{"EMBED_ENDPOINT", "a"}, {"JARVIS_EMBED_ENDPOINT", "b"}}));
  EXPECT_EQ(d.embed_endpoint, "b");
}

TEST(Config, Validation) {
  EXPECT_THROW(load_config(std::nullopt, env_of({{"JARVIS_K", "0"}})), std::invalid_argument);
  EXPECT_THROW(load_config(std::nullopt, env_of({{"JARVIS_CONTEXT_BUDGET", "0"}})), std::invalid_argument);
  EXPECT_THROW(load_config(std::nullopt, env_of({{"JARVIS_PORT", "eighty"}})), std::invalid_argument);
  EXPECT_THROW(load_config(std::filesystem::path("/nonexistent/config.json"), env_of({})), std::runtime_error);
}

TEST(Config, ShippedExampleLoads) {
  const auto c = load_config(std::filesystem::path(JARVIS_DATA_DIR).parent_path() / "config" / "jarvis.example.json", env_of({}));
  EXPECT_EQ(c.llm_endpoint, "mock");
  EXPECT_EQ(c.router_config().physics_prefix, "phy:");
}
