#include <gtest/gtest.h>

#include <cstdlib>

#include "c4mas/config.hpp"
#include "test_support.hpp"

namespace c4mas {
namespace {

using testing::error_code_of;

TEST(ConfigTest, BundledLibraryConfig) {
  auto cfg = load_config(testing::library_dir() / "config.yaml");
  EXPECT_EQ(cfg.generation.backend, "mock");
  EXPECT_EQ(cfg.generation.model_id, "mock-library");
  EXPECT_EQ(cfg.generation.fixtures_dir, (testing::library_dir() / "fixtures").lexically_normal());
  EXPECT_EQ(cfg.run.mode, RunMode::Collaborative);
  EXPECT_EQ(cfg.run.rounds, 3u);
  EXPECT_EQ(cfg.run.configuration_label(), "Collab3");
  ASSERT_TRUE(cfg.judge);
  EXPECT_EQ(cfg.judge->model_id, "mock-judge");
  EXPECT_EQ(cfg.compile_mode, CompileMode::InternalValidator);
  EXPECT_EQ(cfg.severity_weights, default_severity_weights());
}

TEST(ConfigTest, BundledVariants) {
  EXPECT_EQ(load_config(testing::library_dir() / "config_collab1.yaml").run.configuration_label(),
            "Collab1");
  EXPECT_EQ(load_config(testing::library_dir() / "config_single_agent.yaml").run.configuration_label(),
            "SingleAgent");
}

TEST(ConfigTest, Defaults) {
  auto cfg = parse_config("generation: {backend: mock}\n", "/base");
  EXPECT_EQ(cfg.run.rounds, 3u);
  EXPECT_FALSE(cfg.run.parallel_l3);
  EXPECT_FALSE(cfg.judge);
  EXPECT_EQ(cfg.run.validation_attempts, 3u);
}

TEST(ConfigTest, RelativePathsResolveAgainstConfigDir) {
  auto cfg = parse_config("generation: {fixtures_dir: fx}\ntemplates_dir: ../tpl\n", "/base/cfg");
  EXPECT_EQ(cfg.generation.fixtures_dir, std::filesystem::path("/base/cfg/fx"));
  EXPECT_EQ(cfg.templates_dir, std::filesystem::path("/base/tpl"));
}

TEST(ConfigTest, JudgeInheritsGenerationBackend) {
  auto cfg = parse_config(
      "generation: {backend: mock, model_id: gen, fixtures_dir: fx}\njudge: {model_id: j, token_budget: 500}\n",
      "/b");
  ASSERT_TRUE(cfg.judge);
  EXPECT_EQ(cfg.judge->backend, "mock");
  EXPECT_EQ(cfg.judge->model_id, "j");
  EXPECT_EQ(cfg.judge->fixtures_dir, std::filesystem::path("/b/fx"));
  EXPECT_EQ(cfg.judge_token_budget, 500u);
}

TEST(ConfigTest, SeverityWeightsOverride) {
  auto cfg = parse_config("weights:\n  severity: {critical: 10}\n", "/b");
  EXPECT_EQ(cfg.severity_weights[Severity::Critical], 10);
  EXPECT_EQ(cfg.severity_weights[Severity::High], 5);
}

TEST(ConfigTest, OfficialCompilation) {
  auto cfg = parse_config("compilation: {mode: official, runner_path: /opt/plantuml}\n", "/b");
  EXPECT_EQ(cfg.compile_mode, CompileMode::OfficialRunner);
  EXPECT_EQ(cfg.runner_path, "/opt/plantuml");
}

TEST(ConfigTest, Errors) {
  for (const char* raw :
       {"[1, 2]", "bogus_key: 1\n", "mode: swarm\n", "rounds: 0\n", "generation: {backend: carrier-pigeon}\n",
        "generation: {backend: http}\n", "compilation: {mode: psychic}\n",
        "weights: {severity: {apocalyptic: 3}}\n", "weights: {severity: {low: -1}}\n",
        "rounds: three\n", "validation_attempts: 0\n"})
    EXPECT_EQ(error_code_of([&] { parse_config(raw, "/b"); }), ErrorCode::ConfigError) << raw;
  EXPECT_EQ(error_code_of([] { load_config("/nonexistent/config.yaml"); }), ErrorCode::ConfigError);
}

TEST(ConfigTest, OpenAiIsAnAliasForHttp) {
  auto cfg = parse_config("generation: {backend: openai, base_url: 'http://localhost:1/v1'}\n", "/b");
  EXPECT_EQ(cfg.generation.backend, "http");
}

TEST(BackendFactoryTest, MockNeedsExistingFixtures) {
  BackendConfig b;
  b.fixtures_dir = "/nonexistent/fixtures";
  EXPECT_EQ(error_code_of([&] { make_backend(b); }), ErrorCode::ConfigError);
  b.fixtures_dir = testing::library_fixtures();
  EXPECT_EQ(make_backend(b)->id(), "mock");
}

TEST(BackendFactoryTest, HttpReadsKeyFromNamedVariable) {
  BackendConfig b;
  b.backend = "http";
  b.base_url = "http://127.0.0.1:9/v1";
  b.api_key_env = "C4MAS_TEST_UNSET_KEY";
  ::unsetenv("C4MAS_TEST_UNSET_KEY");
  EXPECT_EQ(error_code_of([&] { make_backend(b); }), ErrorCode::ConfigError);
  ::setenv("C4MAS_TEST_UNSET_KEY", "sk-x", 1);
  EXPECT_EQ(make_backend(b)->id(), "http:http://127.0.0.1:9");
  ::unsetenv("C4MAS_TEST_UNSET_KEY");
}

}  // namespace
}  // namespace c4mas
