#pragma once

// YAML run configuration and backend construction.
//
//   generation: {backend: mock|http, model_id, base_url, api_key_env,
//                fixtures_dir, mock_delay_ms, max_in_flight, max_output_tokens}
//   mode: single_agent|collaborative
//   rounds: 3
//   parallel_l3: false
//   l3_skip_datastores: false
//   validation_attempts: 3
//   judge: {backend, model_id, base_url, api_key_env, fixtures_dir, token_budget}
//   compilation: {mode: internal|official, runner_path}
//   weights: {severity: {low: 1, medium: 3, high: 5, critical: 8}}
//   templates_dir: prompts/
//   fixtures_dir: fixtures/
//
// Relative paths are resolved against the directory holding the config file.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>

#include <yaml-cpp/yaml.h>

#include "c4mas/c4_views.hpp"
#include "c4mas/error.hpp"
#include "c4mas/eval_judge.hpp"
#include "c4mas/http_backend.hpp"
#include "c4mas/llm_gateway.hpp"
#include "c4mas/orchestrator.hpp"

namespace c4mas {

struct BackendConfig {
  std::string backend = "mock";
  std::string model_id = "mock";
  std::string base_url;
  std::string api_key_env;
  std::filesystem::path fixtures_dir;
  std::chrono::milliseconds mock_delay{0};
  std::size_t max_in_flight = 4;
};

struct AppConfig {
  BackendConfig generation;
  /// Set when the config has a `judge` section.
  std::optional<BackendConfig> judge;
  std::uint64_t judge_token_budget = 100000;
  RunConfig run;
  CompileMode compile_mode = CompileMode::InternalValidator;
  std::string runner_path;
  SeverityWeights severity_weights = default_severity_weights();
  std::optional<std::filesystem::path> templates_dir;
  std::filesystem::path source_path;
};

namespace detail {

inline const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "generation", "mode",        "rounds",  "parallel_l3",   "l3_skip_datastores",
      "validation_attempts", "judge", "compilation", "weights", "templates_dir",
      "fixtures_dir"};
  return keys;
}

template <typename T>
T config_value(const YAML::Node& node, const std::string& key, T fallback) {
  if (!node || !node[key]) return fallback;
  try {
    return node[key].as<T>();
  } catch (const YAML::Exception&) {
    throw Error(ErrorCode::ConfigError, "invalid value for '" + key + "'", key);
  }
}

inline std::filesystem::path resolve_path(const std::filesystem::path& base,
                                          const std::string& raw) {
  std::filesystem::path p(raw);
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

inline BackendConfig read_backend(const YAML::Node& node, const std::filesystem::path& base,
                                  const std::filesystem::path& default_fixtures,
                                  const BackendConfig& fallback) {
  BackendConfig b = fallback;
  if (!node) return b;
  if (!node.IsMap()) throw Error(ErrorCode::ConfigError, "backend section must be a mapping");
  b.backend = config_value<std::string>(node, "backend", b.backend);
  if (b.backend == "openai") b.backend = "http";
  if (b.backend != "mock" && b.backend != "http")
    throw Error(ErrorCode::ConfigError, "unknown backend '" + b.backend + "'", "backend");
  b.model_id = config_value<std::string>(node, "model_id", b.model_id);
  b.base_url = config_value<std::string>(node, "base_url", b.base_url);
  b.api_key_env = config_value<std::string>(node, "api_key_env", b.api_key_env);
  b.mock_delay = std::chrono::milliseconds(
      config_value<long long>(node, "mock_delay_ms", b.mock_delay.count()));
  b.max_in_flight = config_value<std::size_t>(node, "max_in_flight", b.max_in_flight);
  if (node["fixtures_dir"])
    b.fixtures_dir = resolve_path(base, config_value<std::string>(node, "fixtures_dir", ""));
  else if (b.fixtures_dir.empty())
    b.fixtures_dir = default_fixtures;
  if (b.backend == "http" && b.base_url.empty())
    throw Error(ErrorCode::ConfigError, "http backend needs base_url", "base_url");
  return b;
}

}  // namespace detail

inline AppConfig parse_config(std::string_view raw, const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(raw));
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("config is not valid YAML: ") + e.what());
  }
  if (!root.IsMap()) throw Error(ErrorCode::ConfigError, "config must be a mapping");
  for (const auto& kv : root) {
    auto key = kv.first.as<std::string>();
    if (!detail::known_config_keys().count(key))
      throw Error(ErrorCode::ConfigError, "unknown config key '" + key + "'", key);
  }

  AppConfig cfg;
  std::filesystem::path fixtures;
  if (root["fixtures_dir"])
    fixtures = detail::resolve_path(base_dir, detail::config_value<std::string>(root, "fixtures_dir", ""));
  cfg.generation = detail::read_backend(root["generation"], base_dir, fixtures, BackendConfig{});

  auto mode = detail::config_value<std::string>(root, "mode", "collaborative");
  if (mode == "collaborative") cfg.run.mode = RunMode::Collaborative;
  else if (mode == "single_agent") cfg.run.mode = RunMode::SingleAgent;
  else throw Error(ErrorCode::ConfigError, "mode must be single_agent or collaborative", "mode");
  auto rounds = detail::config_value<long long>(root, "rounds", 3);
  if (rounds < 1) throw Error(ErrorCode::ConfigError, "rounds must be >= 1", "rounds");
  cfg.run.rounds = static_cast<std::uint32_t>(rounds);
  cfg.run.parallel_l3 = detail::config_value<bool>(root, "parallel_l3", false);
  cfg.run.l3_skip_datastores = detail::config_value<bool>(root, "l3_skip_datastores", false);
  auto attempts = detail::config_value<long long>(root, "validation_attempts", 3);
  if (attempts < 1)
    throw Error(ErrorCode::ConfigError, "validation_attempts must be >= 1", "validation_attempts");
  cfg.run.validation_attempts = static_cast<std::uint32_t>(attempts);
  cfg.run.generation.model_id = cfg.generation.model_id;
  if (root["generation"])
    cfg.run.generation.max_output_tokens = detail::config_value<std::uint32_t>(
        root["generation"], "max_output_tokens", cfg.run.generation.max_output_tokens);

  if (auto judge = root["judge"]) {
    BackendConfig fallback = cfg.generation;
    fallback.model_id = cfg.generation.model_id;
    cfg.judge = detail::read_backend(judge, base_dir, cfg.generation.fixtures_dir, fallback);
    cfg.judge_token_budget =
        detail::config_value<std::uint64_t>(judge, "token_budget", cfg.judge_token_budget);
  }

  if (auto comp = root["compilation"]) {
    auto m = detail::config_value<std::string>(comp, "mode", "internal");
    if (m == "internal") cfg.compile_mode = CompileMode::InternalValidator;
    else if (m == "official") cfg.compile_mode = CompileMode::OfficialRunner;
    else throw Error(ErrorCode::ConfigError, "compilation.mode must be internal or official", "compilation.mode");
    cfg.runner_path = detail::config_value<std::string>(comp, "runner_path", "plantuml");
  }

  if (root["weights"] && root["weights"]["severity"]) {
    auto sev = root["weights"]["severity"];
    if (!sev.IsMap()) throw Error(ErrorCode::ConfigError, "weights.severity must be a mapping");
    for (const auto& kv : sev) {
      auto name = kv.first.as<std::string>();
      auto s = parse_severity(name);
      if (!s) throw Error(ErrorCode::ConfigError, "unknown severity '" + name + "'", name);
      double w = 0;
      try {
        w = kv.second.as<double>();
      } catch (const YAML::Exception&) {
        throw Error(ErrorCode::ConfigError, "severity weight must be a number", name);
      }
      if (w < 0) throw Error(ErrorCode::ConfigError, "severity weight must be >= 0", name);
      cfg.severity_weights[*s] = w;
    }
  }

  if (root["templates_dir"])
    cfg.templates_dir =
        detail::resolve_path(base_dir, detail::config_value<std::string>(root, "templates_dir", ""));
  return cfg;
}

inline AppConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path))
    throw Error(ErrorCode::ConfigError, "config file not found: " + path.string(), path.string());
  auto cfg = parse_config(detail::read_text_file(path), path.parent_path());
  cfg.source_path = path;
  return cfg;
}

inline PromptLibrary load_prompts(const AppConfig& cfg) {
  return cfg.templates_dir ? PromptLibrary::load(*cfg.templates_dir) : PromptLibrary::defaults();
}

/// Builds the backend a section describes; API keys come from the environment
/// variable the section names.
inline std::shared_ptr<Backend> make_backend(const BackendConfig& b) {
  if (b.backend == "mock") {
    if (b.fixtures_dir.empty())
      throw Error(ErrorCode::ConfigError, "mock backend needs fixtures_dir", "fixtures_dir");
    if (!std::filesystem::is_directory(b.fixtures_dir))
      throw Error(ErrorCode::ConfigError, "fixtures_dir not found: " + b.fixtures_dir.string(),
                  "fixtures_dir");
    return std::make_shared<MockBackend>(b.fixtures_dir, b.mock_delay);
  }
  HttpBackendOptions opts;
  opts.base_url = b.base_url;
  if (!b.api_key_env.empty()) {
    const char* key = std::getenv(b.api_key_env.c_str());
    if (!key || !*key)
      throw Error(ErrorCode::ConfigError, "environment variable " + b.api_key_env + " is not set",
                  b.api_key_env);
    opts.api_key = key;
  }
  return std::make_shared<HttpBackend>(std::move(opts));
}

}  // namespace c4mas
