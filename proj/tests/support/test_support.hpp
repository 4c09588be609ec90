#pragma once

// Helpers shared by the unit tests and the acceptance runner.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "c4mas/c4_views.hpp"
#include "c4mas/domain.hpp"
#include "c4mas/llm_gateway.hpp"

namespace c4mas::testing {

/// Runs `fn` and returns the ErrorCode it threw; fails the caller's
/// expectation through std::nullopt when nothing was thrown.
template <typename Fn>
std::optional<ErrorCode> error_code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline std::filesystem::path data_dir() { return C4MAS_DATA_DIR; }
inline std::filesystem::path library_dir() { return data_dir() / "library"; }
inline std::filesystem::path library_fixtures() { return library_dir() / "fixtures"; }

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, std::string_view content) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << content;
}

inline SystemBrief library_brief() {
  return validate_brief(read_file(library_dir() / "brief.yaml"), BriefFormat::Yaml);
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    auto pattern = (std::filesystem::temp_directory_path() / "c4mas-test-XXXXXX").string();
    std::vector<char> buf(pattern.begin(), pattern.end());
    buf.push_back('\0');
    if (!mkdtemp(buf.data())) throw std::runtime_error("mkdtemp failed");
    path_ = buf.data();
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& child) const { return path_ / child; }

 private:
  std::filesystem::path path_;
};

/// Copies the bundled fixture set so a test can tamper with it.
inline std::filesystem::path copy_library_fixtures(const TempDir& tmp) {
  auto dst = tmp / "fixtures";
  std::filesystem::copy(library_fixtures(), dst, std::filesystem::copy_options::recursive);
  return dst;
}

/// Config pointing at an arbitrary fixture directory.
inline std::filesystem::path write_config(const TempDir& tmp, const std::filesystem::path& fixtures,
                                          const std::string& extra = "",
                                          const std::string& name = "config.yaml") {
  auto path = tmp / name;
  write_file(path, "generation:\n  backend: mock\n  model_id: mock-library\n  fixtures_dir: " +
                       fixtures.string() + "\n" + extra);
  return path;
}

/// Backend answering through a callback; records every request.
class ScriptedBackend : public Backend {
 public:
  using Responder = std::function<std::string(const LlmRequest&, std::size_t call_index)>;

  explicit ScriptedBackend(Responder responder) : responder_(std::move(responder)) {}

  Completion complete(const LlmRequest& request, const GenerationParams&) override {
    std::size_t index;
    {
      std::lock_guard lock(mutex_);
      index = requests_.size();
      requests_.push_back(request);
    }
    Completion c;
    c.text = responder_(request, index);
    c.usage = estimate_usage(request.prompt, c.text);
    c.usage_estimated = true;
    c.backend_id = id();
    return c;
  }

  std::string id() const override { return "scripted"; }

  std::vector<LlmRequest> requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
  }

 private:
  Responder responder_;
  mutable std::mutex mutex_;
  std::vector<LlmRequest> requests_;
};

/// Random valid view: snake_case aliases, level-appropriate kinds, no
/// self-loops, at most `max_elements` elements. Names carry commas,
/// parentheses and apostrophes but never double quotes, which C4-PlantUML
/// string literals cannot hold.
inline ViewModel random_view(std::mt19937& rng, std::size_t max_elements = 12) {
  std::uniform_int_distribution<int> level_dist(1, 3);
  ViewModel v;
  v.level = static_cast<Level>(level_dist(rng));
  std::vector<ElementKind> kinds;
  switch (v.level) {
    case Level::L1_Context:
      kinds = {ElementKind::Person, ElementKind::SoftwareSystem, ElementKind::ExternalSystem};
      break;
    case Level::L2_Container:
      kinds = {ElementKind::Person, ElementKind::SoftwareSystem, ElementKind::ExternalSystem,
               ElementKind::Container, ElementKind::DataStore};
      break;
    case Level::L3_Component:
      kinds = {ElementKind::Person, ElementKind::ExternalSystem, ElementKind::Container,
               ElementKind::DataStore, ElementKind::Component};
      break;
  }
  std::uniform_int_distribution<std::size_t> count_dist(1, max_elements);
  std::uniform_int_distribution<std::size_t> kind_dist(0, kinds.size() - 1);
  std::bernoulli_distribution coin(0.5);
  static const char* words[] = {"api", "web", "store", "mail", "auth", "queue", "cache",
                                "report", "user", "ledger", "search", "gateway"};
  std::uniform_int_distribution<std::size_t> word_dist(0, std::size(words) - 1);
  std::size_t n = count_dist(rng);
  for (std::size_t i = 0; i < n; ++i) {
    Element e;
    e.alias = std::string(words[word_dist(rng)]) + "_" + std::to_string(i);
    e.kind = kinds[kind_dist(rng)];
    e.name = "Element " + std::to_string(i) + (coin(rng) ? " (main, 'core')" : "");
    e.external = e.kind == ElementKind::ExternalSystem;
    if (e.kind == ElementKind::Container || e.kind == ElementKind::DataStore ||
        e.kind == ElementKind::Component) {
      if (coin(rng)) e.technology = "Tech " + std::to_string(i);
    }
    if (coin(rng)) e.description = "Does thing " + std::to_string(i);
    v.elements.push_back(std::move(e));
  }
  if (n >= 2) {
    std::uniform_int_distribution<std::size_t> idx(0, n - 1);
    std::uniform_int_distribution<std::size_t> rel_count(0, 2 * n);
    std::size_t rels = rel_count(rng);
    for (std::size_t i = 0; i < rels; ++i) {
      auto a = idx(rng), b = idx(rng);
      if (a == b) continue;
      Relationship r{v.elements[a].alias, v.elements[b].alias, "Uses " + std::to_string(i),
                     std::nullopt};
      if (coin(rng)) r.technology = "HTTPS";
      v.relationships.push_back(std::move(r));
    }
  }
  return v;
}

/// Minimal evaluation.json document carrying only what `report` reads.
/// Null entries of `rollup` stay null.
inline nlohmann::json synthetic_evaluation(const std::string& model_id,
                                           const std::string& configuration,
                                           nlohmann::json rollup, std::uint64_t input_tokens,
                                           std::uint64_t output_tokens) {
  return {{"schema_version", "1.0"},
          {"run_id", model_id + "-" + configuration},
          {"model_id", model_id},
          {"configuration", configuration},
          {"brief_title", "Synthetic"},
          {"usage",
           {{"input_tokens", input_tokens},
            {"output_tokens", output_tokens},
            {"total_tokens", input_tokens + output_tokens}}},
          {"rollup", std::move(rollup)}};
}

}  // namespace c4mas::testing
