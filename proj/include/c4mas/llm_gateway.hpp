#pragma once

// Completion interface over pluggable backends, with retry, in-flight limiting,
// token accounting and validated (re-asking) completion.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "c4mas/domain.hpp"
#include "c4mas/error.hpp"
#include "c4mas/prompt.hpp"
#include "c4mas/text.hpp"

namespace c4mas {

struct GenerationParams {
  double temperature = 0.0;
  std::uint32_t max_output_tokens = 4096;
  std::string model_id;
};

struct Completion {
  std::string text;
  TokenUsage usage;
  std::string backend_id;
  std::uint64_t latency_ms = 0;
  /// True when usage was computed with the character/4 heuristic.
  bool usage_estimated = false;
  /// Backend calls spent on this completion (>1 after validation retries).
  std::uint32_t attempts = 1;
};

/// Addresses a canned response. Generation keys name a task at a level
/// instance (plus the turn for ANALYZE); judge keys name a metric.
struct FixtureKey {
  std::optional<TaskKind> task;
  LevelInstance instance;
  std::optional<std::size_t> turn;
  std::optional<std::string> metric;

  static FixtureKey generation(TaskKind task, LevelInstance instance,
                               std::optional<std::size_t> turn = std::nullopt) {
    if ((task == TaskKind::Analyze) != turn.has_value())
      throw Error(ErrorCode::InvalidArtifact, "fixture turn must be given exactly for ANALYZE");
    return FixtureKey{task, std::move(instance), turn, std::nullopt};
  }
  static FixtureKey judge(std::string metric) {
    return FixtureKey{std::nullopt, {}, std::nullopt, std::move(metric)};
  }

  /// `L2/analyze_turn3`, `L3_api_app/structure_yaml`, `judge/security_red_team`.
  std::string stem() const {
    if (metric) return "judge/" + *metric;
    std::string s = instance.dir_name() + "/" + std::string(task_file_stem(*task));
    if (turn) s += "_turn" + std::to_string(*turn);
    return s;
  }

  std::string extension() const {
    if (metric) return ".json";
    switch (*task) {
      case TaskKind::Analyze:
      case TaskKind::Synthesize: return ".md";
      case TaskKind::StructureYaml: return ".yaml";
      case TaskKind::GeneratePlantuml: return ".puml";
    }
    return ".txt";
  }

  auto operator<=>(const FixtureKey&) const = default;
  bool operator==(const FixtureKey&) const = default;
};

struct LlmRequest {
  AssembledPrompt prompt;
  FixtureKey key;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual Completion complete(const LlmRequest& request, const GenerationParams& params) = 0;
  virtual std::string id() const = 0;
};

/// Usage for a call whose backend did not report it.
inline TokenUsage estimate_usage(const AssembledPrompt& prompt, std::string_view output) {
  return {text::estimate_tokens(prompt.system_text) + text::estimate_tokens(prompt.user_text) +
              (prompt.schema_guide ? text::estimate_tokens(*prompt.schema_guide) : 0),
          text::estimate_tokens(output)};
}

// ---------------------------------------------------------------------------
// Mock backend
// ---------------------------------------------------------------------------

/// Serves canned completions from `<fixtures_dir>/<stem><ext>`. The n-th call
/// (1-based) for a key first tries `<stem>.attempt<n><ext>`, which lets a
/// fixture set script bad-then-good sequences. Usage is always estimated.
class MockBackend : public Backend {
 public:
  explicit MockBackend(std::filesystem::path fixtures_dir,
                       std::chrono::milliseconds delay = std::chrono::milliseconds(0))
      : dir_(std::move(fixtures_dir)), delay_(delay) {}

  Completion complete(const LlmRequest& request, const GenerationParams&) override {
    auto start = std::chrono::steady_clock::now();
    std::size_t attempt;
    {
      std::lock_guard lock(mutex_);
      attempt = ++calls_[request.key];
    }
    if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
    const auto stem = request.key.stem();
    const auto ext = request.key.extension();
    std::filesystem::path chosen;
    for (const auto& candidate :
         {dir_ / (stem + ".attempt" + std::to_string(attempt) + ext), dir_ / (stem + ext)}) {
      if (std::filesystem::is_regular_file(candidate)) {
        chosen = candidate;
        break;
      }
    }
    if (chosen.empty())
      throw Error(ErrorCode::FixtureMissing, "no fixture for " + stem + ext, stem + ext);
    std::ifstream in(chosen, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    Completion c;
    c.text = ss.str();
    if (text::trim_view(c.text).empty())
      throw Error(ErrorCode::MalformedResponse, "fixture " + chosen.string() + " is empty");
    c.usage = estimate_usage(request.prompt, c.text);
    c.usage_estimated = true;
    c.backend_id = id();
    c.latency_ms = static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                              start)
            .count());
    return c;
  }

  std::string id() const override { return "mock"; }

  std::size_t calls_for(const FixtureKey& key) const {
    std::lock_guard lock(mutex_);
    auto it = calls_.find(key);
    return it == calls_.end() ? 0 : it->second;
  }

 private:
  std::filesystem::path dir_;
  std::chrono::milliseconds delay_;
  mutable std::mutex mutex_;
  std::map<FixtureKey, std::size_t> calls_;
};

/// Decorator that writes every successful completion to a fixture directory in
/// the layout MockBackend reads, so a live run can be replayed offline.
class FixtureRecorder : public Backend {
 public:
  FixtureRecorder(std::shared_ptr<Backend> inner, std::filesystem::path out_dir)
      : inner_(std::move(inner)), dir_(std::move(out_dir)) {}

  Completion complete(const LlmRequest& request, const GenerationParams& params) override {
    auto c = inner_->complete(request, params);
    std::lock_guard lock(mutex_);
    auto attempt = ++calls_[request.key];
    auto path = dir_ / (request.key.stem() +
                        (attempt > 1 ? ".attempt" + std::to_string(attempt) : std::string()) +
                        request.key.extension());
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << c.text;
    return c;
  }

  std::string id() const override { return inner_->id(); }

 private:
  std::shared_ptr<Backend> inner_;
  std::filesystem::path dir_;
  std::mutex mutex_;
  std::map<FixtureKey, std::size_t> calls_;
};

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

struct RetryPolicy {
  std::uint32_t max_attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};
};

/// Returns a diagnostic when the text is not acceptable.
using CompletionValidator = std::function<std::optional<std::string>(const std::string&)>;

class LlmGateway {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit LlmGateway(std::shared_ptr<Backend> backend, std::size_t max_in_flight = 4,
                      RetryPolicy retry = {})
      : backend_(std::move(backend)),
        retry_(retry),
        slots_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, max_in_flight))),
        sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {}

  void set_sleeper(Sleeper s) { sleeper_ = std::move(s); }

  /// One completion; transient failures (rate limits, unavailable backend) are
  /// retried with exponential backoff.
  Completion complete(const LlmRequest& request, const GenerationParams& params) {
    if (params.temperature < 0)
      throw Error(ErrorCode::ConfigError, "temperature must be non-negative");
    auto backoff = retry_.initial_backoff;
    for (std::uint32_t attempt = 1;; ++attempt) {
      try {
        slots_.acquire();
        struct Release {
          std::counting_semaphore<1024>& s;
          ~Release() { s.release(); }
        } release{slots_};
        auto c = backend_->complete(request, params);
        if (text::trim_view(c.text).empty())
          throw Error(ErrorCode::MalformedResponse, "backend returned empty text");
        record(c.usage);
        return c;
      } catch (const RateLimited& e) {
        if (attempt >= retry_.max_attempts) throw;
        sleeper_(e.retry_after().count() > 0 ? e.retry_after() : backoff);
      } catch (const BackendUnavailable& e) {
        if (!e.transient() || attempt >= retry_.max_attempts) throw;
        sleeper_(backoff);
      }
      backoff *= 2;
    }
  }

  /// Re-asks until `validator` accepts the text. The returned completion's
  /// usage sums every attempt; on exhaustion throws ValidationExhausted with
  /// one diagnostic per attempt.
  Completion complete_validated(const LlmRequest& request, const GenerationParams& params,
                                const CompletionValidator& validator,
                                std::uint32_t max_attempts = 3) {
    if (max_attempts < 1) throw Error(ErrorCode::ConfigError, "max_attempts must be >= 1");
    std::vector<std::string> diagnostics;
    TokenUsage spent;
    std::string last_text;
    for (std::uint32_t attempt = 1; attempt <= max_attempts; ++attempt) {
      auto c = complete(request, params);
      spent += c.usage;
      auto problem = validator(c.text);
      if (!problem) {
        c.usage = spent;
        c.attempts = attempt;
        return c;
      }
      diagnostics.push_back("attempt " + std::to_string(attempt) + ": " + *problem);
      last_text = std::move(c.text);
    }
    throw ValidationExhausted(std::move(last_text), std::move(diagnostics));
  }

  TokenUsage usage_total() const {
    return {input_tokens_.load(), output_tokens_.load()};
  }
  std::uint64_t call_count() const { return calls_.load(); }
  std::string backend_id() const { return backend_->id(); }

 private:
  void record(const TokenUsage& u) {
    input_tokens_ += u.input_tokens;
    output_tokens_ += u.output_tokens;
    ++calls_;
  }

  std::shared_ptr<Backend> backend_;
  RetryPolicy retry_;
  std::counting_semaphore<1024> slots_;
  Sleeper sleeper_;
  std::atomic<std::uint64_t> input_tokens_{0};
  std::atomic<std::uint64_t> output_tokens_{0};
  std::atomic<std::uint64_t> calls_{0};
};

}  // namespace c4mas
