#pragma once

// Generation workflow: collaborative round-robin sessions, the single-agent
// baseline, the per-instance processing chain and the top-down L1 -> L2 -> L3
// traversal driven by the component queue.

#include <chrono>
#include <future>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "c4mas/c4_views.hpp"
#include "c4mas/domain.hpp"
#include "c4mas/llm_gateway.hpp"
#include "c4mas/prompt.hpp"

namespace c4mas {

enum class RunMode { SingleAgent, Collaborative };

struct RunConfig {
  RunMode mode = RunMode::Collaborative;
  std::uint32_t rounds = 3;
  GenerationParams generation;
  bool parallel_l3 = false;
  /// Keep pure data stores out of L3 decomposition.
  bool l3_skip_datastores = false;
  std::uint32_t validation_attempts = 3;
  ViewParseOptions view_options;

  /// `SingleAgent`, `Collab1`, `Collab3`, ...
  std::string configuration_label() const {
    if (mode == RunMode::SingleAgent) return "SingleAgent";
    return "Collab" + std::to_string(rounds);
  }
};

struct InstanceStatus {
  bool complete = false;
  std::string reason;  // empty when complete

  static InstanceStatus ok() { return {true, {}}; }
  static InstanceStatus partial(std::string why) { return {false, std::move(why)}; }
};

struct RunResult {
  PipelineState final_state;
  /// In execution order (L1, L2, then the queue).
  std::vector<std::pair<LevelInstance, InstanceStatus>> per_instance_status;
  TokenUsage usage_total;
  std::uint64_t wall_time_ms = 0;
  /// Set when L1 or L2 failed and descent stopped.
  std::optional<Level> halted_at;
  std::vector<std::string> warnings;

  bool all_complete() const {
    if (halted_at) return false;
    for (const auto& [inst, st] : per_instance_status)
      if (!st.complete) return false;
    return true;
  }
  const InstanceStatus* status_of(const LevelInstance& inst) const {
    for (const auto& [i, st] : per_instance_status)
      if (i == inst) return &st;
    return nullptr;
  }
};

/// A state plus the reason the stage stopped early, if it did. Artifacts
/// produced before the failure are kept.
struct StageResult {
  PipelineState state;
  std::optional<std::string> failure;
};

class Orchestrator {
 public:
  Orchestrator(LlmGateway& gateway, const PromptLibrary& prompts, RunConfig config)
      : gateway_(gateway), prompts_(prompts), config_(std::move(config)) {}

  const RunConfig& config() const { return config_; }

  /// N rounds over the level's team; turn k is spoken by team[k mod K]. The
  /// finished message list becomes the instance's TRANSCRIPT.
  StageResult run_collaborative_session(const PipelineState& state,
                                        const LevelInstance& instance) const {
    return run_session(state, instance, team_for_level(instance.level, prompts_),
                       config_.rounds);
  }

  /// Session over an explicit team (any size K).
  StageResult run_collaborative_session(const PipelineState& state, const LevelInstance& instance,
                                        const std::vector<Persona>& team) const {
    return run_session(state, instance, team, config_.rounds);
  }

  /// Same as a session with one generalist speaking once.
  StageResult run_single_agent_analysis(const PipelineState& state,
                                        const LevelInstance& instance) const {
    return run_session(state, instance,
                       {prompts_.persona(processing_persona_id(TaskKind::Analyze))}, 1);
  }

  /// SYNTHESIZE -> STRUCTURE_YAML -> GENERATE_PLANTUML, each consuming the
  /// previous step's artifact.
  StageResult run_processing_chain(const PipelineState& state,
                                   const LevelInstance& instance) const {
    StageResult out{state, std::nullopt};
    const Level level = instance.level;
    const auto view_options = config_.view_options;
    for (TaskKind task :
         {TaskKind::Synthesize, TaskKind::StructureYaml, TaskKind::GeneratePlantuml}) {
      CompletionValidator validator;
      switch (task) {
        case TaskKind::StructureYaml:
          validator = [level, view_options](const std::string& t) -> std::optional<std::string> {
            try {
              parse_view_yaml(t, level, view_options);
              return std::nullopt;
            } catch (const Error& e) {
              return std::string(e.what());
            }
          };
          break;
        case TaskKind::GeneratePlantuml:
          validator = [](const std::string& t) -> std::optional<std::string> {
            auto parsed = analyze_plantuml(text::strip_code_fence(t));
            if (parsed.ok()) return std::nullopt;
            return parsed.errors.front().str();
          };
          break;
        default:
          validator = [](const std::string&) -> std::optional<std::string> { return std::nullopt; };
      }
      try {
        const auto& persona = prompts_.persona(processing_persona_id(task));
        auto ctx = build_context(out.state, instance, task);
        LlmRequest req{assemble_prompt(prompts_, persona, task, ctx),
                       FixtureKey::generation(task, instance)};
        auto completion = gateway_.complete_validated(req, config_.generation, validator,
                                                      config_.validation_attempts);
        Artifact a;
        a.kind = output_kind(task);
        a.level = instance.level;
        a.focus_container = instance.focus_container;
        a.content = text::strip_code_fence(completion.text);
        a.token_usage = completion.usage;
        out.state = append_artifact(out.state, std::move(a));
      } catch (const Error& e) {
        out.failure = std::string(to_string(task)) + " failed: " + e.what();
        return out;
      }
    }
    return out;
  }

  /// Fills the queue with the internal containers (and data stores) of the L2
  /// view, in declaration order.
  PipelineState populate_component_queue(const PipelineState& state,
                                         std::vector<std::string>* warnings = nullptr) const {
    const LevelInstance l2{Level::L2_Container, std::nullopt};
    const Artifact* view_artifact = state.find(ArtifactKind::ViewYaml, l2);
    if (!view_artifact)
      throw Error(ErrorCode::MissingPrerequisite, "missing VIEW_YAML@L2", "VIEW_YAML@L2");
    ViewModel view;
    try {
      view = parse_view_yaml(view_artifact->content, Level::L2_Container, config_.view_options);
    } catch (const Error& e) {
      throw Error(ErrorCode::MissingPrerequisite,
                  std::string("VIEW_YAML@L2 does not parse: ") + e.what(), "VIEW_YAML@L2");
    }
    std::vector<std::string> queue;
    for (const auto& e : view.elements) {
      if (e.external) continue;
      if (e.kind == ElementKind::Container ||
          (e.kind == ElementKind::DataStore && !config_.l3_skip_datastores))
        queue.push_back(e.alias);
    }
    if (queue.empty() && warnings)
      warnings->push_back("L2 view declares no containers; nothing to decompose at L3");
    return with_component_queue(state, std::move(queue));
  }

  /// Analysis (collaborative or single-agent) followed by the processing chain.
  StageResult run_instance(const PipelineState& state, const LevelInstance& instance) const {
    auto analysed = config_.mode == RunMode::Collaborative
                        ? run_collaborative_session(state, instance)
                        : run_single_agent_analysis(state, instance);
    if (analysed.failure) return analysed;
    return run_processing_chain(analysed.state, instance);
  }

  RunResult run_workflow(const SystemBrief& brief) const {
    const auto start = std::chrono::steady_clock::now();
    const auto usage_before = gateway_.usage_total();
    RunResult result;
    auto state = new_initial_state(brief);

    auto finish = [&](PipelineState final_state) {
      result.final_state = std::move(final_state);
      auto after = gateway_.usage_total();
      result.usage_total = {after.input_tokens - usage_before.input_tokens,
                            after.output_tokens - usage_before.output_tokens};
      result.wall_time_ms = static_cast<std::uint64_t>(
          std::chrono::duration_cast<std::chrono::milliseconds>(
              std::chrono::steady_clock::now() - start)
              .count());
      return std::move(result);
    };

    for (Level level : {Level::L1_Context, Level::L2_Container}) {
      LevelInstance inst{level, std::nullopt};
      auto stage = run_instance(state, inst);
      state = std::move(stage.state);
      if (stage.failure) {
        result.per_instance_status.emplace_back(inst, InstanceStatus::partial(*stage.failure));
        if (level == Level::L1_Context)
          result.per_instance_status.emplace_back(LevelInstance{Level::L2_Container, std::nullopt},
                                                  InstanceStatus::partial("prerequisite missing"));
        result.halted_at = level;
        result.warnings.push_back("descent halted at " + std::string(to_string(level)) +
                                  "; L3 not attempted (prerequisite missing)");
        return finish(std::move(state));
      }
      result.per_instance_status.emplace_back(inst, InstanceStatus::ok());
    }

    try {
      state = populate_component_queue(state, &result.warnings);
    } catch (const Error& e) {
      result.halted_at = Level::L2_Container;
      result.warnings.push_back(e.what());
      return finish(std::move(state));
    }

    const PipelineState snapshot = state;
    const auto queue = snapshot.component_queue;
    std::vector<StageResult> forks;
    if (config_.parallel_l3) {
      std::vector<std::future<StageResult>> pending;
      for (const auto& alias : queue) {
        pending.push_back(std::async(std::launch::async, [this, &snapshot, alias] {
          return run_instance(snapshot, LevelInstance{Level::L3_Component, alias});
        }));
      }
      for (auto& f : pending) forks.push_back(f.get());
    } else {
      for (const auto& alias : queue)
        forks.push_back(run_instance(snapshot, LevelInstance{Level::L3_Component, alias}));
    }

    // Join: each fork's own artifacts are re-appended in queue order.
    for (std::size_t i = 0; i < queue.size(); ++i) {
      LevelInstance inst{Level::L3_Component, queue[i]};
      const auto& fork = forks[i].state.artifacts;
      for (std::size_t j = snapshot.artifacts.size(); j < fork.size(); ++j)
        state = append_artifact(state, fork[j]);
      result.per_instance_status.emplace_back(
          inst, forks[i].failure ? InstanceStatus::partial(*forks[i].failure)
                                 : InstanceStatus::ok());
    }
    return finish(std::move(state));
  }

 private:
  StageResult run_session(const PipelineState& state, const LevelInstance& instance,
                          const std::vector<Persona>& team, std::uint32_t rounds) const {
    StageResult out{reset_messages(state), std::nullopt};
    if (team.empty() || rounds == 0) {
      out.failure = "ANALYZE: empty team or zero rounds";
      return out;
    }
    const std::size_t turns = static_cast<std::size_t>(rounds) * team.size();
    TokenUsage usage;
    for (std::size_t k = 0; k < turns; ++k) {
      const Persona& speaker = team[k % team.size()];
      try {
        auto ctx = build_context(out.state, instance, TaskKind::Analyze);
        LlmRequest req{assemble_prompt(prompts_, speaker, TaskKind::Analyze, ctx),
                       FixtureKey::generation(TaskKind::Analyze, instance, k)};
        auto completion = gateway_.complete(req, config_.generation);
        usage += completion.usage;
        out.state = append_message(
            out.state, Message{speaker.id, k, text::trim(completion.text), completion.usage});
      } catch (const Error& e) {
        out.failure = "ANALYZE turn " + std::to_string(k) + " failed: " + e.what();
        out.state = reset_messages(out.state);
        return out;
      }
    }
    Artifact transcript;
    transcript.kind = ArtifactKind::Transcript;
    transcript.level = instance.level;
    transcript.focus_container = instance.focus_container;
    transcript.messages = out.state.messages;
    transcript.content = render_transcript(transcript.messages);
    transcript.token_usage = usage;
    try {
      out.state = append_artifact(out.state, std::move(transcript));
    } catch (const Error& e) {
      out.failure = e.what();
    }
    out.state = reset_messages(out.state);
    return out;
  }

  LlmGateway& gateway_;
  const PromptLibrary& prompts_;
  RunConfig config_;
};

}  // namespace c4mas
