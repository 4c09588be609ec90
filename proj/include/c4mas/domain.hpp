#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "json.hpp"

#include "c4mas/error.hpp"
#include "c4mas/text.hpp"

namespace c4mas {

// ---------------------------------------------------------------------------
// Levels and instances
// ---------------------------------------------------------------------------

enum class Level : int { L1_Context = 1, L2_Container = 2, L3_Component = 3 };

inline constexpr Level kAllLevels[] = {Level::L1_Context, Level::L2_Container,
                                       Level::L3_Component};

inline std::string_view to_string(Level level) {
  switch (level) {
    case Level::L1_Context: return "L1";
    case Level::L2_Container: return "L2";
    case Level::L3_Component: return "L3";
  }
  return "L?";
}

inline std::string_view level_name(Level level) {
  switch (level) {
    case Level::L1_Context: return "Context";
    case Level::L2_Container: return "Container";
    case Level::L3_Component: return "Component";
  }
  return "?";
}

/// Accepts "L1", "l2", "Context", "container", "3", ...
inline std::optional<Level> parse_level(std::string_view raw) {
  auto s = text::to_lower(text::trim_view(raw));
  if (s == "l1" || s == "1" || s == "context") return Level::L1_Context;
  if (s == "l2" || s == "2" || s == "container") return Level::L2_Container;
  if (s == "l3" || s == "3" || s == "component") return Level::L3_Component;
  return std::nullopt;
}

inline std::optional<Level> preceding_level(Level level) {
  if (level == Level::L1_Context) return std::nullopt;
  return static_cast<Level>(static_cast<int>(level) - 1);
}

/// One execution of the generation pipeline: a level, plus the focus container
/// for L3.
struct LevelInstance {
  Level level = Level::L1_Context;
  std::optional<std::string> focus_container;

  auto operator<=>(const LevelInstance&) const = default;
  bool operator==(const LevelInstance&) const = default;

  /// Directory / fixture stem: `L1`, `L2`, `L3_<alias>`.
  std::string dir_name() const {
    std::string out(to_string(level));
    if (focus_container) out += "_" + *focus_container;
    return out;
  }
};

// ---------------------------------------------------------------------------
// Brief
// ---------------------------------------------------------------------------

struct SystemBrief {
  std::string title;
  std::string description;
  std::string domain;
  std::vector<std::string> constraints;
  std::vector<std::string> functional_requirements;
  std::vector<std::string> non_functional_requirements;

  bool operator==(const SystemBrief&) const = default;

  /// Canonical plain-text rendering embedded into prompts.
  std::string render() const {
    std::string out;
    out += "Title: " + title + "\n";
    out += "Domain: " + domain + "\n";
    out += "Description: " + description + "\n";
    auto list = [&out](std::string_view heading, const std::vector<std::string>& items) {
      out += std::string(heading) + ":\n";
      if (items.empty()) out += "  (none)\n";
      for (const auto& item : items) out += "  - " + item + "\n";
    };
    list("Constraints", constraints);
    list("Functional requirements", functional_requirements);
    list("Non-functional requirements", non_functional_requirements);
    return out;
  }
};

enum class BriefFormat { Yaml, Json };

inline void check_brief(const SystemBrief& brief) {
  if (brief.title.empty()) throw Error(ErrorCode::InvalidBrief, "title is empty", "title");
  if (brief.description.empty())
    throw Error(ErrorCode::InvalidBrief, "description is empty", "description");
  if (brief.functional_requirements.empty())
    throw Error(ErrorCode::InvalidBrief, "functional_requirements is empty",
                "functional_requirements");
}

namespace detail {

struct RawBrief {
  std::optional<std::string> title, description, domain;
  std::vector<std::string> constraints, frs, nfrs;
  std::vector<std::string> unknown_keys;
};

inline RawBrief read_yaml_brief(std::string_view raw) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(raw));
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  if (!root.IsMap()) throw Error(ErrorCode::ParseError, "brief document must be a mapping");
  RawBrief out;
  auto scalar = [](const YAML::Node& n, const std::string& key) -> std::string {
    if (!n.IsScalar()) throw Error(ErrorCode::ParseError, key + " must be a scalar", key);
    return n.as<std::string>();
  };
  auto list = [&scalar](const YAML::Node& n, const std::string& key) {
    std::vector<std::string> items;
    if (n.IsNull()) return items;
    if (!n.IsSequence()) throw Error(ErrorCode::ParseError, key + " must be a list", key);
    for (const auto& item : n) items.push_back(scalar(item, key));
    return items;
  };
  for (const auto& kv : root) {
    auto key = kv.first.as<std::string>();
    const auto& value = kv.second;
    if (key == "title") out.title = scalar(value, key);
    else if (key == "description") out.description = scalar(value, key);
    else if (key == "domain") out.domain = scalar(value, key);
    else if (key == "constraints") out.constraints = list(value, key);
    else if (key == "functional_requirements") out.frs = list(value, key);
    else if (key == "non_functional_requirements") out.nfrs = list(value, key);
    else out.unknown_keys.push_back(key);
  }
  return out;
}

inline RawBrief read_json_brief(std::string_view raw) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  if (!root.is_object()) throw Error(ErrorCode::ParseError, "brief document must be an object");
  RawBrief out;
  auto scalar = [](const nlohmann::json& n, const std::string& key) -> std::string {
    if (n.is_string()) return n.get<std::string>();
    if (n.is_number() || n.is_boolean()) return n.dump();
    throw Error(ErrorCode::ParseError, key + " must be a scalar", key);
  };
  auto list = [&scalar](const nlohmann::json& n, const std::string& key) {
    std::vector<std::string> items;
    if (n.is_null()) return items;
    if (!n.is_array()) throw Error(ErrorCode::ParseError, key + " must be a list", key);
    for (const auto& item : n) items.push_back(scalar(item, key));
    return items;
  };
  for (const auto& [key, value] : root.items()) {
    if (key == "title") out.title = scalar(value, key);
    else if (key == "description") out.description = scalar(value, key);
    else if (key == "domain") out.domain = scalar(value, key);
    else if (key == "constraints") out.constraints = list(value, key);
    else if (key == "functional_requirements") out.frs = list(value, key);
    else if (key == "non_functional_requirements") out.nfrs = list(value, key);
    else out.unknown_keys.push_back(key);
  }
  return out;
}

}  // namespace detail

/// Parses and normalizes a brief document. Unknown top-level keys are dropped
/// and listed in `warnings` (when given).
inline SystemBrief validate_brief(std::string_view raw, BriefFormat format,
                                  std::vector<std::string>* warnings = nullptr) {
  auto parsed = format == BriefFormat::Json ? detail::read_json_brief(raw)
                                            : detail::read_yaml_brief(raw);
  if (!parsed.unknown_keys.empty() && warnings) {
    warnings->push_back("ignored unknown brief keys: " + text::join(parsed.unknown_keys, ", "));
  }
  auto missing = [](const char* field) {
    return Error(ErrorCode::InvalidBrief, std::string("missing required field ") + field, field);
  };
  if (!parsed.title) throw missing("title");
  if (!parsed.description) throw missing("description");
  if (parsed.frs.empty()) throw missing("functional_requirements");
  auto trim_all = [](std::vector<std::string> items) {
    std::vector<std::string> out;
    for (auto& item : items) {
      auto t = text::trim(item);
      if (!t.empty()) out.push_back(std::move(t));
    }
    return out;
  };
  SystemBrief brief;
  brief.title = text::trim(parsed.title.value_or(""));
  brief.description = text::trim(parsed.description.value_or(""));
  brief.domain = text::trim(parsed.domain.value_or(""));
  brief.constraints = trim_all(std::move(parsed.constraints));
  brief.functional_requirements = trim_all(std::move(parsed.frs));
  brief.non_functional_requirements = trim_all(std::move(parsed.nfrs));
  check_brief(brief);
  return brief;
}

inline nlohmann::json brief_to_json(const SystemBrief& b) {
  return {{"title", b.title},
          {"description", b.description},
          {"domain", b.domain},
          {"constraints", b.constraints},
          {"functional_requirements", b.functional_requirements},
          {"non_functional_requirements", b.non_functional_requirements}};
}

// ---------------------------------------------------------------------------
// Messages and artifacts
// ---------------------------------------------------------------------------

struct TokenUsage {
  std::uint64_t input_tokens = 0;
  std::uint64_t output_tokens = 0;

  std::uint64_t total() const { return input_tokens + output_tokens; }

  TokenUsage& operator+=(const TokenUsage& o) {
    input_tokens += o.input_tokens;
    output_tokens += o.output_tokens;
    return *this;
  }
  friend TokenUsage operator+(TokenUsage a, const TokenUsage& b) { return a += b; }
  bool operator==(const TokenUsage&) const = default;
};

struct Message {
  std::string author_persona;
  std::size_t turn_index = 0;
  std::string content;
  TokenUsage token_usage;

  bool operator==(const Message&) const = default;
};

enum class ArtifactKind { Transcript, AnalysisReport, ViewYaml, PlantumlDiagram };

inline constexpr ArtifactKind kAllArtifactKinds[] = {
    ArtifactKind::Transcript, ArtifactKind::AnalysisReport, ArtifactKind::ViewYaml,
    ArtifactKind::PlantumlDiagram};

inline std::string_view to_string(ArtifactKind kind) {
  switch (kind) {
    case ArtifactKind::Transcript: return "TRANSCRIPT";
    case ArtifactKind::AnalysisReport: return "ANALYSIS_REPORT";
    case ArtifactKind::ViewYaml: return "VIEW_YAML";
    case ArtifactKind::PlantumlDiagram: return "PLANTUML_DIAGRAM";
  }
  return "?";
}

/// File name used in run directories.
inline std::string_view artifact_file_name(ArtifactKind kind) {
  switch (kind) {
    case ArtifactKind::Transcript: return "transcript.md";
    case ArtifactKind::AnalysisReport: return "analysis_report.md";
    case ArtifactKind::ViewYaml: return "view.yaml";
    case ArtifactKind::PlantumlDiagram: return "diagram.puml";
  }
  return "";
}

struct ArtifactKey {
  ArtifactKind kind;
  LevelInstance instance;

  auto operator<=>(const ArtifactKey&) const = default;
  bool operator==(const ArtifactKey&) const = default;

  std::string describe() const {
    return std::string(to_string(kind)) + "@" + instance.dir_name();
  }
};

struct Artifact {
  ArtifactKind kind = ArtifactKind::Transcript;
  Level level = Level::L1_Context;
  std::optional<std::string> focus_container;
  std::string content;
  std::uint64_t sequence_number = 0;
  TokenUsage token_usage;
  /// Structured session messages; only populated for TRANSCRIPT artifacts.
  std::vector<Message> messages;

  LevelInstance instance() const { return {level, focus_container}; }
  ArtifactKey key() const { return {kind, instance()}; }
  bool operator==(const Artifact&) const = default;
};

/// `[persona]: content` blocks separated by blank lines.
inline std::string render_transcript(const std::vector<Message>& messages) {
  std::string out;
  for (const auto& m : messages) {
    if (!out.empty()) out += "\n";
    out += "[" + m.author_persona + "]: " + text::trim(m.content) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline state
// ---------------------------------------------------------------------------

/// The (messages, brief, artifacts, component queue) tuple. Every transition
/// returns a new value; `messages` holds the current session only.
struct PipelineState {
  std::vector<Message> messages;
  SystemBrief brief;
  std::vector<Artifact> artifacts;
  std::vector<std::string> component_queue;

  const Artifact* find(const ArtifactKey& key) const {
    for (const auto& a : artifacts)
      if (a.key() == key) return &a;
    return nullptr;
  }
  const Artifact* find(ArtifactKind kind, const LevelInstance& inst) const {
    return find(ArtifactKey{kind, inst});
  }
};

inline PipelineState new_initial_state(SystemBrief brief) {
  check_brief(brief);
  PipelineState s;
  s.brief = std::move(brief);
  return s;
}

inline PipelineState append_message(const PipelineState& state, Message m) {
  if (m.turn_index != state.messages.size()) {
    throw Error(ErrorCode::TurnIndexGap,
                "expected turn " + std::to_string(state.messages.size()) + ", got " +
                    std::to_string(m.turn_index));
  }
  PipelineState next = state;
  next.messages.push_back(std::move(m));
  return next;
}

/// Starts a new collaborative session: clears the live message list.
inline PipelineState reset_messages(const PipelineState& state) {
  PipelineState next = state;
  next.messages.clear();
  return next;
}

/// Appends `a`, assigning sequence_number = previous max + 1 (0 for the
/// first artifact). The caller's sequence_number is ignored.
inline PipelineState append_artifact(const PipelineState& state, Artifact a) {
  if ((a.level == Level::L3_Component) != a.focus_container.has_value()) {
    throw Error(ErrorCode::InvalidArtifact,
                "focus_container must be present exactly for L3 artifacts",
                std::string(to_string(a.kind)));
  }
  if (state.find(a.key()))
    throw Error(ErrorCode::DuplicateArtifact, a.key().describe() + " already exists",
                a.key().describe());
  std::uint64_t next_seq = 0;
  for (const auto& existing : state.artifacts)
    next_seq = std::max(next_seq, existing.sequence_number + 1);
  a.sequence_number = next_seq;
  PipelineState next = state;
  next.artifacts.push_back(std::move(a));
  return next;
}

inline PipelineState with_component_queue(const PipelineState& state,
                                          std::vector<std::string> queue) {
  PipelineState next = state;
  next.component_queue = std::move(queue);
  return next;
}

}  // namespace c4mas
