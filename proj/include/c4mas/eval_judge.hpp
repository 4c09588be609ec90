#pragma once

// LLM-as-a-judge metrics: two-stage semantic consistency, the principal
// architect critique and the security red-team risk score.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "c4mas/c4_views.hpp"
#include "c4mas/domain.hpp"
#include "c4mas/llm_gateway.hpp"
#include "c4mas/prompt.hpp"

namespace c4mas {

enum class EntityRole { Actor, ExternalSystem, CoreSystem };

inline std::string_view to_string(EntityRole r) {
  switch (r) {
    case EntityRole::Actor: return "actor";
    case EntityRole::ExternalSystem: return "external_system";
    case EntityRole::CoreSystem: return "core_system";
  }
  return "?";
}

inline std::optional<EntityRole> parse_entity_role(std::string_view s) {
  auto v = text::to_lower(text::trim_view(s));
  if (v == "actor") return EntityRole::Actor;
  if (v == "external_system") return EntityRole::ExternalSystem;
  if (v == "core_system") return EntityRole::CoreSystem;
  return std::nullopt;
}

struct Entity {
  std::string name;
  EntityRole role = EntityRole::Actor;

  bool operator==(const Entity&) const = default;
};

struct EntityList {
  std::vector<Entity> entities;
};

struct SemanticConsistencyScore {
  std::size_t total = 0;
  std::vector<std::string> present;
  std::optional<double> score_percent;
  std::string null_reason;
};

struct Critique {
  int clarity = 1;
  int feasibility = 1;
  std::vector<std::string> key_risks;
  std::string recommendation;
  std::vector<std::string> warnings;
};

enum class Severity { Low, Medium, High, Critical };

inline std::string_view to_string(Severity s) {
  switch (s) {
    case Severity::Low: return "low";
    case Severity::Medium: return "medium";
    case Severity::High: return "high";
    case Severity::Critical: return "critical";
  }
  return "?";
}

inline std::optional<Severity> parse_severity(std::string_view s) {
  auto v = text::to_lower(text::trim_view(s));
  if (v == "low") return Severity::Low;
  if (v == "medium") return Severity::Medium;
  if (v == "high") return Severity::High;
  if (v == "critical") return Severity::Critical;
  return std::nullopt;
}

struct VulnerabilityFinding {
  std::string title;
  Severity severity = Severity::Low;
  std::vector<std::string> affected_elements;
  std::string rationale;
};

using SeverityWeights = std::map<Severity, double>;

inline SeverityWeights default_severity_weights() {
  return {{Severity::Low, 1.0}, {Severity::Medium, 3.0}, {Severity::High, 5.0},
          {Severity::Critical, 8.0}};
}

struct RiskScore {
  double points = 0;
  std::vector<VulnerabilityFinding> findings;
  SeverityWeights weights_used;
};

inline double weighted_risk_points(const std::vector<VulnerabilityFinding>& findings,
                                   const SeverityWeights& weights) {
  double points = 0;
  for (const auto& f : findings) {
    auto it = weights.find(f.severity);
    points += it == weights.end() ? 0.0 : it->second;
  }
  return points;
}

inline constexpr std::string_view kJudgeDisclaimer =
    "LLM-as-a-judge scores are heuristic indicators; they may reflect model bias, "
    "hallucination or domain miscalibration and have not been calibrated against human experts.";

// ---------------------------------------------------------------------------
// Structured output parsing
// ---------------------------------------------------------------------------

/// Parses the first JSON object in a completion (code fences and prose around
/// it are tolerated).
inline nlohmann::json extract_json_object(std::string_view raw) {
  auto body = text::strip_code_fence(raw);
  auto open = body.find('{');
  auto close = body.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open)
    throw Error(ErrorCode::MalformedResponse, "no JSON object in judge output");
  try {
    return nlohmann::json::parse(body.substr(open, close - open + 1));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedResponse, std::string("invalid JSON: ") + e.what());
  }
}

namespace detail {

inline std::string json_string(const nlohmann::json& j, const char* key, bool required = true) {
  if (!j.contains(key)) {
    if (required) throw Error(ErrorCode::MalformedResponse, std::string("missing '") + key + "'");
    return {};
  }
  if (!j[key].is_string())
    throw Error(ErrorCode::MalformedResponse, std::string("'") + key + "' must be a string");
  return j[key].get<std::string>();
}

inline std::vector<std::string> json_string_list(const nlohmann::json& j, const char* key) {
  std::vector<std::string> out;
  if (!j.contains(key) || j[key].is_null()) return out;
  if (!j[key].is_array())
    throw Error(ErrorCode::MalformedResponse, std::string("'") + key + "' must be a list");
  for (const auto& item : j[key]) {
    if (!item.is_string())
      throw Error(ErrorCode::MalformedResponse, std::string("'") + key + "' items must be strings");
    out.push_back(item.get<std::string>());
  }
  return out;
}

}  // namespace detail

/// Entity list with names deduplicated case-insensitively (first wins).
inline EntityList parse_entity_list(std::string_view raw) {
  auto j = extract_json_object(raw);
  if (!j.contains("entities") || !j["entities"].is_array())
    throw Error(ErrorCode::MalformedResponse, "'entities' must be a list");
  EntityList out;
  std::set<std::string> seen;
  for (const auto& item : j["entities"]) {
    if (!item.is_object()) throw Error(ErrorCode::MalformedResponse, "entity must be an object");
    Entity e;
    e.name = text::trim(detail::json_string(item, "name"));
    auto role = parse_entity_role(detail::json_string(item, "role"));
    if (!role) throw Error(ErrorCode::MalformedResponse, "unknown entity role for " + e.name);
    e.role = *role;
    if (e.name.empty()) throw Error(ErrorCode::MalformedResponse, "entity with empty name");
    if (seen.insert(text::to_lower(e.name)).second) out.entities.push_back(std::move(e));
  }
  return out;
}

/// Per-entity verdicts keyed by case-folded name.
inline std::map<std::string, bool> parse_entity_verdicts(std::string_view raw) {
  auto j = extract_json_object(raw);
  if (!j.contains("results") || !j["results"].is_array())
    throw Error(ErrorCode::MalformedResponse, "'results' must be a list");
  std::map<std::string, bool> out;
  for (const auto& item : j["results"]) {
    if (!item.is_object() || !item.contains("present") || !item["present"].is_boolean())
      throw Error(ErrorCode::MalformedResponse, "result needs 'name' and boolean 'present'");
    out[text::to_lower(text::trim(detail::json_string(item, "name")))] = item["present"].get<bool>();
  }
  return out;
}

/// Ratings outside 1..5 are clamped and a warning is recorded.
inline Critique parse_critique(std::string_view raw) {
  auto j = extract_json_object(raw);
  Critique c;
  auto rating = [&j, &c](const char* key) {
    if (!j.contains(key) || !j[key].is_number())
      throw Error(ErrorCode::MalformedResponse, std::string("'") + key + "' must be a number");
    double v = j[key].get<double>();
    int r = static_cast<int>(std::lround(v));
    if (r < 1 || r > 5 || static_cast<double>(r) != v) {
      int clamped = std::clamp(r, 1, 5);
      c.warnings.push_back(std::string(key) + " " + nlohmann::json(v).dump() +
                           " outside 1-5 integer scale; using " + std::to_string(clamped));
      r = clamped;
    }
    return r;
  };
  c.clarity = rating("clarity");
  c.feasibility = rating("feasibility");
  c.key_risks = detail::json_string_list(j, "key_risks");
  c.recommendation = detail::json_string(j, "recommendation", false);
  return c;
}

inline std::vector<VulnerabilityFinding> parse_findings(std::string_view raw) {
  auto j = extract_json_object(raw);
  if (!j.contains("findings") || !j["findings"].is_array())
    throw Error(ErrorCode::MalformedResponse, "'findings' must be a list");
  std::vector<VulnerabilityFinding> out;
  for (const auto& item : j["findings"]) {
    if (!item.is_object()) throw Error(ErrorCode::MalformedResponse, "finding must be an object");
    VulnerabilityFinding f;
    f.title = detail::json_string(item, "title");
    auto sev_text = detail::json_string(item, "severity");
    auto sev = parse_severity(sev_text);
    if (!sev) throw Error(ErrorCode::MalformedResponse, "unknown severity '" + sev_text + "'");
    f.severity = *sev;
    f.affected_elements = detail::json_string_list(item, "affected_elements");
    f.rationale = detail::json_string(item, "rationale", false);
    out.push_back(std::move(f));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Judge
// ---------------------------------------------------------------------------

struct JudgeConfig {
  GenerationParams generation;
  SeverityWeights severity_weights = default_severity_weights();
  std::uint32_t validation_attempts = 3;
  /// Estimated-token budget for the architect's context; 0 disables trimming.
  std::uint64_t architect_token_budget = 100000;
};

namespace judge_metrics {
inline constexpr std::string_view kExtractEntities = "extract_entities";
inline constexpr std::string_view kVerifyEntities = "verify_entities";
inline constexpr std::string_view kArchitectCritique = "architect_critique";
inline constexpr std::string_view kSecurityRedTeam = "security_red_team";
}  // namespace judge_metrics

class Judge {
 public:
  Judge(LlmGateway& gateway, const PromptLibrary& prompts, JudgeConfig config = {})
      : gateway_(gateway), prompts_(prompts), config_(std::move(config)) {}

  const JudgeConfig& config() const { return config_; }

  /// Stage one of semantic consistency.
  EntityList extract_ground_truth_entities(const SystemBrief& brief) const {
    ContextSelection ctx;
    ctx.brief = brief;
    auto prompt = assemble(persona_ids::kRequirementsAnalyst, judge_metrics::kExtractEntities, ctx);
    auto text = ask(judge_metrics::kExtractEntities, std::move(prompt),
                    [](const std::string& t) { parse_entity_list(t); });
    return parse_entity_list(text);
  }

  /// Stage two: the judge marks each entity present or absent in the L1 view
  /// and diagram. An empty entity list yields a null score without a call.
  SemanticConsistencyScore verify_entities(const EntityList& entities, const SystemBrief& brief,
                                           const ViewModel& l1_view,
                                           const DiagramModel& l1_diagram) const {
    SemanticConsistencyScore s;
    s.total = entities.entities.size();
    if (entities.entities.empty()) {
      s.null_reason = "empty ground truth";
      return s;
    }
    ContextSelection ctx;
    ctx.brief = brief;
    ctx.level = Level::L1_Context;
    ctx.supporting_artifacts.push_back(
        artifact(ArtifactKind::ViewYaml, Level::L1_Context, emit_view_yaml(l1_view)));
    ctx.supporting_artifacts.push_back(
        artifact(ArtifactKind::PlantumlDiagram, Level::L1_Context, l1_diagram.raw_text));
    auto prompt = assemble(persona_ids::kDiagramReviewer, judge_metrics::kVerifyEntities, ctx);
    prompt.user_text += "\n## Entities to verify\n\n";
    for (const auto& e : entities.entities)
      prompt.user_text += "- " + e.name + " (" + std::string(to_string(e.role)) + ")\n";
    auto text = ask(judge_metrics::kVerifyEntities, std::move(prompt),
                    [](const std::string& t) { parse_entity_verdicts(t); });
    auto verdicts = parse_entity_verdicts(text);
    for (const auto& e : entities.entities) {
      auto it = verdicts.find(text::to_lower(e.name));
      if (it != verdicts.end() && it->second) s.present.push_back(e.name);
    }
    s.score_percent = percent_of(s.present.size(), s.total);
    return s;
  }

  /// Principal-architect review of every ANALYSIS_REPORT and PLANTUML_DIAGRAM.
  /// Oldest artifacts are dropped first when the token budget is exceeded.
  Critique architect_critique(const SystemBrief& brief,
                              const std::vector<Artifact>& artifacts) const {
    std::vector<Artifact> selected;
    bool has_l1 = false;
    for (const auto& a : artifacts) {
      if (a.kind != ArtifactKind::AnalysisReport && a.kind != ArtifactKind::PlantumlDiagram)
        continue;
      if (a.level == Level::L1_Context) has_l1 = true;
      selected.push_back(a);
    }
    if (!has_l1)
      throw Error(ErrorCode::JudgeUnavailable, "architect critique needs L1 artifacts");
    std::stable_sort(selected.begin(), selected.end(), [](const Artifact& a, const Artifact& b) {
      return a.sequence_number < b.sequence_number;
    });
    std::vector<std::string> warnings;
    if (config_.architect_token_budget > 0) {
      auto tokens = [&selected]() {
        std::uint64_t t = 0;
        for (const auto& a : selected) t += text::estimate_tokens(a.content);
        return t;
      };
      while (selected.size() > 1 && tokens() > config_.architect_token_budget) {
        warnings.push_back("dropped " + ArtifactKey{selected.front().kind,
                                                    selected.front().instance()}
                                            .describe() +
                           " to fit the token budget");
        selected.erase(selected.begin());
      }
    }
    ContextSelection ctx;
    ctx.brief = brief;
    ctx.supporting_artifacts = selected;
    auto prompt =
        assemble(persona_ids::kPrincipalArchitect, judge_metrics::kArchitectCritique, ctx);
    auto text = ask(judge_metrics::kArchitectCritique, std::move(prompt),
                    [](const std::string& t) { parse_critique(t); });
    auto critique = parse_critique(text);
    critique.warnings.insert(critique.warnings.begin(), warnings.begin(), warnings.end());
    return critique;
  }

  RiskScore security_red_team(const SystemBrief& brief, const ViewModel& l2_view,
                              const DiagramModel& l2_diagram) const {
    ContextSelection ctx;
    ctx.brief = brief;
    ctx.level = Level::L2_Container;
    ctx.supporting_artifacts.push_back(
        artifact(ArtifactKind::ViewYaml, Level::L2_Container, emit_view_yaml(l2_view)));
    ctx.supporting_artifacts.push_back(
        artifact(ArtifactKind::PlantumlDiagram, Level::L2_Container, l2_diagram.raw_text));
    auto prompt =
        assemble(persona_ids::kCybersecurityExpert, judge_metrics::kSecurityRedTeam, ctx);
    auto text = ask(judge_metrics::kSecurityRedTeam, std::move(prompt),
                    [](const std::string& t) { parse_findings(t); });
    RiskScore r;
    r.findings = parse_findings(text);
    r.weights_used = config_.severity_weights;
    r.points = weighted_risk_points(r.findings, r.weights_used);
    return r;
  }

 private:
  static double percent_of(std::size_t part, std::size_t whole) {
    return 100.0 * static_cast<double>(part) / static_cast<double>(whole);
  }

  static Artifact artifact(ArtifactKind kind, Level level, std::string content) {
    Artifact a;
    a.kind = kind;
    a.level = level;
    a.content = std::move(content);
    return a;
  }

  AssembledPrompt assemble(std::string_view persona_id, std::string_view task,
                           const ContextSelection& ctx) const {
    return assemble_prompt(prompts_, prompts_.persona(persona_id), task, ctx);
  }

  template <typename Check>
  std::string ask(std::string_view metric, AssembledPrompt prompt, Check check) const {
    LlmRequest req{std::move(prompt), FixtureKey::judge(std::string(metric))};
    auto validator = [&check](const std::string& t) -> std::optional<std::string> {
      try {
        check(t);
        return std::nullopt;
      } catch (const Error& e) {
        return std::string(e.what());
      }
    };
    try {
      return gateway_
          .complete_validated(req, config_.generation, validator, config_.validation_attempts)
          .text;
    } catch (const ValidationExhausted& e) {
      throw Error(ErrorCode::JudgeUnavailable,
                  std::string(metric) + ": " + text::join(e.diagnostics(), "; "),
                  std::string(metric));
    } catch (const Error& e) {
      throw Error(ErrorCode::JudgeUnavailable, std::string(metric) + ": " + e.what(),
                  std::string(metric));
    }
  }

  LlmGateway& gateway_;
  const PromptLibrary& prompts_;
  JudgeConfig config_;
};

}  // namespace c4mas
