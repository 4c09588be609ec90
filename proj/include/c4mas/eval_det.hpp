#pragma once

// Deterministic evaluation: structural integrity (completeness) and C4 rule
// adherence (abstraction, naming, definitional and cross-level consistency).

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "c4mas/c4_views.hpp"
#include "c4mas/domain.hpp"

namespace c4mas {

inline double percent(std::size_t part, std::size_t whole) {
  return whole == 0 ? 100.0 : 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}

// ---------------------------------------------------------------------------
// Completeness
// ---------------------------------------------------------------------------

struct CompletenessResult {
  std::vector<ArtifactKey> expected;
  std::vector<ArtifactKey> present_non_empty;
  std::vector<ArtifactKey> missing;
  double score_percent = 100.0;
};

/// Expected: every instance x {ANALYSIS_REPORT, VIEW_YAML, PLANTUML_DIAGRAM}.
/// Transcripts are not scored.
inline CompletenessResult check_completeness(const std::vector<Artifact>& artifacts,
                                             const std::vector<LevelInstance>& instances) {
  CompletenessResult r;
  for (const auto& inst : instances) {
    for (ArtifactKind kind :
         {ArtifactKind::AnalysisReport, ArtifactKind::ViewYaml, ArtifactKind::PlantumlDiagram}) {
      ArtifactKey key{kind, inst};
      r.expected.push_back(key);
      auto it = std::find_if(artifacts.begin(), artifacts.end(),
                             [&key](const Artifact& a) { return a.key() == key; });
      if (it != artifacts.end() && !text::trim_view(it->content).empty())
        r.present_non_empty.push_back(key);
      else
        r.missing.push_back(key);
    }
  }
  r.score_percent = percent(r.present_non_empty.size(), r.expected.size());
  return r;
}

// ---------------------------------------------------------------------------
// Abstraction adherence
// ---------------------------------------------------------------------------

struct RuleCheck {
  std::string rule_id;
  bool passed = false;
  std::string detail;
};

struct RuleReport {
  std::vector<RuleCheck> rules_checked;
  double score_percent = 100.0;

  std::size_t passed() const {
    return static_cast<std::size_t>(std::count_if(rules_checked.begin(), rules_checked.end(),
                                                  [](const RuleCheck& r) { return r.passed; }));
  }
};

/// Rule table:
///   L1  no-container-at-L1, no-component-at-L1, has-person-or-external-at-L1
///   L2  no-component-at-L2, has-system-boundary-at-L2
///   L3  has-container-boundary-at-L3
inline RuleReport check_abstraction_adherence(const DiagramModel& diagram, Level level) {
  std::vector<std::string> containers, components;
  bool person_or_external = false;
  for (const auto& e : diagram.declarations) {
    if (e.kind == ElementKind::Container || e.kind == ElementKind::DataStore)
      containers.push_back(e.alias);
    if (e.kind == ElementKind::Component) components.push_back(e.alias);
    if (e.kind == ElementKind::Person || e.external) person_or_external = true;
  }
  auto has_boundary = [&diagram](BoundaryKind kind) {
    return std::any_of(diagram.boundaries.begin(), diagram.boundaries.end(),
                       [kind](const Boundary& b) { return b.kind == kind; });
  };
  auto none_of = [](std::string id, const std::vector<std::string>& offenders, const char* what) {
    return RuleCheck{std::move(id), offenders.empty(),
                     offenders.empty() ? std::string()
                                       : std::string(what) + ": " + text::join(offenders, ", ")};
  };

  RuleReport r;
  switch (level) {
    case Level::L1_Context:
      r.rules_checked.push_back(none_of("no-container-at-L1", containers, "container elements"));
      r.rules_checked.push_back(none_of("no-component-at-L1", components, "component elements"));
      r.rules_checked.push_back({"has-person-or-external-at-L1", person_or_external,
                                 person_or_external ? "" : "no Person or external system"});
      break;
    case Level::L2_Container: {
      r.rules_checked.push_back(none_of("no-component-at-L2", components, "component elements"));
      bool ok = has_boundary(BoundaryKind::System);
      r.rules_checked.push_back(
          {"has-system-boundary-at-L2", ok, ok ? "" : "no System_Boundary"});
      break;
    }
    case Level::L3_Component: {
      bool ok = has_boundary(BoundaryKind::Container);
      r.rules_checked.push_back(
          {"has-container-boundary-at-L3", ok, ok ? "" : "no Container_Boundary"});
      break;
    }
  }
  r.score_percent = percent(r.passed(), r.rules_checked.size());
  return r;
}

// ---------------------------------------------------------------------------
// Naming consistency
// ---------------------------------------------------------------------------

enum class NamingConvention { PascalCase, CamelCase, SnakeCase, KebabCase, Unclassified };

inline std::string_view to_string(NamingConvention c) {
  switch (c) {
    case NamingConvention::PascalCase: return "PascalCase";
    case NamingConvention::CamelCase: return "camelCase";
    case NamingConvention::SnakeCase: return "snake_case";
    case NamingConvention::KebabCase: return "kebab-case";
    case NamingConvention::Unclassified: return "Unclassified";
  }
  return "?";
}

/// Tie-break order for the dominant convention.
inline constexpr std::array<NamingConvention, 4> kNamingPriority = {
    NamingConvention::PascalCase, NamingConvention::CamelCase, NamingConvention::SnakeCase,
    NamingConvention::KebabCase};

inline NamingConvention classify_alias(const std::string& alias) {
  static const std::regex pascal("^[A-Z][a-z0-9]+(?:[A-Z][a-z0-9]+)*$");
  static const std::regex camel("^[a-z][a-z0-9]+(?:[A-Z][a-z0-9]+)+$");
  static const std::regex snake("^[a-z0-9]+(?:_[a-z0-9]+)+$");
  static const std::regex kebab("^[a-z0-9]+(?:-[a-z0-9]+)+$");
  if (std::regex_match(alias, pascal)) return NamingConvention::PascalCase;
  if (std::regex_match(alias, camel)) return NamingConvention::CamelCase;
  if (std::regex_match(alias, snake)) return NamingConvention::SnakeCase;
  if (std::regex_match(alias, kebab)) return NamingConvention::KebabCase;
  return NamingConvention::Unclassified;
}

struct NamingReport {
  std::map<std::string, NamingConvention> classified;
  std::optional<NamingConvention> dominant;
  std::vector<std::string> outliers;
  double score_percent = 100.0;
};

/// Classifies every distinct element alias across `views`.
inline NamingReport check_naming_consistency(const std::vector<ViewModel>& views) {
  NamingReport r;
  for (const auto& v : views)
    for (const auto& e : v.elements) r.classified.emplace(e.alias, classify_alias(e.alias));

  std::map<NamingConvention, std::size_t> counts;
  std::size_t classifiable = 0;
  for (const auto& [alias, c] : r.classified) {
    if (c == NamingConvention::Unclassified) continue;
    ++counts[c];
    ++classifiable;
  }
  if (classifiable == 0) return r;

  std::size_t best = 0;
  for (auto c : kNamingPriority) {
    if (counts[c] > best) {
      best = counts[c];
      r.dominant = c;
    }
  }
  for (const auto& [alias, c] : r.classified)
    if (c != NamingConvention::Unclassified && c != *r.dominant) r.outliers.push_back(alias);
  r.score_percent = percent(best, classifiable);
  return r;
}

// ---------------------------------------------------------------------------
// Definitional consistency
// ---------------------------------------------------------------------------

struct MatchReport {
  std::set<std::string> missing_in_diagram;
  /// Declared in the diagram but not in the view; reported, not scored.
  std::set<std::string> extra_in_diagram;
  double score_percent = 100.0;
};

inline MatchReport check_definitional_consistency(const ViewModel& view,
                                                  const DiagramModel& diagram) {
  MatchReport r;
  auto in_diagram = diagram.aliases();
  std::set<std::string> in_view;
  std::size_t found = 0;
  for (const auto& e : view.elements) {
    in_view.insert(e.alias);
    if (in_diagram.count(e.alias)) ++found;
    else r.missing_in_diagram.insert(e.alias);
  }
  for (const auto& a : in_diagram)
    if (!in_view.count(a)) r.extra_in_diagram.insert(a);
  r.score_percent = percent(found, view.elements.size());
  return r;
}

// ---------------------------------------------------------------------------
// Cross-level consistency
// ---------------------------------------------------------------------------

struct L3Violation {
  std::string container;
  std::string alias;
  std::string reason;

  bool operator==(const L3Violation&) const = default;
};

struct CrossLevelReport {
  bool externals_pass = true;
  std::set<std::string> missing_in_l2;
  std::set<std::string> extra_in_l2;
  std::vector<L3Violation> l3_reference_violations;

  bool pass() const { return externals_pass && l3_reference_violations.empty(); }
};

/// Case-folded aliases of external, non-person elements.
inline std::set<std::string> external_aliases(const ViewModel& view) {
  std::set<std::string> out;
  for (const auto& e : view.elements)
    if (e.external && e.kind != ElementKind::Person) out.insert(text::to_lower(e.alias));
  return out;
}

inline CrossLevelReport check_cross_level(
    const ViewModel& l1, const ViewModel& l2,
    const std::vector<std::pair<std::string, ViewModel>>& l3s) {
  CrossLevelReport r;
  auto e1 = external_aliases(l1);
  auto e2 = external_aliases(l2);
  std::set_difference(e1.begin(), e1.end(), e2.begin(), e2.end(),
                      std::inserter(r.missing_in_l2, r.missing_in_l2.end()));
  std::set_difference(e2.begin(), e2.end(), e1.begin(), e1.end(),
                      std::inserter(r.extra_in_l2, r.extra_in_l2.end()));
  r.externals_pass = r.missing_in_l2.empty() && r.extra_in_l2.empty();

  for (const auto& [container, view] : l3s) {
    for (const auto& e : view.elements) {
      if (e.kind == ElementKind::Component) continue;
      if (!l2.find(e.alias)) r.l3_reference_violations.push_back({container, e.alias, "undeclared at L2"});
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// L2 container counts
// ---------------------------------------------------------------------------

inline std::size_t count_l2_containers(const ViewModel& l2) {
  return static_cast<std::size_t>(
      std::count_if(l2.elements.begin(), l2.elements.end(), [](const Element& e) {
        return e.kind == ElementKind::Container || e.kind == ElementKind::DataStore;
      }));
}

struct CountStats {
  double mean = 0;
  double min = 0;
  double max = 0;
  std::size_t n = 0;
};

inline CountStats aggregate_counts(const std::vector<double>& values) {
  CountStats s;
  if (values.empty()) return s;
  s.n = values.size();
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  double sum = 0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  return s;
}

}  // namespace c4mas
