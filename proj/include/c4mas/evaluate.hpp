#pragma once

// Runs every evaluation layer over a persisted run and renders evaluation.json.

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "c4mas/c4_views.hpp"
#include "c4mas/eval_det.hpp"
#include "c4mas/eval_judge.hpp"
#include "c4mas/run_store.hpp"

namespace c4mas {

inline constexpr std::string_view kEvaluationSchemaVersion = "1.0";

struct EvaluateOptions {
  CompileMode compile_mode = CompileMode::InternalValidator;
  std::string runner_path;
  ViewParseOptions view_options;
  /// Null skips the judge layer.
  const Judge* judge = nullptr;
};

namespace detail {

inline nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json();
}

inline std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

template <typename Set>
nlohmann::json sorted_list(const Set& s) {
  return nlohmann::json(std::vector<std::string>(s.begin(), s.end()));
}

struct ParsedInstance {
  LevelInstance instance;
  std::optional<ViewModel> view;
  std::string view_error;
  std::optional<PumlParseResult> diagram;
};

}  // namespace detail

/// Evaluation document for one run. Deterministic layers always run; judge
/// fields are null with a reason when the judge is skipped or fails.
inline nlohmann::json evaluate_run(const LoadedRun& run, const EvaluateOptions& opts) {
  std::vector<LevelInstance> instances;
  for (const auto& r : run.instances) instances.push_back(r.instance);

  std::vector<detail::ParsedInstance> parsed;
  for (const auto& inst : instances) {
    detail::ParsedInstance p{inst, std::nullopt, {}, std::nullopt};
    if (const auto* v = run.find(ArtifactKind::ViewYaml, inst)) {
      try {
        p.view = parse_view_yaml(v->content, inst.level, opts.view_options);
      } catch (const Error& e) {
        p.view_error = e.what();
      }
    } else {
      p.view_error = "view.yaml missing";
    }
    if (const auto* d = run.find(ArtifactKind::PlantumlDiagram, inst))
      p.diagram = analyze_plantuml(d->content);
    parsed.push_back(std::move(p));
  }

  nlohmann::json doc;
  doc["schema_version"] = kEvaluationSchemaVersion;
  doc["run_id"] = run.run_id;
  doc["model_id"] = run.model_id;
  doc["configuration"] = run.configuration;
  doc["brief_title"] = run.brief.title;
  doc["usage"] = detail::usage_json(run.usage);

  // Compilation.
  {
    nlohmann::json per = nlohmann::json::array();
    std::vector<double> scores;
    for (const auto& inst : instances) {
      nlohmann::json j{{"instance", inst.dir_name()}};
      const auto* d = run.find(ArtifactKind::PlantumlDiagram, inst);
      if (!d) {
        j["ok"] = false;
        j["diagnostics"] = {"diagram.puml missing"};
      } else {
        try {
          auto r = check_compilation(d->content, opts.compile_mode, opts.runner_path);
          j["ok"] = r.ok;
          j["diagnostics"] = r.diagnostics;
          auto model = analyze_plantuml(d->content).model;
          std::vector<std::string> warnings;
          for (const auto& w : model.warnings) warnings.push_back(w.str());
          if (model.level && *model.level != inst.level)
            warnings.push_back("include declares " + std::string(to_string(*model.level)) +
                               " but the artifact is " + std::string(to_string(inst.level)));
          j["warnings"] = std::move(warnings);
        } catch (const Error& e) {
          j["ok"] = false;
          j["diagnostics"] = {std::string(e.what())};
        }
      }
      scores.push_back(j["ok"].get<bool>() ? 100.0 : 0.0);
      per.push_back(std::move(j));
    }
    doc["compilation"] = {{"mode", std::string(to_string(opts.compile_mode))},
                          {"per_instance", std::move(per)},
                          {"score_percent", detail::optional_number(detail::mean_of(scores))}};
  }

  // Completeness.
  {
    auto c = check_completeness(run.artifacts, instances);
    nlohmann::json missing = nlohmann::json::array();
    for (const auto& k : c.missing) missing.push_back(k.describe());
    doc["completeness"] = {{"expected", c.expected.size()},
                           {"present", c.present_non_empty.size()},
                           {"missing", std::move(missing)},
                           {"score_percent", c.score_percent}};
  }

  // Abstraction adherence.
  {
    nlohmann::json per = nlohmann::json::array();
    std::vector<double> scores;
    for (const auto& p : parsed) {
      nlohmann::json j{{"instance", p.instance.dir_name()}};
      if (!p.diagram) {
        j["status"] = "skipped";
        j["reason"] = "diagram.puml missing";
      } else {
        auto r = check_abstraction_adherence(p.diagram->model, p.instance.level);
        nlohmann::json rules = nlohmann::json::array();
        for (const auto& rc : r.rules_checked)
          rules.push_back({{"rule_id", rc.rule_id}, {"passed", rc.passed}, {"detail", rc.detail}});
        j["status"] = "checked";
        j["rules"] = std::move(rules);
        j["score_percent"] = r.score_percent;
        scores.push_back(r.score_percent);
      }
      per.push_back(std::move(j));
    }
    doc["abstraction"] = {{"per_instance", std::move(per)},
                          {"score_percent", detail::optional_number(detail::mean_of(scores))}};
  }

  // Naming consistency.
  {
    std::vector<ViewModel> views;
    for (const auto& p : parsed)
      if (p.view) views.push_back(*p.view);
    if (views.empty()) {
      doc["naming"] = {{"score_percent", nullptr}, {"reason", "no parseable views"}};
    } else {
      auto r = check_naming_consistency(views);
      nlohmann::json counts = nlohmann::json::object();
      for (const auto& [alias, c] : r.classified) {
        auto key = std::string(to_string(c));
        counts[key] = counts.value(key, 0) + 1;
      }
      doc["naming"] = {{"aliases", r.classified.size()},
                       {"counts", std::move(counts)},
                       {"dominant", r.dominant ? nlohmann::json(std::string(to_string(*r.dominant)))
                                               : nlohmann::json()},
                       {"outliers", r.outliers},
                       {"score_percent", r.score_percent}};
    }
  }

  // Definitional consistency.
  {
    nlohmann::json per = nlohmann::json::array();
    std::vector<double> scores;
    for (const auto& p : parsed) {
      nlohmann::json j{{"instance", p.instance.dir_name()}};
      if (!p.view) {
        j["status"] = "skipped";
        j["reason"] = p.view_error;
      } else if (!p.diagram) {
        j["status"] = "skipped";
        j["reason"] = "diagram.puml missing";
      } else {
        auto r = check_definitional_consistency(*p.view, p.diagram->model);
        j["status"] = "checked";
        j["missing_in_diagram"] = detail::sorted_list(r.missing_in_diagram);
        j["extra_in_diagram"] = detail::sorted_list(r.extra_in_diagram);
        j["score_percent"] = r.score_percent;
        scores.push_back(r.score_percent);
      }
      per.push_back(std::move(j));
    }
    doc["definitional"] = {{"per_instance", std::move(per)},
                           {"score_percent", detail::optional_number(detail::mean_of(scores))}};
  }

  // Cross-level consistency and L2 container count.
  const ViewModel* l1 = nullptr;
  const ViewModel* l2 = nullptr;
  std::vector<std::pair<std::string, ViewModel>> l3s;
  for (const auto& p : parsed) {
    if (!p.view) continue;
    if (p.instance.level == Level::L1_Context) l1 = &*p.view;
    else if (p.instance.level == Level::L2_Container) l2 = &*p.view;
    else l3s.emplace_back(*p.instance.focus_container, *p.view);
  }
  if (l1 && l2) {
    auto r = check_cross_level(*l1, *l2, l3s);
    nlohmann::json violations = nlohmann::json::array();
    for (const auto& v : r.l3_reference_violations)
      violations.push_back({{"container", v.container}, {"alias", v.alias}, {"reason", v.reason}});
    doc["cross_level"] = {{"status", "checked"},
                          {"pass", r.pass()},
                          {"externals_pass", r.externals_pass},
                          {"missing_in_l2", detail::sorted_list(r.missing_in_l2)},
                          {"extra_in_l2", detail::sorted_list(r.extra_in_l2)},
                          {"l3_reference_violations", std::move(violations)}};
  } else {
    doc["cross_level"] = {{"status", "skipped"},
                          {"pass", nullptr},
                          {"reason", "L1 and L2 views are both required"}};
  }
  doc["component_count"] = l2 ? nlohmann::json(count_l2_containers(*l2)) : nlohmann::json();

  // Judge layer.
  const detail::ParsedInstance* l1_parsed = nullptr;
  const detail::ParsedInstance* l2_parsed = nullptr;
  for (const auto& p : parsed) {
    if (p.instance.level == Level::L1_Context) l1_parsed = &p;
    if (p.instance.level == Level::L2_Container) l2_parsed = &p;
  }

  nlohmann::json semantic{{"score_percent", nullptr}};
  nlohmann::json architect{{"clarity", nullptr}, {"feasibility", nullptr}, {"risks", nullptr}};
  nlohmann::json security{{"points", nullptr}, {"findings", nullptr}};
  if (!opts.judge) {
    for (auto* j : {&semantic, &architect, &security}) (*j)["reason"] = "judge skipped";
  } else {
    const Judge& judge = *opts.judge;
    if (!l1_parsed || !l1_parsed->view || !l1_parsed->diagram) {
      semantic["reason"] = "L1 view or diagram unavailable";
    } else {
      try {
        auto entities = judge.extract_ground_truth_entities(run.brief);
        auto s = judge.verify_entities(entities, run.brief, *l1_parsed->view,
                                       l1_parsed->diagram->model);
        nlohmann::json ents = nlohmann::json::array();
        for (const auto& e : entities.entities)
          ents.push_back({{"name", e.name}, {"role", std::string(to_string(e.role))}});
        semantic = {{"score_percent", detail::optional_number(s.score_percent)},
                    {"entities", std::move(ents)},
                    {"present", s.present},
                    {"total", s.total}};
        if (!s.score_percent) semantic["reason"] = s.null_reason;
      } catch (const Error& e) {
        semantic["reason"] = e.what();
      }
    }
    try {
      auto c = judge.architect_critique(run.brief, run.artifacts);
      architect = {{"clarity", c.clarity},
                   {"feasibility", c.feasibility},
                   {"risks", c.key_risks},
                   {"recommendation", c.recommendation},
                   {"warnings", c.warnings}};
    } catch (const Error& e) {
      architect["reason"] = e.what();
    }
    if (!l2_parsed || !l2_parsed->view || !l2_parsed->diagram) {
      security["reason"] = "L2 view or diagram unavailable";
    } else {
      try {
        auto r = judge.security_red_team(run.brief, *l2_parsed->view, l2_parsed->diagram->model);
        nlohmann::json findings = nlohmann::json::array();
        for (const auto& f : r.findings)
          findings.push_back({{"title", f.title},
                              {"severity", std::string(to_string(f.severity))},
                              {"affected_elements", f.affected_elements},
                              {"rationale", f.rationale}});
        nlohmann::json weights = nlohmann::json::object();
        for (const auto& [sev, w] : r.weights_used) weights[std::string(to_string(sev))] = w;
        security = {{"points", r.points},
                    {"findings", std::move(findings)},
                    {"weights_used", std::move(weights)},
                    {"note", "lower score indicates better security"}};
      } catch (const Error& e) {
        security["reason"] = e.what();
      }
    }
  }
  doc["semantic_consistency"] = std::move(semantic);
  doc["architect"] = std::move(architect);
  doc["security"] = std::move(security);
  doc["judge_disclaimer"] = std::string(kJudgeDisclaimer);

  doc["rollup"] = {
      {"compilation_pct", doc["compilation"]["score_percent"]},
      {"completeness_pct", doc["completeness"]["score_percent"]},
      {"abstraction_pct", doc["abstraction"]["score_percent"]},
      {"naming_pct", doc["naming"]["score_percent"]},
      {"definitional_pct", doc["definitional"]["score_percent"]},
      {"cross_level_pass", doc["cross_level"]["pass"]},
      {"semantic_pct", doc["semantic_consistency"]["score_percent"]},
      {"clarity", doc["architect"]["clarity"]},
      {"feasibility", doc["architect"]["feasibility"]},
      {"risk_points", doc["security"]["points"]},
      {"component_count", doc["component_count"]},
  };
  return doc;
}

}  // namespace c4mas
