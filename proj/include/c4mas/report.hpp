#pragma once

// Aggregates evaluation.json files into per-(model, configuration) tables:
// quality metrics, L2 container counts and token totals.

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "c4mas/eval_det.hpp"
#include "c4mas/eval_judge.hpp"
#include "c4mas/evaluate.hpp"
#include "c4mas/run_store.hpp"

namespace c4mas {

/// Mean over non-null per-run values.
struct MetricStat {
  std::optional<double> mean;
  std::size_t values = 0;
  std::size_t nulls = 0;
};

struct MetricsRow {
  std::string model_id;
  std::string configuration;
  MetricStat compilation_pct;
  MetricStat completeness_pct;
  MetricStat abstraction_pct;
  MetricStat naming_pct;
  MetricStat semantic_pct;
  MetricStat clarity_mean;
  MetricStat feasibility_mean;
  MetricStat risk_points_mean;
  std::size_t runs = 0;
};

/// Column order of the metrics CSV.
inline constexpr std::array<std::string_view, 10> kMetricsColumns = {
    "model_id",     "configuration", "compilation_pct", "completeness_pct",
    "abstraction_pct", "naming_pct", "semantic_pct",    "clarity_mean",
    "feasibility_mean", "risk_points_mean"};

struct ComponentStatsRow {
  std::string model_id;
  std::string configuration;
  std::optional<CountStats> stats;
  std::size_t nulls = 0;
};

struct TokenRow {
  std::string model_id;
  std::string configuration;
  std::size_t runs = 0;
  TokenUsage usage;
};

struct Report {
  std::vector<MetricsRow> metrics;
  std::vector<ComponentStatsRow> components;
  std::vector<TokenRow> tokens;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::optional<double> number_at(const nlohmann::json& rollup, const char* key) {
  if (!rollup.contains(key) || !rollup[key].is_number()) return std::nullopt;
  return rollup[key].get<double>();
}

inline MetricStat collect(const std::vector<const nlohmann::json*>& docs, const char* key) {
  MetricStat s;
  std::vector<double> values;
  for (const auto* d : docs) {
    auto v = number_at(d->at("rollup"), key);
    if (v) values.push_back(*v);
    else ++s.nulls;
  }
  s.values = values.size();
  s.mean = mean_of(values);
  return s;
}

inline std::string cell(const MetricStat& s) {
  return s.mean ? text::format_fixed(*s.mean, 2) : std::string();
}

inline std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

inline std::string render_table(const std::vector<std::string>& header,
                                const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  auto line = [&width](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) out += "  ";
      out += c + 1 == cells.size() ? cells[c] : pad(cells[c], width[c]);
    }
    return out + "\n";
  };
  std::string out = line(header);
  std::vector<std::string> rule;
  for (auto w : width) rule.push_back(std::string(w, '-'));
  out += line(rule);
  for (const auto& r : rows) out += line(r);
  return out;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

/// Accepts a major schema version this build understands.
inline bool supported_evaluation_version(const nlohmann::json& doc) {
  if (!doc.contains("schema_version") || !doc["schema_version"].is_string()) return false;
  auto v = doc["schema_version"].get<std::string>();
  auto major = v.substr(0, v.find('.'));
  return major == std::string(kEvaluationSchemaVersion.substr(0, kEvaluationSchemaVersion.find('.')));
}

/// Reads `<path>/evaluation.json` (or `path` itself when it is a file).
/// Unreadable or unsupported documents are skipped with a warning.
inline std::vector<nlohmann::json> load_evaluations(const std::vector<std::filesystem::path>& paths,
                                                    std::vector<std::string>& warnings) {
  std::vector<nlohmann::json> out;
  for (const auto& p : paths) {
    auto file = std::filesystem::is_directory(p) ? p / "evaluation.json" : p;
    nlohmann::json doc;
    try {
      doc = read_json_file(file);
    } catch (const Error& e) {
      warnings.push_back("skipped " + p.string() + ": " + e.what());
      continue;
    }
    if (!supported_evaluation_version(doc)) {
      warnings.push_back("skipped " + p.string() + ": unsupported schema_version " +
                         (doc.contains("schema_version") ? doc["schema_version"].dump() : "(none)"));
      continue;
    }
    if (!doc.contains("rollup") || !doc.contains("model_id") || !doc.contains("configuration")) {
      warnings.push_back("skipped " + p.string() + ": missing rollup, model_id or configuration");
      continue;
    }
    out.push_back(std::move(doc));
  }
  return out;
}

inline Report build_report(const std::vector<nlohmann::json>& docs) {
  std::map<std::pair<std::string, std::string>, std::vector<const nlohmann::json*>> groups;
  for (const auto& d : docs)
    groups[{d.at("model_id").get<std::string>(), d.at("configuration").get<std::string>()}]
        .push_back(&d);

  Report r;
  for (const auto& [key, members] : groups) {
    MetricsRow m;
    m.model_id = key.first;
    m.configuration = key.second;
    m.runs = members.size();
    m.compilation_pct = detail::collect(members, "compilation_pct");
    m.completeness_pct = detail::collect(members, "completeness_pct");
    m.abstraction_pct = detail::collect(members, "abstraction_pct");
    m.naming_pct = detail::collect(members, "naming_pct");
    m.semantic_pct = detail::collect(members, "semantic_pct");
    m.clarity_mean = detail::collect(members, "clarity");
    m.feasibility_mean = detail::collect(members, "feasibility");
    m.risk_points_mean = detail::collect(members, "risk_points");
    r.metrics.push_back(std::move(m));

    ComponentStatsRow c{key.first, key.second, std::nullopt, 0};
    std::vector<double> counts;
    for (const auto* d : members) {
      auto v = detail::number_at(d->at("rollup"), "component_count");
      if (v) counts.push_back(*v);
      else ++c.nulls;
    }
    if (!counts.empty()) c.stats = aggregate_counts(counts);
    r.components.push_back(std::move(c));

    TokenRow t{key.first, key.second, members.size(), {}};
    for (const auto* d : members) {
      if (!d->contains("usage")) continue;
      t.usage += TokenUsage{d->at("usage").value("input_tokens", std::uint64_t{0}),
                            d->at("usage").value("output_tokens", std::uint64_t{0})};
    }
    r.tokens.push_back(std::move(t));
  }
  return r;
}

inline std::string render_metrics_csv(const Report& r) {
  std::vector<std::string> header(kMetricsColumns.begin(), kMetricsColumns.end());
  std::string out = text::join(header, ",") + "\n";
  for (const auto& m : r.metrics) {
    out += text::join({detail::csv_escape(m.model_id), detail::csv_escape(m.configuration),
                       detail::cell(m.compilation_pct), detail::cell(m.completeness_pct),
                       detail::cell(m.abstraction_pct), detail::cell(m.naming_pct),
                       detail::cell(m.semantic_pct), detail::cell(m.clarity_mean),
                       detail::cell(m.feasibility_mean), detail::cell(m.risk_points_mean)},
                      ",") +
           "\n";
  }
  return out;
}

inline std::string render_components_csv(const Report& r) {
  std::string out = "model_id,configuration,mean,min,max,runs\n";
  for (const auto& c : r.components) {
    std::vector<std::string> cells{detail::csv_escape(c.model_id),
                                   detail::csv_escape(c.configuration)};
    if (c.stats) {
      cells.push_back(text::format_fixed(c.stats->mean, 2));
      cells.push_back(text::format_fixed(c.stats->min, 0));
      cells.push_back(text::format_fixed(c.stats->max, 0));
      cells.push_back(std::to_string(c.stats->n));
    } else {
      cells.insert(cells.end(), {"", "", "", "0"});
    }
    out += text::join(cells, ",") + "\n";
  }
  return out;
}

inline std::string render_tokens_csv(const Report& r) {
  std::string out = "model_id,configuration,runs,input_tokens,output_tokens,total_tokens\n";
  for (const auto& t : r.tokens)
    out += text::join({detail::csv_escape(t.model_id), detail::csv_escape(t.configuration),
                       std::to_string(t.runs), std::to_string(t.usage.input_tokens),
                       std::to_string(t.usage.output_tokens), std::to_string(t.usage.total())},
                      ",") +
           "\n";
  return out;
}

inline std::string render_report_text(const Report& r) {
  std::string out = "Quality metrics (means over runs; '-' = no values)\n\n";
  auto shown = [](const MetricStat& s) { return s.mean ? text::format_fixed(*s.mean, 2) : "-"; };
  std::vector<std::vector<std::string>> rows;
  for (const auto& m : r.metrics)
    rows.push_back({m.model_id, m.configuration, std::to_string(m.runs), shown(m.compilation_pct),
                    shown(m.completeness_pct), shown(m.abstraction_pct), shown(m.naming_pct),
                    shown(m.semantic_pct), shown(m.clarity_mean), shown(m.feasibility_mean),
                    shown(m.risk_points_mean)});
  out += detail::render_table({"Model", "Config", "Runs", "Compile", "Complete", "Abstract",
                               "Naming", "Semantic", "Clarity", "Feasibility", "Risk"},
                              rows);

  out += "\nNull counts\n\n";
  rows.clear();
  for (const auto& m : r.metrics)
    rows.push_back({m.model_id, m.configuration, std::to_string(m.compilation_pct.nulls),
                    std::to_string(m.completeness_pct.nulls),
                    std::to_string(m.abstraction_pct.nulls), std::to_string(m.naming_pct.nulls),
                    std::to_string(m.semantic_pct.nulls), std::to_string(m.clarity_mean.nulls),
                    std::to_string(m.feasibility_mean.nulls),
                    std::to_string(m.risk_points_mean.nulls)});
  out += detail::render_table({"Model", "Config", "Compile", "Complete", "Abstract", "Naming",
                               "Semantic", "Clarity", "Feasibility", "Risk"},
                              rows);

  out += "\nL2 container counts\n\n";
  rows.clear();
  for (const auto& c : r.components) {
    if (c.stats)
      rows.push_back({c.model_id, c.configuration, text::format_fixed(c.stats->mean, 2),
                      text::format_fixed(c.stats->min, 0), text::format_fixed(c.stats->max, 0),
                      std::to_string(c.stats->n)});
    else
      rows.push_back({c.model_id, c.configuration, "-", "-", "-", "0"});
  }
  out += detail::render_table({"Model", "Config", "Mean", "Min", "Max", "Runs"}, rows);

  out += "\nToken usage\n\n";
  rows.clear();
  for (const auto& t : r.tokens)
    rows.push_back({t.model_id, t.configuration, std::to_string(t.runs),
                    std::to_string(t.usage.input_tokens), std::to_string(t.usage.output_tokens),
                    std::to_string(t.usage.total())});
  out += detail::render_table({"Model", "Config", "Runs", "Input", "Output", "Total"}, rows);

  out += "\nRisk: lower score indicates better security.\n";
  out += "Note: " + std::string(kJudgeDisclaimer) + "\n";
  return out;
}

}  // namespace c4mas
