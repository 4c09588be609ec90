#pragma once

// `c4mas generate | evaluate | report`.
//
// Exit codes: 0 success, 2 partial failure (some L3 instance incomplete),
// 3 fatal (L1 or L2 halted), 4 configuration or input error.

#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "c4mas/config.hpp"
#include "c4mas/evaluate.hpp"
#include "c4mas/orchestrator.hpp"
#include "c4mas/report.hpp"
#include "c4mas/run_store.hpp"

namespace c4mas {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kPartial = 2;
inline constexpr int kFatal = 3;
inline constexpr int kConfig = 4;
}  // namespace exit_code

inline SystemBrief load_brief(const std::filesystem::path& path,
                              std::vector<std::string>* warnings = nullptr) {
  if (!std::filesystem::is_regular_file(path))
    throw Error(ErrorCode::InvalidBrief, "brief not found: " + path.string(), path.string());
  auto format = text::to_lower(path.extension().string()) == ".json" ? BriefFormat::Json
                                                                      : BriefFormat::Yaml;
  return validate_brief(detail::read_text_file(path), format, warnings);
}

struct GenerateArgs {
  std::filesystem::path brief;
  std::filesystem::path config;
  std::filesystem::path out = "runs";
  std::optional<std::filesystem::path> seed_fixtures;
};

struct GenerateOutcome {
  int exit_code = exit_code::kConfig;
  std::string run_id;
  std::filesystem::path run_dir;
  RunResult result;
};

inline GenerateOutcome cmd_generate(const GenerateArgs& args, std::ostream& out,
                                    std::ostream& err) {
  GenerateOutcome outcome;
  AppConfig cfg;
  SystemBrief brief;
  PromptLibrary prompts;
  std::shared_ptr<Backend> backend;
  std::vector<std::string> warnings;
  try {
    cfg = load_config(args.config);
    brief = load_brief(args.brief, &warnings);
    prompts = load_prompts(cfg);
    backend = make_backend(cfg.generation);
    if (args.seed_fixtures)
      backend = std::make_shared<FixtureRecorder>(backend, *args.seed_fixtures);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return outcome;
  }
  for (const auto& w : warnings) err << "warning: " << w << "\n";

  LlmGateway gateway(backend, cfg.generation.max_in_flight);
  Orchestrator orchestrator(gateway, prompts, cfg.run);
  outcome.result = orchestrator.run_workflow(brief);
  const auto& result = outcome.result;

  RunMetadata meta;
  meta.model_id = cfg.generation.model_id;
  meta.backend_id = gateway.backend_id();
  meta.configuration = cfg.run.configuration_label();
  meta.config = {{"config_path", cfg.source_path.string()},
                 {"mode", cfg.run.mode == RunMode::Collaborative ? "collaborative" : "single_agent"},
                 {"rounds", cfg.run.rounds},
                 {"parallel_l3", cfg.run.parallel_l3},
                 {"l3_skip_datastores", cfg.run.l3_skip_datastores},
                 {"validation_attempts", cfg.run.validation_attempts},
                 {"temperature", cfg.run.generation.temperature},
                 {"max_output_tokens", cfg.run.generation.max_output_tokens}};
  try {
    outcome.run_id = allocate_run_id(args.out, brief, meta.configuration);
    outcome.run_dir = save_run(args.out, outcome.run_id, result, meta);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return outcome;
  }

  for (const auto& w : result.warnings) err << "warning: " << w << "\n";
  for (const auto& [inst, st] : result.per_instance_status)
    out << inst.dir_name() << ": " << (st.complete ? "complete" : "partial (" + st.reason + ")")
        << "\n";
  out << "run-id: " << outcome.run_id << "\n";
  out << "run-dir: " << outcome.run_dir.string() << "\n";
  out << "artifacts: " << result.final_state.artifacts.size() << "\n";
  out << "tokens: input=" << result.usage_total.input_tokens
      << " output=" << result.usage_total.output_tokens
      << " total=" << result.usage_total.total() << "\n";

  if (result.halted_at) outcome.exit_code = exit_code::kFatal;
  else if (!result.all_complete()) outcome.exit_code = exit_code::kPartial;
  else outcome.exit_code = exit_code::kOk;
  return outcome;
}

struct EvaluateArgs {
  std::filesystem::path run_dir;
  std::optional<std::filesystem::path> config;
  bool no_judge = false;
};

inline int cmd_evaluate(const EvaluateArgs& args, std::ostream& out, std::ostream& err) {
  AppConfig cfg;
  LoadedRun run;
  PromptLibrary prompts;
  std::unique_ptr<LlmGateway> judge_gateway;
  std::unique_ptr<Judge> judge;
  try {
    if (args.config) cfg = load_config(*args.config);
    prompts = load_prompts(cfg);
    run = load_run(args.run_dir);
    if (cfg.judge && !args.no_judge) {
      judge_gateway = std::make_unique<LlmGateway>(make_backend(*cfg.judge), cfg.judge->max_in_flight);
      JudgeConfig jc;
      jc.generation.model_id = cfg.judge->model_id;
      jc.severity_weights = cfg.severity_weights;
      jc.validation_attempts = cfg.run.validation_attempts;
      jc.architect_token_budget = cfg.judge_token_budget;
      judge = std::make_unique<Judge>(*judge_gateway, prompts, jc);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kConfig;
  }
  if (!cfg.judge && !args.no_judge) err << "note: no judge configured; judge metrics are null\n";

  EvaluateOptions opts;
  opts.compile_mode = cfg.compile_mode;
  opts.runner_path = cfg.runner_path;
  opts.view_options = cfg.run.view_options;
  opts.judge = judge.get();
  auto doc = evaluate_run(run, opts);
  auto path = args.run_dir / "evaluation.json";
  try {
    detail::write_file(path, doc.dump(2) + "\n");
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kConfig;
  }

  auto pct = [](const nlohmann::json& v) {
    return v.is_number() ? text::format_fixed(v.get<double>(), 2) : std::string("null");
  };
  const auto& r = doc["rollup"];
  out << "Compilation (" << doc["compilation"]["mode"].get<std::string>()
      << "): " << pct(r["compilation_pct"]) << "\n";
  out << "Completeness: " << pct(r["completeness_pct"]) << "\n";
  out << "Abstraction adherence: " << pct(r["abstraction_pct"]) << "\n";
  out << "Naming consistency: " << pct(r["naming_pct"]) << "\n";
  for (const auto& d : doc["definitional"]["per_instance"])
    out << "Definitional consistency " << d["instance"].get<std::string>() << ": "
        << (d["status"] == "checked" ? pct(d["score_percent"])
                                     : "skipped (" + d["reason"].get<std::string>() + ")")
        << "\n";
  out << "Cross-level: "
      << (r["cross_level_pass"].is_boolean() ? (r["cross_level_pass"].get<bool>() ? "pass" : "fail")
                                             : "skipped")
      << "\n";
  out << "Semantic consistency: " << pct(r["semantic_pct"]) << "\n";
  out << "Clarity: " << pct(r["clarity"]) << "  Feasibility: " << pct(r["feasibility"]) << "\n";
  out << "Risk points: " << pct(r["risk_points"]) << "\n";
  out << "wrote " << path.string() << "\n";
  return exit_code::kOk;
}

struct ReportArgs {
  std::vector<std::filesystem::path> inputs;
  std::optional<std::filesystem::path> out_dir;
};

inline int cmd_report(const ReportArgs& args, std::ostream& out, std::ostream& err) {
  std::vector<std::string> warnings;
  auto docs = load_evaluations(args.inputs, warnings);
  for (const auto& w : warnings) err << "warning: " << w << "\n";
  if (docs.empty()) {
    err << "error: no valid evaluation.json among the inputs\n";
    return exit_code::kConfig;
  }
  auto report = build_report(docs);
  auto text_report = render_report_text(report);
  auto metrics_csv = render_metrics_csv(report);
  out << text_report << "\n" << metrics_csv;
  if (args.out_dir) {
    try {
      detail::write_file(*args.out_dir / "report.txt", text_report);
      detail::write_file(*args.out_dir / "metrics.csv", metrics_csv);
      detail::write_file(*args.out_dir / "components.csv", render_components_csv(report));
      detail::write_file(*args.out_dir / "tokens.csv", render_tokens_csv(report));
    } catch (const Error& e) {
      err << "error: " << e.what() << "\n";
      return exit_code::kConfig;
    }
  }
  return exit_code::kOk;
}

/// Entry point shared by the executable and the tests.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-agent C4 architecture generation and evaluation"};
  app.require_subcommand(1);

  GenerateArgs gen;
  std::string seed;
  auto* generate = app.add_subcommand("generate", "Run the generation workflow for a brief");
  generate->add_option("brief", gen.brief, "System brief (YAML or JSON)")->required();
  generate->add_option("--config", gen.config, "Run configuration (YAML)")->required();
  generate->add_option("--out", gen.out, "Directory that receives run directories");
  generate->add_option("--seed-fixtures", seed,
                       "Record every completion as a mock fixture under this directory");

  EvaluateArgs eval;
  std::string eval_config;
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a persisted run");
  evaluate->add_option("run_dir", eval.run_dir, "Run directory")->required();
  evaluate->add_option("--config", eval_config, "Configuration with judge and compilation settings");
  evaluate->add_flag("--no-judge", eval.no_judge, "Skip the LLM-as-a-judge layer");

  ReportArgs rep;
  std::string rep_out;
  auto* report = app.add_subcommand("report", "Aggregate evaluated runs into tables");
  report->add_option("inputs", rep.inputs, "Run directories or evaluation.json files")->required();
  report->add_option("--out", rep_out, "Directory for report.txt and CSV files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e, out, err);
    return rc == 0 ? exit_code::kOk : exit_code::kConfig;
  }

  if (*generate) {
    if (!seed.empty()) gen.seed_fixtures = seed;
    return cmd_generate(gen, out, err).exit_code;
  }
  if (*evaluate) {
    if (!eval_config.empty()) eval.config = eval_config;
    return cmd_evaluate(eval, out, err);
  }
  if (!rep_out.empty()) rep.out_dir = rep_out;
  return cmd_report(rep, out, err);
}

}  // namespace c4mas
