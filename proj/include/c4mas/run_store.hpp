#pragma once

// Run persistence: `<root>/<run-id>/manifest.json`, `brief.json` and one
// directory per level instance holding its artifact files.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "c4mas/domain.hpp"
#include "c4mas/error.hpp"
#include "c4mas/orchestrator.hpp"
#include "c4mas/prompt.hpp"

namespace c4mas {

inline constexpr std::string_view kManifestSchemaVersion = "1.0";

struct RunMetadata {
  std::string model_id;
  std::string backend_id;
  std::string configuration;
  nlohmann::json config;
};

struct InstanceRecord {
  LevelInstance instance;
  bool complete = false;
  std::string reason;
};

/// A run read back from disk. Artifact files that are absent are simply not
/// in `artifacts`.
struct LoadedRun {
  std::filesystem::path dir;
  std::string run_id;
  nlohmann::json manifest;
  SystemBrief brief;
  std::vector<InstanceRecord> instances;
  std::vector<Artifact> artifacts;
  std::string model_id;
  std::string configuration;
  TokenUsage usage;

  const Artifact* find(ArtifactKind kind, const LevelInstance& inst) const {
    for (const auto& a : artifacts)
      if (a.kind == kind && a.instance() == inst) return &a;
    return nullptr;
  }
};

namespace detail {

inline void write_file(const std::filesystem::path& p, std::string_view content) {
  std::error_code ec;
  std::filesystem::create_directories(p.parent_path(), ec);
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::RunStoreError, "cannot write " + p.string(), p.string());
  out << content;
  if (!out) throw Error(ErrorCode::RunStoreError, "cannot write " + p.string(), p.string());
}

inline nlohmann::json instance_json(const LevelInstance& inst) {
  return {{"level", std::string(to_string(inst.level))},
          {"focus_container",
           inst.focus_container ? nlohmann::json(*inst.focus_container) : nlohmann::json()},
          {"dir", inst.dir_name()}};
}

inline LevelInstance instance_from_json(const nlohmann::json& j) {
  auto level = parse_level(j.at("level").get<std::string>());
  if (!level) throw Error(ErrorCode::RunStoreError, "bad level in manifest");
  LevelInstance inst{*level, std::nullopt};
  if (j.contains("focus_container") && j["focus_container"].is_string())
    inst.focus_container = j["focus_container"].get<std::string>();
  return inst;
}

inline nlohmann::json usage_json(const TokenUsage& u) {
  return {{"input_tokens", u.input_tokens},
          {"output_tokens", u.output_tokens},
          {"total_tokens", u.total()}};
}

inline std::string utc_timestamp() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

}  // namespace detail

inline std::string brief_hash(const SystemBrief& brief) {
  return text::fnv1a_hex(brief_to_json(brief).dump());
}

/// `<timestamp>-<configuration>-<brief hash prefix>`, suffixed when taken.
inline std::string allocate_run_id(const std::filesystem::path& root, const SystemBrief& brief,
                                   const std::string& configuration) {
  auto base = detail::utc_timestamp() + "-" + configuration + "-" + brief_hash(brief).substr(0, 8);
  auto id = base;
  for (int n = 2; std::filesystem::exists(root / id); ++n) id = base + "-" + std::to_string(n);
  return id;
}

inline nlohmann::json build_manifest(const std::string& run_id, const RunResult& result,
                                     const RunMetadata& meta) {
  nlohmann::json instances = nlohmann::json::array();
  for (const auto& [inst, st] : result.per_instance_status) {
    auto j = detail::instance_json(inst);
    j["status"] = st.complete ? "complete" : "partial";
    j["reason"] = st.reason;
    instances.push_back(std::move(j));
  }
  nlohmann::json artifacts = nlohmann::json::array();
  for (const auto& a : result.final_state.artifacts) {
    auto j = detail::instance_json(a.instance());
    j["kind"] = std::string(to_string(a.kind));
    j["sequence_number"] = a.sequence_number;
    j["file"] = a.instance().dir_name() + "/" + std::string(artifact_file_name(a.kind));
    j["usage"] = detail::usage_json(a.token_usage);
    if (a.kind == ArtifactKind::Transcript) {
      nlohmann::json msgs = nlohmann::json::array();
      for (const auto& m : a.messages)
        msgs.push_back({{"author_persona", m.author_persona},
                        {"turn_index", m.turn_index},
                        {"usage", detail::usage_json(m.token_usage)}});
      j["messages"] = std::move(msgs);
    }
    artifacts.push_back(std::move(j));
  }
  return {{"schema_version", kManifestSchemaVersion},
          {"run_id", run_id},
          {"model_id", meta.model_id},
          {"backend", meta.backend_id},
          {"configuration", meta.configuration},
          {"config", meta.config},
          {"brief_hash", brief_hash(result.final_state.brief)},
          {"brief_title", result.final_state.brief.title},
          {"instances", std::move(instances)},
          {"halted_at", result.halted_at ? nlohmann::json(std::string(to_string(*result.halted_at)))
                                         : nlohmann::json()},
          {"all_complete", result.all_complete()},
          {"usage", detail::usage_json(result.usage_total)},
          {"wall_time_ms", result.wall_time_ms},
          {"warnings", result.warnings},
          {"artifacts", std::move(artifacts)}};
}

/// Writes the run directory and returns its path.
inline std::filesystem::path save_run(const std::filesystem::path& root, const std::string& run_id,
                                      const RunResult& result, const RunMetadata& meta) {
  auto dir = root / run_id;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::RunStoreError, "cannot create " + dir.string(), dir.string());
  for (const auto& a : result.final_state.artifacts)
    detail::write_file(dir / a.instance().dir_name() / artifact_file_name(a.kind), a.content);
  detail::write_file(dir / "brief.json", brief_to_json(result.final_state.brief).dump(2) + "\n");
  detail::write_file(dir / "manifest.json", build_manifest(run_id, result, meta).dump(2) + "\n");
  return dir;
}

inline nlohmann::json read_json_file(const std::filesystem::path& p) {
  if (!std::filesystem::is_regular_file(p))
    throw Error(ErrorCode::RunStoreError, "missing " + p.string(), p.string());
  try {
    return nlohmann::json::parse(detail::read_text_file(p));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::RunStoreError, p.string() + " is not valid JSON: " + e.what(),
                p.string());
  }
}

inline LoadedRun load_run(const std::filesystem::path& dir) {
  LoadedRun run;
  run.dir = dir;
  run.manifest = read_json_file(dir / "manifest.json");
  try {
    const auto& m = run.manifest;
    run.run_id = m.at("run_id").get<std::string>();
    run.model_id = m.at("model_id").get<std::string>();
    run.configuration = m.at("configuration").get<std::string>();
    run.usage = {m.at("usage").at("input_tokens").get<std::uint64_t>(),
                 m.at("usage").at("output_tokens").get<std::uint64_t>()};
    for (const auto& j : m.at("instances")) {
      InstanceRecord r;
      r.instance = detail::instance_from_json(j);
      r.complete = j.at("status").get<std::string>() == "complete";
      r.reason = j.value("reason", "");
      run.instances.push_back(std::move(r));
    }
    for (const auto& j : m.at("artifacts")) {
      auto path = dir / j.at("file").get<std::string>();
      if (!std::filesystem::is_regular_file(path)) continue;
      Artifact a;
      auto inst = detail::instance_from_json(j);
      a.level = inst.level;
      a.focus_container = inst.focus_container;
      auto kind_name = j.at("kind").get<std::string>();
      bool known = false;
      for (auto k : kAllArtifactKinds)
        if (to_string(k) == kind_name) {
          a.kind = k;
          known = true;
        }
      if (!known) throw Error(ErrorCode::RunStoreError, "unknown artifact kind " + kind_name);
      a.sequence_number = j.at("sequence_number").get<std::uint64_t>();
      a.token_usage = {j.at("usage").at("input_tokens").get<std::uint64_t>(),
                       j.at("usage").at("output_tokens").get<std::uint64_t>()};
      a.content = detail::read_text_file(path);
      if (j.contains("messages"))
        for (const auto& mj : j.at("messages")) {
          Message msg;
          msg.author_persona = mj.at("author_persona").get<std::string>();
          msg.turn_index = mj.at("turn_index").get<std::size_t>();
          msg.token_usage = {mj.at("usage").at("input_tokens").get<std::uint64_t>(),
                             mj.at("usage").at("output_tokens").get<std::uint64_t>()};
          a.messages.push_back(std::move(msg));
        }
      run.artifacts.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::RunStoreError, "malformed manifest in " + dir.string() + ": " + e.what(),
                dir.string());
  }
  auto brief_path = dir / "brief.json";
  if (!std::filesystem::is_regular_file(brief_path))
    throw Error(ErrorCode::RunStoreError, "missing " + brief_path.string(), brief_path.string());
  run.brief = validate_brief(detail::read_text_file(brief_path), BriefFormat::Json);
  return run;
}

}  // namespace c4mas
