#pragma once

// Persona/task/context prompt assembly and the context selection rules.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "c4mas/domain.hpp"
#include "c4mas/error.hpp"

namespace c4mas {

enum class TaskKind { Analyze, Synthesize, StructureYaml, GeneratePlantuml };

inline constexpr TaskKind kAllTaskKinds[] = {TaskKind::Analyze, TaskKind::Synthesize,
                                             TaskKind::StructureYaml, TaskKind::GeneratePlantuml};

inline std::string_view to_string(TaskKind task) {
  switch (task) {
    case TaskKind::Analyze: return "ANALYZE";
    case TaskKind::Synthesize: return "SYNTHESIZE";
    case TaskKind::StructureYaml: return "STRUCTURE_YAML";
    case TaskKind::GeneratePlantuml: return "GENERATE_PLANTUML";
  }
  return "?";
}

/// Lower-case name used for template and fixture files.
inline std::string_view task_file_stem(TaskKind task) {
  switch (task) {
    case TaskKind::Analyze: return "analyze";
    case TaskKind::Synthesize: return "synthesize";
    case TaskKind::StructureYaml: return "structure_yaml";
    case TaskKind::GeneratePlantuml: return "generate_plantuml";
  }
  return "?";
}

/// Artifact kind a task produces.
inline ArtifactKind output_kind(TaskKind task) {
  switch (task) {
    case TaskKind::Analyze: return ArtifactKind::Transcript;
    case TaskKind::Synthesize: return ArtifactKind::AnalysisReport;
    case TaskKind::StructureYaml: return ArtifactKind::ViewYaml;
    case TaskKind::GeneratePlantuml: return ArtifactKind::PlantumlDiagram;
  }
  return ArtifactKind::Transcript;
}

struct Persona {
  std::string id;
  std::string display_name;
  std::string narrative;

  bool operator==(const Persona&) const = default;
};

struct ContextSelection {
  SystemBrief brief;
  Level level = Level::L1_Context;
  std::optional<std::string> focus_container;
  std::optional<Artifact> primary_input;
  std::vector<Artifact> supporting_artifacts;
  std::vector<Message> live_messages;
};

struct AssembledPrompt {
  std::string system_text;
  std::string user_text;
  std::optional<std::string> schema_guide;

  bool operator==(const AssembledPrompt&) const = default;

  std::size_t size() const {
    return system_text.size() + user_text.size() + (schema_guide ? schema_guide->size() : 0);
  }
};

// ---------------------------------------------------------------------------
// Built-in templates
// ---------------------------------------------------------------------------

namespace persona_ids {
inline constexpr std::string_view kProductOwner = "product_owner";
inline constexpr std::string_view kBusinessAnalyst = "business_analyst";
inline constexpr std::string_view kLeadSoftwareArchitect = "lead_software_architect";
inline constexpr std::string_view kSoftwareArchitect = "software_architect";
inline constexpr std::string_view kLeadDeveloper = "lead_developer";
inline constexpr std::string_view kDevOpsSpecialist = "devops_specialist";
inline constexpr std::string_view kSecuritySpecialist = "security_specialist";
inline constexpr std::string_view kSeniorDeveloper = "senior_developer";
inline constexpr std::string_view kDatabaseAdministrator = "database_administrator";
inline constexpr std::string_view kTechnicalWriter = "technical_writer";
inline constexpr std::string_view kPlantumlSpecialist = "plantuml_diagram_specialist";
inline constexpr std::string_view kPrincipalArchitect = "principal_architect";
inline constexpr std::string_view kCybersecurityExpert = "cybersecurity_expert";
inline constexpr std::string_view kRequirementsAnalyst = "requirements_analyst";
inline constexpr std::string_view kDiagramReviewer = "diagram_reviewer";
}  // namespace persona_ids

namespace detail {

struct PersonaDefault {
  std::string_view id;
  std::string_view display_name;
  std::string_view narrative;
};

inline constexpr PersonaDefault kDefaultPersonas[] = {
    {persona_ids::kProductOwner, "Product Owner",
     "You represent the business and the people who will use the system. Your goal is to make "
     "sure the architecture serves real users and delivers the stated requirements. You focus on "
     "who the users are, which goals they pursue, which outside organisations or services the "
     "system depends on, and what is out of scope. You contribute by naming actors and business "
     "capabilities plainly and by pushing back on anything that does not trace to a requirement."},
    {persona_ids::kBusinessAnalyst, "Business Analyst",
     "You translate requirements into precise interactions. Your goal is an unambiguous picture "
     "of how each actor and external system exchanges information with the system under design. "
     "You focus on use cases, data flowing in and out, and business rules hidden in the "
     "requirements. You contribute by listing interactions concretely and by flagging gaps or "
     "contradictions between requirements."},
    {persona_ids::kLeadSoftwareArchitect, "Lead Software Architect",
     "You own the overall technical vision. Your goal is a clean system context that later "
     "levels can refine without rework. You focus on the system boundary, the external systems "
     "that must be integrated, and the quality attributes that shape the architecture. You "
     "contribute by consolidating the discussion into a coherent boundary and by naming elements "
     "consistently."},
    {persona_ids::kSoftwareArchitect, "Software Architect",
     "You design the structure of the system. Your goal is a decomposition that satisfies the "
     "functional and non-functional requirements with sensible technology choices. You focus on "
     "responsibilities, communication paths, and trade-offs between options. You contribute by "
     "proposing concrete structures, stating the technology for each, and reusing names already "
     "established at earlier levels."},
    {persona_ids::kLeadDeveloper, "Lead Developer",
     "You are responsible for building what is designed. Your goal is an architecture the team "
     "can implement and maintain. You focus on frameworks, interfaces between parts, and "
     "implementation effort. You contribute by grounding proposals in practical technology and "
     "by pointing out where a design would be hard to build or test."},
    {persona_ids::kDevOpsSpecialist, "DevOps Specialist",
     "You run the system in production. Your goal is a deployable, observable and scalable "
     "set of runtime units. You focus on deployment boundaries, data stores, background "
     "processing, availability and monitoring. You contribute by asking how each unit is "
     "deployed, scaled and recovered."},
    {persona_ids::kSecuritySpecialist, "Security Specialist",
     "You protect the system and its data. Your goal is an architecture where trust boundaries, "
     "authentication and sensitive data handling are explicit. You focus on attack surface, "
     "access control, secrets and compliance constraints. You contribute by identifying threats "
     "for each proposed element and the controls that address them."},
    {persona_ids::kSeniorDeveloper, "Senior Developer",
     "You write and review most of the code. Your goal is cohesive components with clear "
     "interfaces. You focus on responsibilities, dependencies between components and the "
     "patterns used inside a container. You contribute by proposing component boundaries and "
     "naming them after what they do."},
    {persona_ids::kDatabaseAdministrator, "Database Administrator",
     "You own persistent data. Your goal is data access that is correct, efficient and safe. "
     "You focus on which components read or write which data, schemas, transactions and "
     "backups. You contribute by tying every data-handling component to the store it uses."},
    {persona_ids::kTechnicalWriter, "Technical Writer",
     "You turn discussions into clear documentation. Your goal is a structured analysis report "
     "that captures every decision, element and relationship agreed in the discussion, without "
     "inventing new ones. You write with headings, short paragraphs and bullet lists."},
    {persona_ids::kPlantumlSpecialist, "PlantUML Diagram Specialist",
     "You produce C4-PlantUML diagrams. Your goal is a diagram that compiles and faithfully "
     "shows every element and relationship of the structured view you are given, using the "
     "standard C4-PlantUML macros for the level."},
    {persona_ids::kPrincipalArchitect, "Principal Architect",
     "You review architecture work produced by other teams. Your goal is an honest critique of "
     "clarity and feasibility. You focus on whether the model is understandable, implementable "
     "and consistent across levels, and you name the most important risks."},
    {persona_ids::kCybersecurityExpert, "Cybersecurity Expert",
     "You perform red-team reviews of container architectures. Your goal is to find realistic "
     "vulnerabilities in the design: exposed interfaces, missing authentication, unprotected "
     "data stores, unsafe integrations. You rate every finding by severity."},
    {persona_ids::kRequirementsAnalyst, "Requirements Analyst",
     "You read system briefs and extract the key entities they mention: the human actors, the "
     "external systems and the core system itself. You only report what the brief states."},
    {persona_ids::kDiagramReviewer, "Diagram Reviewer",
     "You check whether architecture diagrams contain a given list of entities. An entity is "
     "present when an element represents it, even under a slightly different name."},
};

inline constexpr std::pair<std::string_view, std::string_view> kDefaultTasks[] = {
    {"analyze",
     "Task: ANALYZE.\n"
     "You are in a design workshop for the {{level_name}} level ({{level}}){{focus_clause}} of "
     "the system \"{{system_title}}\". This is turn {{turn}} of the discussion. Read the brief, "
     "the artifacts from earlier levels and the discussion so far, then contribute your "
     "perspective as {{persona}}. Build on what others said, resolve open questions, and keep "
     "element names consistent with earlier levels. Reply with your contribution only."},
    {"synthesize",
     "Task: SYNTHESIZE.\n"
     "Write the ANALYSIS_REPORT for the {{level_name}} level ({{level}}){{focus_clause}} of "
     "\"{{system_title}}\" from the workshop transcript given as primary input. Use markdown "
     "headings. Cover every element (people, systems, containers, data stores or components as "
     "appropriate for the level), their responsibilities and technologies, every relationship, "
     "and the key decisions and risks. Do not introduce elements that were not discussed."},
    {"structure_yaml",
     "Task: STRUCTURE_YAML.\n"
     "Convert the ANALYSIS_REPORT given as primary input into a VIEW_YAML document for the "
     "{{level_name}} level ({{level}}){{focus_clause}}. Follow the schema guide exactly. Reuse the "
     "aliases of elements already defined in the view of the preceding level. Output only the "
     "YAML document."},
    {"generate_plantuml",
     "Task: GENERATE_PLANTUML.\n"
     "Render the VIEW_YAML given as primary input as a C4-PlantUML diagram for the "
     "{{level_name}} level ({{level}}){{focus_clause}}. Declare every element with its alias and "
     "every relationship. Follow the syntax guide exactly. Output only the diagram source."},
    {"extract_entities",
     "Task: EXTRACT_ENTITIES.\n"
     "List the key entities mentioned in the system brief below: every human actor, every "
     "external system the system interacts with, and the core system itself. Follow the schema "
     "guide exactly and output only JSON."},
    {"verify_entities",
     "Task: VERIFY_ENTITIES.\n"
     "For each entity in the list below, decide whether the Context-level (L1) diagram and its "
     "view represent it. Follow the schema guide exactly and output only JSON."},
    {"architect_critique",
     "Task: ARCHITECT_CRITIQUE.\n"
     "Critique the architecture of \"{{system_title}}\" given by the analysis reports and "
     "diagrams below. Rate clarity and feasibility from 1 (poor) to 5 (excellent), list the "
     "key risks and give one recommendation for improvement. Follow the schema guide exactly "
     "and output only JSON."},
    {"security_red_team",
     "Task: SECURITY_RED_TEAM.\n"
     "Perform a red-team review of the Container-level (L2) architecture of "
     "\"{{system_title}}\" below. Identify potential vulnerabilities and rate each as low, "
     "medium, high or critical. Follow the schema guide exactly and output only JSON."},
};

inline constexpr std::pair<std::string_view, std::string_view> kDefaultSchemas[] = {
    {"structure_yaml",
     "VIEW_YAML schema:\n"
     "level: {{level}}\n"
     "elements:\n"
     "  - alias: snake_case_identifier      # unique, no spaces\n"
     "    name: Display Name\n"
     "    kind: Person | SoftwareSystem | ExternalSystem | Container | DataStore | Component\n"
     "    technology: optional text\n"
     "    description: optional text\n"
     "    external: true | false\n"
     "relationships:\n"
     "  - source: alias\n"
     "    destination: alias\n"
     "    description: text\n"
     "    technology: optional text\n"
     "Rules: L1 uses Person, SoftwareSystem and ExternalSystem only. L2 lists the system "
     "(SoftwareSystem), its Containers and DataStores, plus the people and external systems of "
     "L1. L3 lists the focus container first (kind Container, or DataStore when a data store is decomposed), its Components, and any L2 "
     "elements they talk to. Every relationship endpoint must be a declared alias."},
    {"generate_plantuml",
     "C4-PlantUML syntax guide:\n"
     "@startuml\n"
     "!include <C4/C4_Context> | <C4/C4_Container> | <C4/C4_Component>\n"
     "Person(alias, \"Name\", \"Description\")\n"
     "System(alias, \"Name\", \"Description\") / System_Ext(...)\n"
     "Container(alias, \"Name\", \"Technology\", \"Description\") / Container_Ext(...)\n"
     "ContainerDb(alias, \"Name\", \"Technology\", \"Description\")\n"
     "Component(alias, \"Name\", \"Technology\", \"Description\")\n"
     "System_Boundary(alias, \"Name\") { ... }     (L2: encloses the containers)\n"
     "Container_Boundary(alias, \"Name\") { ... }  (L3: encloses the components)\n"
     "Rel(from_alias, to_alias, \"Description\", \"Technology\")\n"
     "@enduml\n"
     "Use the aliases from the VIEW_YAML unchanged. Do not use any other macros."},
    {"extract_entities",
     "Output schema (JSON):\n"
     "{\"entities\": [{\"name\": \"Librarian\", \"role\": \"actor\"},\n"
     "                {\"name\": \"Email Service\", \"role\": \"external_system\"},\n"
     "                {\"name\": \"Library Management System\", \"role\": \"core_system\"}]}\n"
     "role is one of: actor, external_system, core_system."},
    {"verify_entities",
     "Output schema (JSON):\n"
     "{\"results\": [{\"name\": \"<entity name as given>\", \"present\": true}]}\n"
     "Include one result per entity in the list."},
    {"architect_critique",
     "Output schema (JSON):\n"
     "{\"clarity\": 1-5, \"feasibility\": 1-5, \"key_risks\": [\"...\"], "
     "\"recommendation\": \"...\"}"},
    {"security_red_team",
     "Output schema (JSON):\n"
     "{\"findings\": [{\"title\": \"...\", \"severity\": \"low|medium|high|critical\", "
     "\"affected_elements\": [\"alias\"], \"rationale\": \"...\"}]}\n"
     "Return an empty findings list if there are none."},
};

inline std::string read_text_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read " + p.string(), p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string title_case_id(std::string_view id) {
  std::string out;
  bool upper = true;
  for (char c : id) {
    if (c == '_' || c == '-') {
      out.push_back(' ');
      upper = true;
    } else {
      out.push_back(upper ? static_cast<char>(std::toupper(static_cast<unsigned char>(c))) : c);
      upper = false;
    }
  }
  return out;
}

}  // namespace detail

/// Replaces `{{name}}` with `values[name]`. Unknown placeholders are kept
/// verbatim so typos stay visible in the prompt.
inline std::string render_template(std::string_view tpl,
                                   const std::map<std::string, std::string, std::less<>>& values) {
  std::string out;
  std::size_t i = 0;
  while (i < tpl.size()) {
    auto open = tpl.find("{{", i);
    if (open == std::string_view::npos) {
      out.append(tpl.substr(i));
      break;
    }
    auto close = tpl.find("}}", open + 2);
    if (close == std::string_view::npos) {
      out.append(tpl.substr(i));
      break;
    }
    out.append(tpl.substr(i, open - i));
    auto name = text::trim_view(tpl.substr(open + 2, close - open - 2));
    if (auto it = values.find(name); it != values.end()) out.append(it->second);
    else out.append(tpl.substr(open, close + 2 - open));
    i = close + 2;
  }
  return out;
}

/// Personas, task instructions and schema guides. Starts from the built-in
/// defaults; `load` overrides any of them from a template directory laid out
/// as `personas/<id>.txt`, `tasks/<task>.txt`, `schemas/<task>_guide.txt`.
class PromptLibrary {
 public:
  static PromptLibrary defaults() {
    PromptLibrary lib;
    for (const auto& p : detail::kDefaultPersonas)
      lib.personas_[std::string(p.id)] =
          Persona{std::string(p.id), std::string(p.display_name), std::string(p.narrative)};
    for (const auto& [name, body] : detail::kDefaultTasks)
      lib.tasks_[std::string(name)] = std::string(body);
    for (const auto& [name, body] : detail::kDefaultSchemas)
      lib.schemas_[std::string(name)] = std::string(body);
    return lib;
  }

  static PromptLibrary load(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    auto lib = defaults();
    if (!fs::is_directory(dir))
      throw Error(ErrorCode::ConfigError, "template directory not found: " + dir.string(),
                  dir.string());
    auto each_txt = [&dir](std::string_view sub, auto&& fn) {
      auto d = dir / sub;
      if (!fs::is_directory(d)) return;
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(d))
        if (entry.is_regular_file() && entry.path().extension() == ".txt")
          files.push_back(entry.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) fn(f.stem().string(), text::trim(detail::read_text_file(f)));
    };
    each_txt("personas", [&lib](const std::string& id, std::string body) {
      auto& p = lib.personas_[id];
      if (p.id.empty()) {
        p.id = id;
        p.display_name = detail::title_case_id(id);
      }
      p.narrative = std::move(body);
    });
    each_txt("tasks", [&lib](const std::string& name, std::string body) {
      lib.tasks_[name] = std::move(body);
    });
    each_txt("schemas", [&lib](const std::string& name, std::string body) {
      constexpr std::string_view kSuffix = "_guide";
      if (name.size() > kSuffix.size() &&
          name.compare(name.size() - kSuffix.size(), kSuffix.size(), kSuffix) == 0)
        lib.schemas_[name.substr(0, name.size() - kSuffix.size())] = std::move(body);
    });
    return lib;
  }

  /// Writes every template to `dir` in the layout `load` reads.
  void write_to(const std::filesystem::path& dir) const {
    namespace fs = std::filesystem;
    for (auto sub : {"personas", "tasks", "schemas"}) fs::create_directories(dir / sub);
    auto write = [](const fs::path& p, const std::string& body) {
      std::ofstream out(p, std::ios::binary);
      out << body << "\n";
    };
    for (const auto& [id, p] : personas_) write(dir / "personas" / (id + ".txt"), p.narrative);
    for (const auto& [name, body] : tasks_) write(dir / "tasks" / (name + ".txt"), body);
    for (const auto& [name, body] : schemas_)
      write(dir / "schemas" / (name + "_guide.txt"), body);
  }

  const Persona& persona(std::string_view id) const {
    auto it = personas_.find(id);
    if (it == personas_.end())
      throw Error(ErrorCode::ConfigError, "unknown persona '" + std::string(id) + "'",
                  std::string(id));
    if (it->second.narrative.empty())
      throw Error(ErrorCode::ConfigError, "persona '" + std::string(id) + "' has no narrative",
                  std::string(id));
    return it->second;
  }

  const std::string& task_template(std::string_view name) const {
    auto it = tasks_.find(name);
    if (it == tasks_.end())
      throw Error(ErrorCode::ConfigError, "no task template '" + std::string(name) + "'",
                  std::string(name));
    return it->second;
  }

  std::optional<std::string> schema_guide(std::string_view name) const {
    auto it = schemas_.find(name);
    if (it == schemas_.end()) return std::nullopt;
    return it->second;
  }

  bool operator==(const PromptLibrary&) const = default;

 private:
  std::map<std::string, Persona, std::less<>> personas_;
  std::map<std::string, std::string, std::less<>> tasks_;
  std::map<std::string, std::string, std::less<>> schemas_;
};

// ---------------------------------------------------------------------------
// Teams and processing personas
// ---------------------------------------------------------------------------

/// Round-robin order of the collaborative team for a level.
inline std::vector<std::string> team_persona_ids(Level level) {
  using namespace persona_ids;
  switch (level) {
    case Level::L1_Context:
      return {std::string(kProductOwner), std::string(kBusinessAnalyst),
              std::string(kLeadSoftwareArchitect)};
    case Level::L2_Container:
      return {std::string(kSoftwareArchitect), std::string(kLeadDeveloper),
              std::string(kDevOpsSpecialist), std::string(kSecuritySpecialist)};
    case Level::L3_Component:
      return {std::string(kLeadDeveloper), std::string(kSeniorDeveloper),
              std::string(kDatabaseAdministrator), std::string(kSecuritySpecialist)};
  }
  return {};
}

inline std::vector<Persona> team_for_level(Level level,
                                           const PromptLibrary& lib = PromptLibrary::defaults()) {
  std::vector<Persona> team;
  for (const auto& id : team_persona_ids(level)) team.push_back(lib.persona(id));
  return team;
}

/// Fixed specialist persona of each processing task; the generalist used by
/// the single-agent baseline for ANALYZE.
inline std::string_view processing_persona_id(TaskKind task) {
  switch (task) {
    case TaskKind::Analyze: return persona_ids::kSoftwareArchitect;
    case TaskKind::Synthesize: return persona_ids::kTechnicalWriter;
    case TaskKind::StructureYaml: return persona_ids::kSoftwareArchitect;
    case TaskKind::GeneratePlantuml: return persona_ids::kPlantumlSpecialist;
  }
  return persona_ids::kSoftwareArchitect;
}

// ---------------------------------------------------------------------------
// Context selection
// ---------------------------------------------------------------------------

/// Context rules:
///   ANALYZE           brief + VIEW_YAMLs of lower levels + live messages
///   SYNTHESIZE        TRANSCRIPT of the instance
///   STRUCTURE_YAML    ANALYSIS_REPORT of the instance + preceding level VIEW_YAML
///   GENERATE_PLANTUML VIEW_YAML of the instance
/// At L3 every task also receives the L1 and L2 VIEW_YAMLs.
inline ContextSelection build_context(const PipelineState& state, const LevelInstance& instance,
                                      TaskKind task) {
  ContextSelection ctx;
  ctx.brief = state.brief;
  ctx.level = instance.level;
  ctx.focus_container = instance.focus_container;

  auto require = [&state](ArtifactKind kind, const LevelInstance& inst) -> const Artifact& {
    const Artifact* a = state.find(kind, inst);
    if (!a) {
      ArtifactKey key{kind, inst};
      throw Error(ErrorCode::MissingPrerequisite, "missing " + key.describe(), key.describe());
    }
    return *a;
  };
  auto add_view = [&](Level lvl, bool required) {
    LevelInstance inst{lvl, std::nullopt};
    if (required) ctx.supporting_artifacts.push_back(require(ArtifactKind::ViewYaml, inst));
    else if (const auto* a = state.find(ArtifactKind::ViewYaml, inst))
      ctx.supporting_artifacts.push_back(*a);
  };

  const bool at_l3 = instance.level == Level::L3_Component;
  switch (task) {
    case TaskKind::Analyze:
      if (instance.level != Level::L1_Context) {
        add_view(Level::L1_Context, instance.level == Level::L2_Container);
        if (at_l3) add_view(Level::L2_Container, true);
      }
      ctx.live_messages = state.messages;
      break;
    case TaskKind::Synthesize:
      if (at_l3) {
        add_view(Level::L1_Context, false);
        add_view(Level::L2_Container, false);
      }
      ctx.primary_input = require(ArtifactKind::Transcript, instance);
      break;
    case TaskKind::StructureYaml:
      if (at_l3) {
        add_view(Level::L1_Context, false);
        add_view(Level::L2_Container, true);
      } else if (instance.level == Level::L2_Container) {
        add_view(Level::L1_Context, true);
      }
      ctx.primary_input = require(ArtifactKind::AnalysisReport, instance);
      break;
    case TaskKind::GeneratePlantuml:
      if (at_l3) {
        add_view(Level::L1_Context, false);
        add_view(Level::L2_Container, false);
      }
      ctx.primary_input = require(ArtifactKind::ViewYaml, instance);
      break;
  }
  return ctx;
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

namespace detail {

inline std::map<std::string, std::string, std::less<>> placeholder_values(
    const Persona& persona, const ContextSelection& ctx) {
  std::map<std::string, std::string, std::less<>> v;
  v["level"] = std::string(to_string(ctx.level));
  v["level_name"] = std::string(level_name(ctx.level));
  v["focus"] = ctx.focus_container.value_or("");
  v["focus_clause"] =
      ctx.focus_container ? " for container '" + *ctx.focus_container + "'" : std::string();
  v["system_title"] = ctx.brief.title;
  v["persona"] = persona.display_name;
  v["turn"] = std::to_string(ctx.live_messages.size());
  return v;
}

inline std::string artifact_heading(const Artifact& a) {
  std::string h = std::string(to_string(a.kind)) + " (" + std::string(to_string(a.level));
  if (a.focus_container) h += ", container '" + *a.focus_container + "'";
  return h + ")";
}

}  // namespace detail

/// Pure function of (persona, task, context): identical inputs give
/// byte-identical prompts. Context order: brief, prior-level artifacts by
/// level ascending, live discussion, primary input last.
inline AssembledPrompt assemble_prompt(const PromptLibrary& lib, const Persona& persona,
                                       std::string_view task_name, const ContextSelection& ctx) {
  auto values = detail::placeholder_values(persona, ctx);
  AssembledPrompt p;
  p.system_text = "You are the " + persona.display_name + ".\n\n" + persona.narrative +
                  "\n\nYou take part in a C4 architecture modelling workflow for the system \"" +
                  ctx.brief.title + "\". Current level: " + std::string(to_string(ctx.level)) +
                  " (" + std::string(level_name(ctx.level)) + ")" + values["focus_clause"] + ".";

  std::string user = render_template(lib.task_template(task_name), values);
  user += "\n\n## System brief\n\n" + ctx.brief.render();

  auto supporting = ctx.supporting_artifacts;
  std::stable_sort(supporting.begin(), supporting.end(),
                   [](const Artifact& a, const Artifact& b) { return a.level < b.level; });
  if (!supporting.empty()) {
    user += "\n## Artifacts from earlier levels\n";
    for (const auto& a : supporting)
      user += "\n### " + detail::artifact_heading(a) + "\n\n" + text::trim(a.content) + "\n";
  }
  if (!ctx.live_messages.empty()) {
    user += "\n## Discussion so far\n\n" + render_transcript(ctx.live_messages);
  }
  if (ctx.primary_input) {
    user += "\n## Primary input: " + detail::artifact_heading(*ctx.primary_input) + "\n\n" +
            text::trim(ctx.primary_input->content) + "\n";
  }
  p.user_text = std::move(user);
  if (auto guide = lib.schema_guide(task_name)) p.schema_guide = render_template(*guide, values);
  return p;
}

inline AssembledPrompt assemble_prompt(const PromptLibrary& lib, const Persona& persona,
                                       TaskKind task, const ContextSelection& ctx) {
  return assemble_prompt(lib, persona, task_file_stem(task), ctx);
}

}  // namespace c4mas
