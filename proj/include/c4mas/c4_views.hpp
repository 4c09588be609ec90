#pragma once

// VIEW_YAML schema and the C4-PlantUML subset: parsing, validation and
// canonical emission for both.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include <yaml-cpp/yaml.h>

#include "c4mas/domain.hpp"
#include "c4mas/error.hpp"
#include "c4mas/text.hpp"

namespace c4mas {

// ---------------------------------------------------------------------------
// View model
// ---------------------------------------------------------------------------

enum class ElementKind { Person, SoftwareSystem, ExternalSystem, Container, DataStore, Component };

inline constexpr ElementKind kAllElementKinds[] = {
    ElementKind::Person,    ElementKind::SoftwareSystem, ElementKind::ExternalSystem,
    ElementKind::Container, ElementKind::DataStore,      ElementKind::Component};

inline std::string_view to_string(ElementKind kind) {
  switch (kind) {
    case ElementKind::Person: return "Person";
    case ElementKind::SoftwareSystem: return "SoftwareSystem";
    case ElementKind::ExternalSystem: return "ExternalSystem";
    case ElementKind::Container: return "Container";
    case ElementKind::DataStore: return "DataStore";
    case ElementKind::Component: return "Component";
  }
  return "?";
}

inline std::optional<ElementKind> parse_element_kind(std::string_view raw) {
  std::string s;
  for (char c : text::to_lower(text::trim_view(raw)))
    if (c != '_' && c != '-' && c != ' ') s.push_back(c);
  if (s == "person" || s == "actor") return ElementKind::Person;
  if (s == "softwaresystem" || s == "system") return ElementKind::SoftwareSystem;
  if (s == "externalsystem" || s == "systemext") return ElementKind::ExternalSystem;
  if (s == "container") return ElementKind::Container;
  if (s == "datastore" || s == "database" || s == "containerdb") return ElementKind::DataStore;
  if (s == "component") return ElementKind::Component;
  return std::nullopt;
}

struct Element {
  std::string alias;
  std::string name;
  ElementKind kind = ElementKind::Container;
  std::optional<std::string> technology;
  std::optional<std::string> description;
  bool external = false;

  bool operator==(const Element&) const = default;
};

struct Relationship {
  std::string source;
  std::string destination;
  std::string description;
  std::optional<std::string> technology;

  bool operator==(const Relationship&) const = default;
};

struct ViewModel {
  Level level = Level::L1_Context;
  std::vector<Element> elements;
  std::vector<Relationship> relationships;

  const Element* find(std::string_view alias) const {
    for (const auto& e : elements)
      if (e.alias == alias) return &e;
    return nullptr;
  }
  bool operator==(const ViewModel&) const = default;
};

struct ViewParseOptions {
  bool allow_self_loops = false;
};

namespace detail {

class YamlPath {
 public:
  explicit YamlPath(std::string root = {}) : path_(std::move(root)) {}
  YamlPath key(std::string_view k) const {
    return YamlPath(path_.empty() ? std::string(k) : path_ + "." + std::string(k));
  }
  YamlPath index(std::size_t i) const { return YamlPath(path_ + "[" + std::to_string(i) + "]"); }
  const std::string& str() const { return path_; }

 private:
  std::string path_;
};

[[noreturn]] inline void schema_error(const YamlPath& at, const std::string& what) {
  throw Error(ErrorCode::SchemaError, at.str() + ": " + what, at.str());
}

inline std::string yaml_scalar(const YAML::Node& n, const YamlPath& at) {
  if (!n.IsScalar()) schema_error(at, "expected a scalar");
  return n.as<std::string>();
}

inline std::optional<std::string> yaml_optional_text(const YAML::Node& n, const YamlPath& at) {
  if (!n || n.IsNull()) return std::nullopt;
  auto v = text::trim(yaml_scalar(n, at));
  if (v.empty()) return std::nullopt;
  return v;
}

inline bool yaml_bool(const YAML::Node& n, const YamlPath& at) {
  if (!n || n.IsNull()) return false;
  if (!n.IsScalar()) schema_error(at, "expected a boolean");
  auto s = text::to_lower(n.as<std::string>());
  if (s == "true" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "no" || s == "off") return false;
  schema_error(at, "expected a boolean, got '" + n.as<std::string>() + "'");
}

template <std::size_t N>
void reject_unknown_keys(const YAML::Node& map, const YamlPath& at,
                         const std::string_view (&allowed)[N]) {
  for (const auto& kv : map) {
    auto key = kv.first.as<std::string>();
    if (std::find(std::begin(allowed), std::end(allowed), key) == std::end(allowed))
      schema_error(at.key(key), "unknown key");
  }
}

}  // namespace detail

/// Parses a VIEW_YAML document. Markdown code fences around the document are
/// tolerated. `level`, when present in the document, must agree with `level`.
inline ViewModel parse_view_yaml(std::string_view raw, Level level,
                                 const ViewParseOptions& options = {}) {
  using detail::YamlPath;
  using detail::schema_error;
  auto body = text::strip_code_fence(raw);
  YAML::Node root;
  try {
    root = YAML::Load(body);
  } catch (const YAML::ParserException& e) {
    throw Error(ErrorCode::YamlSyntaxError,
                "line " + std::to_string(e.mark.line + 1) + ", column " +
                    std::to_string(e.mark.column + 1) + ": " + e.msg,
                std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1));
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::YamlSyntaxError, e.what());
  }
  const YamlPath top;
  if (!root.IsMap()) schema_error(YamlPath("<root>"), "expected a mapping");
  static constexpr std::string_view kTopKeys[] = {"level", "elements", "relationships"};
  detail::reject_unknown_keys(root, top, kTopKeys);

  ViewModel view;
  view.level = level;
  if (auto n = root["level"]; n && !n.IsNull()) {
    auto declared = parse_level(detail::yaml_scalar(n, top.key("level")));
    if (!declared) schema_error(top.key("level"), "unrecognized level");
    if (*declared != level)
      schema_error(top.key("level"), "declares " + std::string(to_string(*declared)) +
                                         " but " + std::string(to_string(level)) +
                                         " was expected");
  }

  auto elements = root["elements"];
  if (!elements) schema_error(top.key("elements"), "missing required key");
  if (!elements.IsNull() && !elements.IsSequence())
    schema_error(top.key("elements"), "expected a list");
  std::set<std::string, std::less<>> seen;
  static constexpr std::string_view kElementKeys[] = {"alias",       "name",        "kind",
                                                      "technology", "description", "external"};
  std::size_t i = 0;
  for (const auto& node : elements) {
    auto at = top.key("elements").index(i++);
    if (!node.IsMap()) schema_error(at, "expected a mapping");
    detail::reject_unknown_keys(node, at, kElementKeys);
    Element e;
    if (!node["alias"]) schema_error(at.key("alias"), "missing required key");
    e.alias = text::normalize_alias(detail::yaml_scalar(node["alias"], at.key("alias")));
    if (e.alias.empty()) schema_error(at.key("alias"), "alias is empty");
    if (!node["kind"]) schema_error(at.key("kind"), "missing required key");
    auto kind_text = detail::yaml_scalar(node["kind"], at.key("kind"));
    auto kind = parse_element_kind(kind_text);
    if (!kind) schema_error(at.key("kind"), "unknown element kind '" + kind_text + "'");
    e.kind = *kind;
    e.name = node["name"] ? text::trim(detail::yaml_scalar(node["name"], at.key("name"))) : "";
    if (e.name.empty()) e.name = e.alias;
    e.technology = detail::yaml_optional_text(node["technology"], at.key("technology"));
    e.description = detail::yaml_optional_text(node["description"], at.key("description"));
    e.external = detail::yaml_bool(node["external"], at.key("external"));
    if (e.kind == ElementKind::ExternalSystem) e.external = true;
    if (e.kind == ElementKind::SoftwareSystem && e.external) e.kind = ElementKind::ExternalSystem;
    if (!seen.insert(e.alias).second)
      throw Error(ErrorCode::DuplicateAlias, "alias '" + e.alias + "' declared twice", e.alias);
    view.elements.push_back(std::move(e));
  }

  static constexpr std::string_view kRelKeys[] = {"source", "destination", "description",
                                                  "technology"};
  if (auto rels = root["relationships"]; rels && !rels.IsNull()) {
    if (!rels.IsSequence()) schema_error(top.key("relationships"), "expected a list");
    std::size_t j = 0;
    for (const auto& node : rels) {
      auto at = top.key("relationships").index(j++);
      if (!node.IsMap()) schema_error(at, "expected a mapping");
      detail::reject_unknown_keys(node, at, kRelKeys);
      Relationship r;
      for (auto [field, target] : {std::pair{"source", &r.source},
                                   std::pair{"destination", &r.destination}}) {
        if (!node[field]) schema_error(at.key(field), "missing required key");
        *target = text::normalize_alias(detail::yaml_scalar(node[field], at.key(field)));
        if (!seen.count(*target))
          throw Error(ErrorCode::DanglingReference,
                      at.key(field).str() + " names undeclared alias '" + *target + "'", *target);
      }
      r.description = detail::yaml_optional_text(node["description"], at.key("description"))
                          .value_or("");
      r.technology = detail::yaml_optional_text(node["technology"], at.key("technology"));
      if (r.source == r.destination && !options.allow_self_loops)
        schema_error(at, "self-loop on '" + r.source + "'");
      view.relationships.push_back(std::move(r));
    }
  }
  return view;
}

/// Serializes a view to the VIEW_YAML schema.
inline std::string emit_view_yaml(const ViewModel& view) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "level" << YAML::Value << std::string(to_string(view.level));
  out << YAML::Key << "elements" << YAML::Value << YAML::BeginSeq;
  for (const auto& e : view.elements) {
    out << YAML::BeginMap;
    out << YAML::Key << "alias" << YAML::Value << e.alias;
    out << YAML::Key << "name" << YAML::Value << e.name;
    out << YAML::Key << "kind" << YAML::Value << std::string(to_string(e.kind));
    if (e.technology) out << YAML::Key << "technology" << YAML::Value << *e.technology;
    if (e.description) out << YAML::Key << "description" << YAML::Value << *e.description;
    out << YAML::Key << "external" << YAML::Value << e.external;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "relationships" << YAML::Value << YAML::BeginSeq;
  for (const auto& r : view.relationships) {
    out << YAML::BeginMap;
    out << YAML::Key << "source" << YAML::Value << r.source;
    out << YAML::Key << "destination" << YAML::Value << r.destination;
    out << YAML::Key << "description" << YAML::Value << r.description;
    if (r.technology) out << YAML::Key << "technology" << YAML::Value << *r.technology;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

// ---------------------------------------------------------------------------
// PlantUML-C4 subset
// ---------------------------------------------------------------------------

enum class BoundaryKind { System, Container };

struct Boundary {
  BoundaryKind kind = BoundaryKind::System;
  std::string alias;
  std::string label;
  /// Direct members: element aliases and nested boundary aliases.
  std::vector<std::string> members;
  std::optional<std::string> parent;

  bool operator==(const Boundary&) const = default;
};

struct Diagnostic {
  std::size_t line = 0;  // 1-based; 0 when not tied to a line
  ErrorCode code = ErrorCode::PumlSyntaxError;
  std::string message;

  std::string str() const {
    return (line ? "line " + std::to_string(line) + ": " : std::string()) + message;
  }
};

/// Parsed C4-PlantUML diagram. Boundaries are also listed in `declarations`
/// (as a SoftwareSystem or Container element) at the position they open.
struct DiagramModel {
  std::optional<Level> level;  // from the C4 include, if recognizable
  std::vector<std::string> includes;
  std::vector<Element> declarations;
  std::vector<Boundary> boundaries;
  std::vector<Relationship> relations;
  std::vector<std::string> directives;  // ignored layout/style lines
  std::vector<Diagnostic> warnings;
  std::string raw_text;

  const Element* find(std::string_view alias) const {
    for (const auto& e : declarations)
      if (e.alias == alias) return &e;
    return nullptr;
  }
  const Boundary* find_boundary(std::string_view alias) const {
    for (const auto& b : boundaries)
      if (b.alias == alias) return &b;
    return nullptr;
  }
  std::set<std::string> aliases() const {
    std::set<std::string> out;
    for (const auto& e : declarations) out.insert(e.alias);
    return out;
  }
};

struct PumlParseResult {
  DiagramModel model;
  std::vector<Diagnostic> errors;

  bool ok() const { return errors.empty(); }
};

namespace detail {

struct MacroSpec {
  ElementKind kind;
  bool external;
  bool has_technology;
};

inline const std::map<std::string, MacroSpec, std::less<>>& element_macros() {
  static const std::map<std::string, MacroSpec, std::less<>> table{
      {"Person", {ElementKind::Person, false, false}},
      {"Person_Ext", {ElementKind::Person, true, false}},
      {"System", {ElementKind::SoftwareSystem, false, false}},
      {"System_Ext", {ElementKind::ExternalSystem, true, false}},
      {"Container", {ElementKind::Container, false, true}},
      {"Container_Ext", {ElementKind::Container, true, true}},
      {"ContainerDb", {ElementKind::DataStore, false, true}},
      {"ContainerDb_Ext", {ElementKind::DataStore, true, true}},
      {"Component", {ElementKind::Component, false, true}},
      {"Component_Ext", {ElementKind::Component, true, true}},
      {"ComponentDb", {ElementKind::Component, false, true}},
  };
  return table;
}

inline bool has_technology_slot(ElementKind kind) {
  return kind == ElementKind::Container || kind == ElementKind::DataStore ||
         kind == ElementKind::Component;
}

inline bool is_layout_macro(std::string_view name) {
  static constexpr std::string_view kPrefixes[] = {"LAYOUT_", "SHOW_", "HIDE_", "Lay_",
                                                   "Update",  "Add",   "Set"};
  for (auto p : kPrefixes)
    if (name.substr(0, p.size()) == p) return true;
  return false;
}

inline bool is_rel_macro(std::string_view name) {
  static constexpr std::string_view kRel[] = {
      "Rel",      "Rel_U",    "Rel_D",     "Rel_L",      "Rel_R",       "Rel_Up",
      "Rel_Down", "Rel_Left", "Rel_Right", "Rel_Neighbor", "Rel_Back",  "Rel_Back_Neighbor"};
  return std::find(std::begin(kRel), std::end(kRel), name) != std::end(kRel);
}

struct MacroCall {
  std::string name;
  std::vector<std::string> positional;
  std::map<std::string, std::string, std::less<>> named;
  bool opens_block = false;
};

inline std::string unquote(std::string_view s) {
  s = text::trim_view(s);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

/// Parses `Name(arg, "arg", $k="v") [{]`. Returns nullopt if the line is not
/// shaped like a macro call; throws a message string on malformed calls.
inline std::optional<MacroCall> parse_macro_call(std::string_view line, std::string& error) {
  std::size_t i = 0;
  while (i < line.size() &&
         (std::isalnum(static_cast<unsigned char>(line[i])) || line[i] == '_'))
    ++i;
  if (i == 0 || i >= line.size() || line[i] != '(') return std::nullopt;
  MacroCall call;
  call.name = std::string(line.substr(0, i));
  ++i;
  std::vector<std::string> args;
  std::string current;
  bool in_quotes = false;
  int depth = 0;
  bool closed = false;
  for (; i < line.size(); ++i) {
    char c = line[i];
    if (c == '"') {
      in_quotes = !in_quotes;
      current.push_back(c);
    } else if (!in_quotes && c == '(') {
      ++depth;
      current.push_back(c);
    } else if (!in_quotes && c == ')') {
      if (depth == 0) {
        closed = true;
        ++i;
        break;
      }
      --depth;
      current.push_back(c);
    } else if (!in_quotes && c == ',' && depth == 0) {
      args.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!closed) {
    error = in_quotes ? "unterminated string in " + call.name : "expected ')' to close " + call.name;
    return std::nullopt;
  }
  if (!text::trim_view(current).empty() || !args.empty()) args.push_back(current);
  for (auto& raw : args) {
    auto arg = text::trim_view(raw);
    if (!arg.empty() && arg.front() == '$') {
      auto eq = arg.find('=');
      if (eq == std::string_view::npos) {
        error = "named argument without '=' in " + call.name;
        return std::nullopt;
      }
      call.named[std::string(text::trim_view(arg.substr(1, eq - 1)))] = unquote(arg.substr(eq + 1));
    } else {
      call.positional.push_back(unquote(arg));
    }
  }
  auto rest = text::trim_view(line.substr(i));
  if (rest == "{") {
    call.opens_block = true;
  } else if (!rest.empty()) {
    error = "unexpected trailing text '" + std::string(rest) + "' after " + call.name;
    return std::nullopt;
  }
  return call;
}

inline std::optional<Level> level_from_include(std::string_view include) {
  if (include.find("C4_Component") != std::string_view::npos) return Level::L3_Component;
  if (include.find("C4_Container") != std::string_view::npos) return Level::L2_Container;
  if (include.find("C4_Context") != std::string_view::npos) return Level::L1_Context;
  return std::nullopt;
}

inline bool is_ignored_keyword_line(std::string_view line) {
  static constexpr std::string_view kKeywords[] = {"title",  "skinparam", "hide",   "show",
                                                   "caption", "header",   "footer", "scale",
                                                   "left to right direction",
                                                   "top to bottom direction"};
  for (auto k : kKeywords) {
    if (text::starts_with_ci(line, k) &&
        (line.size() == k.size() || text::is_space(line[k.size()])))
      return true;
  }
  return false;
}

}  // namespace detail

/// Total parser for the C4-PlantUML subset: never throws, collects errors.
inline PumlParseResult analyze_plantuml(std::string_view raw) {
  PumlParseResult result;
  auto& model = result.model;
  model.raw_text = std::string(raw);
  auto error = [&result](std::size_t line, ErrorCode code, std::string msg) {
    result.errors.push_back({line, code, std::move(msg)});
  };

  auto lines = text::split_lines(raw);
  bool started = false, ended = false, in_block_comment = false;
  std::size_t skip_block_depth = 0;  // inside skinparam/legend blocks
  bool in_legend = false;
  std::vector<std::size_t> open_stack;  // indices into model.boundaries
  std::optional<std::size_t> pending_boundary;  // boundary awaiting '{' on next line
  std::set<std::string> declared;
  std::size_t last_line = 0;

  auto current_parent = [&]() -> std::optional<std::string> {
    if (open_stack.empty()) return std::nullopt;
    return model.boundaries[open_stack.back()].alias;
  };
  auto declare = [&](Element e, std::size_t line_no) {
    if (!declared.insert(e.alias).second) {
      error(line_no, ErrorCode::DuplicateAlias, "alias '" + e.alias + "' declared twice");
      return false;
    }
    if (!open_stack.empty()) model.boundaries[open_stack.back()].members.push_back(e.alias);
    model.declarations.push_back(std::move(e));
    return true;
  };

  for (std::size_t idx = 0; idx < lines.size(); ++idx) {
    const std::size_t line_no = idx + 1;
    auto line = text::trim_view(lines[idx]);
    last_line = line_no;

    if (in_block_comment) {
      if (line.find("'/") != std::string_view::npos) in_block_comment = false;
      continue;
    }
    if (line.substr(0, 2) == "/'") {
      if (line.find("'/", 2) == std::string_view::npos) in_block_comment = true;
      continue;
    }
    if (line.empty() || line.front() == '\'') continue;

    if (!started) {
      if (text::starts_with_ci(line, "@startuml")) {
        started = true;
      } else {
        model.warnings.push_back({line_no, ErrorCode::PumlSyntaxError,
                                  "text before @startuml ignored"});
      }
      continue;
    }
    if (ended) continue;
    if (text::starts_with_ci(line, "@enduml")) {
      ended = true;
      continue;
    }
    if (text::starts_with_ci(line, "@startuml")) {
      error(line_no, ErrorCode::PumlSyntaxError, "nested @startuml");
      continue;
    }

    if (in_legend) {
      if (text::starts_with_ci(line, "endlegend") || text::starts_with_ci(line, "end legend"))
        in_legend = false;
      continue;
    }
    if (skip_block_depth > 0) {
      if (line == "}") --skip_block_depth;
      else if (line.back() == '{') ++skip_block_depth;
      continue;
    }

    if (pending_boundary) {
      if (line == "{") {
        open_stack.push_back(*pending_boundary);
        pending_boundary.reset();
        continue;
      }
      // A boundary macro without a block is treated as a plain declaration.
      pending_boundary.reset();
    }

    if (line.front() == '!') {
      if (text::starts_with_ci(line, "!include")) {
        auto space = line.find_first_of(" \t");
        auto target = space == std::string_view::npos ? std::string_view{}
                                                      : text::trim_view(line.substr(space));
        if (target.empty()) {
          error(line_no, ErrorCode::PumlSyntaxError, "expected include target after !include");
          continue;
        }
        model.includes.emplace_back(target);
        if (auto lvl = detail::level_from_include(target); lvl && !model.level) model.level = lvl;
      } else {
        model.directives.emplace_back(line);
      }
      continue;
    }
    if (line == "}") {
      if (open_stack.empty()) {
        error(line_no, ErrorCode::UnbalancedBoundary, "'}' without an open boundary");
      } else {
        open_stack.pop_back();
      }
      continue;
    }
    if (text::starts_with_ci(line, "legend")) {
      in_legend = true;
      model.directives.emplace_back(line);
      continue;
    }
    if (detail::is_ignored_keyword_line(line)) {
      model.directives.emplace_back(line);
      if (line.back() == '{') ++skip_block_depth;
      continue;
    }

    std::string call_error;
    auto call = detail::parse_macro_call(line, call_error);
    if (!call) {
      error(line_no, ErrorCode::PumlSyntaxError,
            call_error.empty() ? "expected a C4 macro call, got '" + std::string(line) + "'"
                               : call_error);
      continue;
    }

    const auto& macros = detail::element_macros();
    if (auto it = macros.find(call->name); it != macros.end()) {
      if (call->opens_block) {
        error(line_no, ErrorCode::PumlSyntaxError, call->name + " cannot open a block");
        continue;
      }
      if (call->positional.size() < 2) {
        error(line_no, ErrorCode::PumlSyntaxError,
              "expected (alias, label, ...) for " + call->name);
        continue;
      }
      const auto& spec = it->second;
      Element e;
      e.alias = text::normalize_alias(call->positional[0]);
      e.name = text::trim(call->positional[1]);
      e.kind = spec.kind;
      e.external = spec.external;
      std::size_t next = 2;
      if (spec.has_technology) {
        if (call->positional.size() > next && !text::trim_view(call->positional[next]).empty())
          e.technology = text::trim(call->positional[next]);
        ++next;
      }
      if (call->positional.size() > next && !text::trim_view(call->positional[next]).empty())
        e.description = text::trim(call->positional[next]);
      if (auto t = call->named.find("techn"); t != call->named.end() && !t->second.empty())
        e.technology = t->second;
      if (auto d = call->named.find("descr"); d != call->named.end() && !d->second.empty())
        e.description = d->second;
      if (!detail::has_technology_slot(e.kind)) e.technology.reset();
      if (e.alias.empty()) {
        error(line_no, ErrorCode::PumlSyntaxError, "empty alias in " + call->name);
        continue;
      }
      declare(std::move(e), line_no);
      continue;
    }

    if (call->name == "System_Boundary" || call->name == "Container_Boundary") {
      if (call->positional.size() < 2) {
        error(line_no, ErrorCode::PumlSyntaxError,
              "expected (alias, label) for " + call->name);
        continue;
      }
      Boundary b;
      b.kind = call->name == "System_Boundary" ? BoundaryKind::System : BoundaryKind::Container;
      b.alias = text::normalize_alias(call->positional[0]);
      b.label = text::trim(call->positional[1]);
      b.parent = current_parent();
      Element as_element;
      as_element.alias = b.alias;
      as_element.name = b.label;
      as_element.kind =
          b.kind == BoundaryKind::System ? ElementKind::SoftwareSystem : ElementKind::Container;
      if (!declare(std::move(as_element), line_no)) continue;
      model.boundaries.push_back(std::move(b));
      if (call->opens_block) open_stack.push_back(model.boundaries.size() - 1);
      else pending_boundary = model.boundaries.size() - 1;
      continue;
    }

    if (detail::is_rel_macro(call->name)) {
      if (call->opens_block || call->positional.size() < 3) {
        error(line_no, ErrorCode::PumlSyntaxError,
              "expected (from, to, label[, technology]) for " + call->name);
        continue;
      }
      Relationship r;
      r.source = text::normalize_alias(call->positional[0]);
      r.destination = text::normalize_alias(call->positional[1]);
      if (call->name.rfind("Rel_Back", 0) == 0) std::swap(r.source, r.destination);
      r.description = text::trim(call->positional[2]);
      if (call->positional.size() > 3 && !text::trim_view(call->positional[3]).empty())
        r.technology = text::trim(call->positional[3]);
      if (auto t = call->named.find("techn"); t != call->named.end() && !t->second.empty())
        r.technology = t->second;
      model.relations.push_back(std::move(r));
      continue;
    }

    if (detail::is_layout_macro(call->name)) {
      model.directives.emplace_back(line);
      continue;
    }

    error(line_no, ErrorCode::PumlSyntaxError, "unknown macro '" + call->name + "'");
  }

  if (!started) {
    error(0, ErrorCode::MissingStartTag, "no @startuml found");
    return result;
  }
  if (!open_stack.empty()) {
    error(last_line, ErrorCode::UnbalancedBoundary,
          "boundary '" + model.boundaries[open_stack.back()].alias + "' is never closed");
  }
  if (!ended) error(last_line, ErrorCode::PumlSyntaxError, "expected @enduml");

  for (const auto& r : model.relations) {
    for (const auto* end : {&r.source, &r.destination}) {
      if (!declared.count(*end))
        model.warnings.push_back(
            {0, ErrorCode::DanglingReference, "relation references undeclared '" + *end + "'"});
    }
  }
  return result;
}

/// Throwing wrapper over analyze_plantuml: raises the first error found.
inline DiagramModel parse_plantuml(std::string_view raw) {
  auto result = analyze_plantuml(raw);
  if (!result.ok()) {
    const auto& first = result.errors.front();
    throw Error(first.code, first.str(), std::to_string(first.line));
  }
  return std::move(result.model);
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

inline std::string_view standard_include(Level level) {
  switch (level) {
    case Level::L1_Context: return "<C4/C4_Context>";
    case Level::L2_Container: return "<C4/C4_Container>";
    case Level::L3_Component: return "<C4/C4_Component>";
  }
  return "<C4/C4_Context>";
}

inline std::string_view element_macro(const Element& e) {
  switch (e.kind) {
    case ElementKind::Person: return e.external ? "Person_Ext" : "Person";
    case ElementKind::SoftwareSystem: return "System";
    case ElementKind::ExternalSystem: return "System_Ext";
    case ElementKind::Container: return e.external ? "Container_Ext" : "Container";
    case ElementKind::DataStore: return e.external ? "ContainerDb_Ext" : "ContainerDb";
    case ElementKind::Component: return e.external ? "Component_Ext" : "Component";
  }
  return "System";
}

namespace detail {

inline std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('\'');
    else if (c == '\n' || c == '\r') out.push_back(' ');
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

/// Shared renderer: declarations in order, each boundary opening where its
/// element appears and enclosing the members that follow it.
inline std::string render_diagram(const std::vector<std::string>& includes,
                                  const std::vector<Element>& declarations,
                                  const std::vector<Boundary>& boundaries,
                                  const std::vector<Relationship>& relations) {
  std::map<std::string, const Boundary*, std::less<>> boundary_by_alias;
  std::map<std::string, std::string, std::less<>> parent_of;
  for (const auto& b : boundaries) {
    boundary_by_alias[b.alias] = &b;
    for (const auto& m : b.members) parent_of[m] = b.alias;
  }
  std::string out = "@startuml\n";
  for (const auto& inc : includes) out += "!include " + inc + "\n";
  out += "\n";
  std::vector<std::string> stack;
  auto indent = [&stack]() { return std::string(2 * stack.size(), ' '); };
  for (const auto& e : declarations) {
    std::optional<std::string> parent;
    if (auto it = parent_of.find(e.alias); it != parent_of.end()) parent = it->second;
    while (!stack.empty() && (!parent || stack.back() != *parent)) {
      stack.pop_back();
      out += indent() + "}\n";
    }
    if (auto b = boundary_by_alias.find(e.alias); b != boundary_by_alias.end()) {
      const char* macro =
          b->second->kind == BoundaryKind::System ? "System_Boundary" : "Container_Boundary";
      out += indent() + macro + "(" + e.alias + ", " + quote(b->second->label) + ") {\n";
      stack.push_back(e.alias);
      continue;
    }
    std::string line = std::string(element_macro(e)) + "(" + e.alias + ", " + quote(e.name);
    if (has_technology_slot(e.kind)) {
      if (e.technology || e.description) line += ", " + quote(e.technology.value_or(""));
    }
    if (e.description) line += ", " + quote(*e.description);
    out += indent() + line + ")\n";
  }
  while (!stack.empty()) {
    stack.pop_back();
    out += indent() + "}\n";
  }
  if (!relations.empty()) out += "\n";
  for (const auto& r : relations) {
    out += "Rel(" + r.source + ", " + r.destination + ", " + quote(r.description);
    if (r.technology) out += ", " + quote(*r.technology);
    out += ")\n";
  }
  out += "@enduml\n";
  return out;
}

}  // namespace detail

/// The element (if any) that becomes the enclosing boundary when a view is
/// rendered: the first internal SoftwareSystem at L2, the first internal
/// Container or DataStore at L3.
inline const Element* boundary_owner(const ViewModel& view) {
  for (const auto& e : view.elements) {
    if (e.external) continue;
    if (view.level == Level::L2_Container && e.kind == ElementKind::SoftwareSystem) return &e;
    if (view.level == Level::L3_Component &&
        (e.kind == ElementKind::Container || e.kind == ElementKind::DataStore))
      return &e;
  }
  return nullptr;
}

inline bool is_boundary_member(const ViewModel& view, const Element& e) {
  if (e.external) return false;
  if (view.level == Level::L2_Container)
    return e.kind == ElementKind::Container || e.kind == ElementKind::DataStore;
  if (view.level == Level::L3_Component) return e.kind == ElementKind::Component;
  return false;
}

/// Canonical C4-PlantUML rendering of a view.
inline std::string emit_plantuml(const ViewModel& view) {
  std::vector<Boundary> boundaries;
  std::vector<Element> declarations;
  const Element* owner = boundary_owner(view);
  if (owner) {
    Boundary b;
    b.kind = view.level == Level::L2_Container ? BoundaryKind::System : BoundaryKind::Container;
    b.alias = owner->alias;
    b.label = owner->name;
    for (const auto& e : view.elements)
      if (is_boundary_member(view, e)) b.members.push_back(e.alias);
    boundaries.push_back(std::move(b));
  }
  // Members are moved directly after the boundary so the block stays contiguous.
  for (const auto& e : view.elements) {
    if (owner && is_boundary_member(view, e)) continue;
    declarations.push_back(e);
    if (owner && e.alias == owner->alias) {
      for (const auto& m : view.elements)
        if (is_boundary_member(view, m)) declarations.push_back(m);
    }
  }
  return detail::render_diagram({std::string(standard_include(view.level))}, declarations,
                                boundaries, view.relationships);
}

/// Canonical re-rendering of a parsed diagram (layout directives dropped).
inline std::string emit_plantuml(const DiagramModel& diagram) {
  return detail::render_diagram(diagram.includes, diagram.declarations, diagram.boundaries,
                                diagram.relations);
}

// ---------------------------------------------------------------------------
// Compilation check
// ---------------------------------------------------------------------------

enum class CompileMode { InternalValidator, OfficialRunner };

inline std::string_view to_string(CompileMode mode) {
  return mode == CompileMode::OfficialRunner ? "OfficialRunner" : "InternalValidator";
}

struct CompileResult {
  bool ok = false;
  CompileMode mode = CompileMode::InternalValidator;
  std::vector<std::string> diagnostics;
};

namespace detail {

inline std::optional<std::filesystem::path> resolve_executable(const std::string& name) {
  namespace fs = std::filesystem;
  auto executable = [](const fs::path& p) {
    std::error_code ec;
    return fs::is_regular_file(p, ec) && ::access(p.c_str(), X_OK) == 0;
  };
  if (name.empty()) return std::nullopt;
  if (name.find('/') != std::string::npos) {
    if (executable(name)) return fs::path(name);
    return std::nullopt;
  }
  const char* path_env = std::getenv("PATH");
  if (!path_env) return std::nullopt;
  std::string_view rest(path_env);
  while (!rest.empty()) {
    auto colon = rest.find(':');
    auto dir = rest.substr(0, colon);
    if (!dir.empty() && executable(fs::path(dir) / name)) return fs::path(dir) / name;
    if (colon == std::string_view::npos) break;
    rest.remove_prefix(colon + 1);
  }
  return std::nullopt;
}

inline std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out.push_back(c);
  }
  return out + "'";
}

inline std::mutex& runner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

/// Compiles one diagram. InternalValidator: analyze_plantuml reports no
/// errors. OfficialRunner: `<runner> -syntax <file>` exits with status 0.
inline CompileResult check_compilation(std::string_view diagram_text, CompileMode mode,
                                       const std::string& runner_path = {}) {
  CompileResult result;
  result.mode = mode;
  if (mode == CompileMode::InternalValidator) {
    auto parsed = analyze_plantuml(diagram_text);
    result.ok = parsed.ok();
    for (const auto& d : parsed.errors) result.diagnostics.push_back(d.str());
    return result;
  }
  auto runner = detail::resolve_executable(runner_path);
  if (!runner)
    throw Error(ErrorCode::RunnerNotFound, "PlantUML runner '" + runner_path + "' not found",
                runner_path);
  namespace fs = std::filesystem;
  std::lock_guard lock(detail::runner_mutex());
  auto dir = fs::temp_directory_path();
  auto file = dir / ("c4mas_compile_" + std::to_string(::getpid()) + "_" +
                     text::fnv1a_hex(diagram_text) + ".puml");
  {
    std::ofstream out(file, std::ios::binary);
    out << diagram_text;
  }
  auto log = fs::path(file).replace_extension(".log");
  auto cmd = detail::shell_quote(runner->string()) + " -syntax " +
             detail::shell_quote(file.string()) + " > " + detail::shell_quote(log.string()) +
             " 2>&1";
  int status = std::system(cmd.c_str());
  result.ok = status != -1 && WIFEXITED(status) && WEXITSTATUS(status) == 0;
  {
    std::ifstream in(log);
    std::string line;
    while (std::getline(in, line))
      if (!text::trim_view(line).empty()) result.diagnostics.push_back(line);
  }
  std::error_code ec;
  fs::remove(file, ec);
  fs::remove(log, ec);
  return result;
}

}  // namespace c4mas
