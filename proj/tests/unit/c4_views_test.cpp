#include <gtest/gtest.h>

#include <map>
#include <random>

#include "c4mas/c4_views.hpp"
#include "test_support.hpp"

namespace c4mas {
namespace {

using testing::error_code_of;

constexpr const char* kMinimalL1 = R"(
level: L1
elements:
  - alias: customer
    name: Customer
    kind: Person
  - alias: shop
    name: Shop
    kind: SoftwareSystem
relationships:
  - source: customer
    destination: shop
    description: Buys from
)";

ViewModel library_view(const std::string& dir, Level level) {
  return parse_view_yaml(
      testing::read_file(testing::library_fixtures() / dir / "structure_yaml.yaml"), level);
}

TEST(ViewYamlTest, MinimalL1) {
  auto v = parse_view_yaml(kMinimalL1, Level::L1_Context);
  EXPECT_EQ(v.elements.size(), 2u);
  EXPECT_EQ(v.relationships.size(), 1u);
  EXPECT_EQ(v.elements[0].kind, ElementKind::Person);
}

TEST(ViewYamlTest, DanglingReferenceNamesTheAlias) {
  std::string raw = std::string(kMinimalL1) +
                    "  - source: shop\n    destination: mailer\n    description: Sends\n";
  try {
    parse_view_yaml(raw, Level::L1_Context);
    FAIL() << "expected DanglingReference";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DanglingReference);
    EXPECT_EQ(e.subject(), "mailer");
  }
}

TEST(ViewYamlTest, ParseErrors) {
  EXPECT_EQ(error_code_of([] { parse_view_yaml("elements: [", Level::L1_Context); }),
            ErrorCode::YamlSyntaxError);
  EXPECT_EQ(error_code_of([] {
              parse_view_yaml("elements:\n  - alias: a\n    name: A\n    kind: Widget\n",
                              Level::L1_Context);
            }),
            ErrorCode::SchemaError);
  EXPECT_EQ(error_code_of([] {
              parse_view_yaml(
                  "elements:\n  - {alias: a, name: A, kind: Person}\n"
                  "  - {alias: a, name: B, kind: Person}\n",
                  Level::L1_Context);
            }),
            ErrorCode::DuplicateAlias);
}

TEST(ViewYamlTest, SelfLoopsDependOnOptions) {
  std::string raw = std::string(kMinimalL1) +
                    "  - source: shop\n    destination: shop\n    description: Calls itself\n";
  EXPECT_TRUE(error_code_of([&] { parse_view_yaml(raw, Level::L1_Context); }).has_value());
  ViewParseOptions opts;
  opts.allow_self_loops = true;
  EXPECT_EQ(parse_view_yaml(raw, Level::L1_Context, opts).relationships.size(), 2u);
}

TEST(ViewYamlTest, LibraryL2KindCounts) {
  auto v = library_view("L2", Level::L2_Container);
  std::map<ElementKind, int> counts;
  for (const auto& e : v.elements) ++counts[e.kind];
  EXPECT_EQ(counts[ElementKind::Container], 4);
  EXPECT_EQ(counts[ElementKind::DataStore], 1);
  EXPECT_EQ(counts[ElementKind::ExternalSystem], 2);
}

TEST(ViewYamlTest, EmitParseRoundTrip) {
  auto v = library_view("L2", Level::L2_Container);
  auto again = parse_view_yaml(emit_view_yaml(v), Level::L2_Container);
  EXPECT_EQ(emit_view_yaml(again), emit_view_yaml(v));
  EXPECT_EQ(again.elements.size(), v.elements.size());
}

TEST(PlantumlTest, LibraryL2Diagram) {
  auto d = parse_plantuml(
      testing::read_file(testing::library_fixtures() / "L2/generate_plantuml.puml"));
  EXPECT_EQ(d.level, Level::L2_Container);
  ASSERT_EQ(d.boundaries.size(), 1u);
  const auto& b = d.boundaries[0];
  EXPECT_EQ(b.kind, BoundaryKind::System);
  EXPECT_EQ(b.alias, "library_system");
  EXPECT_EQ(b.members, (std::vector<std::string>{"web_app", "api_app", "search_service",
                                                 "notification_worker", "library_db"}));
  ASSERT_NE(d.find("library_db"), nullptr);
  EXPECT_EQ(d.find("library_db")->kind, ElementKind::DataStore);
  EXPECT_EQ(d.find("library_db")->technology, "PostgreSQL 15");
  ASSERT_NE(d.find("email_service"), nullptr);
  EXPECT_TRUE(d.find("email_service")->external);
  EXPECT_EQ(d.relations.size(), 9u);
  EXPECT_EQ(d.aliases(), (std::set<std::string>{"member", "librarian", "email_service",
                                                "payment_gateway", "library_system", "web_app",
                                                "api_app", "search_service",
                                                "notification_worker", "library_db"}));
}

TEST(PlantumlTest, EveryLibraryDiagramCompiles) {
  for (const auto& dir : {"L1", "L2", "L3_web_app", "L3_api_app", "L3_search_service",
                          "L3_notification_worker", "L3_library_db"}) {
    auto r = check_compilation(
        text::strip_code_fence(
            testing::read_file(testing::library_fixtures() / dir / "generate_plantuml.puml")),
        CompileMode::InternalValidator);
    EXPECT_TRUE(r.ok) << dir << ": " << text::join(r.diagnostics, "; ");
  }
}

TEST(PlantumlTest, MissingStartTag) {
  EXPECT_EQ(error_code_of([] { parse_plantuml("Person(a, \"A\")\n@enduml\n"); }),
            ErrorCode::MissingStartTag);
}

TEST(PlantumlTest, UnclosedBoundary) {
  EXPECT_EQ(error_code_of([] {
              parse_plantuml("@startuml\nSystem_Boundary(s, \"S\") {\nContainer(c, \"C\")\n@enduml\n");
            }),
            ErrorCode::UnbalancedBoundary);
}

TEST(PlantumlTest, UnknownMacroFailsInternalValidation) {
  auto r = check_compilation("@startuml\nPerson(a, \"A\")\nWidget(b, \"B\")\n@enduml\n",
                             CompileMode::InternalValidator);
  EXPECT_FALSE(r.ok);
  ASSERT_FALSE(r.diagnostics.empty());
  EXPECT_NE(r.diagnostics[0].find("3"), std::string::npos);
}

TEST(PlantumlTest, LayoutDirectivesAreIgnored) {
  auto d = parse_plantuml(
      "@startuml\n!include <C4/C4_Context>\nLAYOUT_WITH_LEGEND()\nskinparam backgroundColor #FFF\n"
      "Person(a, \"A\")\nSystem(b, \"B\")\nRel(a, b, \"Uses\")\nLay_R(a, b)\nSHOW_LEGEND()\n@enduml\n");
  EXPECT_EQ(d.declarations.size(), 2u);
  EXPECT_EQ(d.relations.size(), 1u);
  EXPECT_EQ(d.level, Level::L1_Context);
}

TEST(EmitTest, NoRelationshipsMeansNoRelLines) {
  ViewModel v;
  v.level = Level::L1_Context;
  v.elements.push_back({"a", "A", ElementKind::Person, std::nullopt, std::nullopt, false});
  auto text = emit_plantuml(v);
  EXPECT_EQ(text.find("Rel("), std::string::npos);
}

TEST(EmitTest, DataStoreBecomesContainerDb) {
  auto text = emit_plantuml(library_view("L2", Level::L2_Container));
  EXPECT_NE(text.find("ContainerDb(library_db, \"Library Database\", \"PostgreSQL 15\""),
            std::string::npos);
  EXPECT_NE(text.find("System_Boundary(library_system"), std::string::npos);
}

TEST(EmitTest, DoubleQuotesInNamesBecomeApostrophes) {
  ViewModel v;
  v.level = Level::L1_Context;
  v.elements.push_back({"a", "The \"A\" team", ElementKind::Person, std::nullopt, std::nullopt, false});
  auto d = parse_plantuml(emit_plantuml(v));
  ASSERT_NE(d.find("a"), nullptr);
  EXPECT_EQ(d.find("a")->name, "The 'A' team");
}

/// Compares a parsed diagram against the view it was emitted from.
void expect_matches_view(const ViewModel& v, const DiagramModel& d) {
  std::set<std::string> view_aliases;
  for (const auto& e : v.elements) view_aliases.insert(e.alias);
  EXPECT_EQ(d.aliases(), view_aliases);
  const Element* owner = boundary_owner(v);
  for (const auto& e : v.elements) {
    if (owner && e.alias == owner->alias) {
      const Boundary* b = d.find_boundary(e.alias);
      ASSERT_NE(b, nullptr) << e.alias;
      EXPECT_EQ(b->label, e.name);
      continue;
    }
    const Element* got = d.find(e.alias);
    ASSERT_NE(got, nullptr) << e.alias;
    EXPECT_EQ(got->kind, e.kind) << e.alias;
    EXPECT_EQ(got->name, e.name) << e.alias;
    EXPECT_EQ(got->technology, e.technology) << e.alias;
    EXPECT_EQ(got->description, e.description) << e.alias;
    EXPECT_EQ(got->external, e.external) << e.alias;
  }
  ASSERT_EQ(d.relations.size(), v.relationships.size());
  for (std::size_t i = 0; i < d.relations.size(); ++i) {
    EXPECT_EQ(d.relations[i].source, v.relationships[i].source);
    EXPECT_EQ(d.relations[i].destination, v.relationships[i].destination);
    EXPECT_EQ(d.relations[i].description, v.relationships[i].description);
    EXPECT_EQ(d.relations[i].technology, v.relationships[i].technology);
  }
}

TEST(RoundTripProperty, RandomViews) {
  std::mt19937 rng(7);
  for (int i = 0; i < 100; ++i) {
    auto v = testing::random_view(rng);
    SCOPED_TRACE("case " + std::to_string(i) + "\n" + emit_view_yaml(v));
    auto emitted = emit_plantuml(v);
    auto parsed = parse_plantuml(emitted);
    expect_matches_view(v, parsed);
    EXPECT_EQ(parsed.level, v.level);
    EXPECT_EQ(emit_plantuml(parsed), emitted);
    auto view_again = parse_view_yaml(emit_view_yaml(v), v.level);
    EXPECT_EQ(emit_plantuml(view_again), emitted);
  }
}

TEST(FuzzProperty, AnalyzerIsTotal) {
  std::mt19937 rng(99);
  const std::string base = testing::read_file(testing::library_fixtures() / "L2/generate_plantuml.puml");
  const std::string alphabet = "(){}\",@!\n abcXYZ_=";
  std::uniform_int_distribution<std::size_t> pos(0, base.size() - 1);
  std::uniform_int_distribution<std::size_t> ch(0, alphabet.size() - 1);
  std::uniform_int_distribution<int> edits(1, 20);
  for (int i = 0; i < 300; ++i) {
    std::string mutated = base;
    for (int e = edits(rng); e > 0; --e) {
      auto p = pos(rng) % mutated.size();
      switch (e % 3) {
        case 0: mutated[p] = alphabet[ch(rng)]; break;
        case 1: mutated.erase(p, 1); break;
        default: mutated.insert(p, 1, alphabet[ch(rng)]); break;
      }
      if (mutated.empty()) mutated = "x";
    }
    PumlParseResult r;
    EXPECT_NO_THROW(r = analyze_plantuml(mutated));
    for (const auto& d : r.errors) EXPECT_FALSE(d.message.empty());
  }
}

TEST(CompileTest, OfficialRunnerUsesExitStatus) {
  testing::TempDir tmp;
  auto runner = tmp / "fake-plantuml";
  testing::write_file(runner,
                      "#!/bin/sh\n"
                      "if grep -q Widget \"$2\"; then echo 'Syntax Error? line 2'; exit 1; fi\n"
                      "exit 0\n");
  std::filesystem::permissions(runner, std::filesystem::perms::owner_all);
  auto good = check_compilation("@startuml\nPerson(a, \"A\")\n@enduml\n",
                                CompileMode::OfficialRunner, runner.string());
  EXPECT_TRUE(good.ok);
  EXPECT_EQ(good.mode, CompileMode::OfficialRunner);
  auto bad = check_compilation("@startuml\nWidget(a)\n@enduml\n", CompileMode::OfficialRunner,
                               runner.string());
  EXPECT_FALSE(bad.ok);
  ASSERT_EQ(bad.diagnostics.size(), 1u);
  EXPECT_EQ(bad.diagnostics[0], "Syntax Error? line 2");
}

TEST(CompileTest, MissingRunner) {
  EXPECT_EQ(error_code_of([] {
              check_compilation("@startuml\n@enduml\n", CompileMode::OfficialRunner,
                                "/nonexistent/plantuml");
            }),
            ErrorCode::RunnerNotFound);
}

}  // namespace
}  // namespace c4mas
