#include <gtest/gtest.h>

#include <random>

#include "c4mas/eval_judge.hpp"
#include "test_support.hpp"

namespace c4mas {
namespace {

using testing::error_code_of;

struct JudgeHarness {
  explicit JudgeHarness(std::shared_ptr<Backend> backend, JudgeConfig config = {})
      : gateway(std::move(backend)), prompts(PromptLibrary::defaults()), judge(gateway, prompts, config) {}

  LlmGateway gateway;
  PromptLibrary prompts;
  Judge judge;
};

ViewModel library_l1_view() {
  return parse_view_yaml(testing::read_file(testing::library_fixtures() / "L1/structure_yaml.yaml"),
                         Level::L1_Context);
}

DiagramModel library_diagram(const std::string& dir) {
  return parse_plantuml(text::strip_code_fence(
      testing::read_file(testing::library_fixtures() / dir / "generate_plantuml.puml")));
}

EntityList entities(std::size_t n) {
  EntityList list;
  for (std::size_t i = 0; i < n; ++i) list.entities.push_back({"Entity " + std::to_string(i), EntityRole::Actor});
  return list;
}

std::string verdicts(const EntityList& list, const std::set<std::size_t>& present) {
  nlohmann::json results = nlohmann::json::array();
  for (std::size_t i = 0; i < list.entities.size(); ++i)
    results.push_back({{"name", list.entities[i].name}, {"present", present.count(i) > 0}});
  return nlohmann::json{{"results", results}}.dump();
}

TEST(ParseTest, EntityListDedupesCaseInsensitively) {
  auto list = parse_entity_list(R"({"entities": [
      {"name": "Librarian", "role": "actor"}, {"name": "librarian ", "role": "actor"},
      {"name": "Email Service", "role": "external_system"}]})");
  ASSERT_EQ(list.entities.size(), 2u);
  EXPECT_EQ(list.entities[1].role, EntityRole::ExternalSystem);
}

TEST(ParseTest, FencedJsonIsAccepted) {
  auto list = parse_entity_list("Here you go:\n```json\n{\"entities\": [{\"name\": \"A\", \"role\": \"core_system\"}]}\n```\n");
  ASSERT_EQ(list.entities.size(), 1u);
  EXPECT_EQ(list.entities[0].role, EntityRole::CoreSystem);
}

TEST(ParseTest, MalformedOutputs) {
  for (const char* raw : {"no json here", R"({"entities": "x"})",
                          R"({"entities": [{"name": "A", "role": "wizard"}]})"})
    EXPECT_EQ(error_code_of([&] { parse_entity_list(raw); }), ErrorCode::MalformedResponse) << raw;
  EXPECT_EQ(error_code_of([] { parse_findings(R"({"findings": [{"title": "t", "severity": "dire"}]})"); }),
            ErrorCode::MalformedResponse);
}

TEST(ParseTest, CritiqueVerbatim) {
  auto c = parse_critique(testing::read_file(testing::library_fixtures() / "judge/architect_critique.json"));
  EXPECT_EQ(c.clarity, 4);
  EXPECT_EQ(c.feasibility, 3);
  EXPECT_EQ(c.key_risks.size(), 2u);
  EXPECT_FALSE(c.recommendation.empty());
  EXPECT_TRUE(c.warnings.empty());
}

TEST(ParseTest, OutOfRangeRatingIsClamped) {
  auto c = parse_critique(R"({"clarity": 7, "feasibility": 0, "key_risks": [], "recommendation": "r"})");
  EXPECT_EQ(c.clarity, 5);
  EXPECT_EQ(c.feasibility, 1);
  EXPECT_EQ(c.warnings.size(), 2u);
}

TEST(RiskTest, WeightedSum) {
  std::vector<VulnerabilityFinding> f = {{"a", Severity::High, {}, ""},
                                         {"b", Severity::Medium, {}, ""},
                                         {"c", Severity::Medium, {}, ""}};
  EXPECT_DOUBLE_EQ(weighted_risk_points(f, default_severity_weights()), 11.0);
  EXPECT_DOUBLE_EQ(weighted_risk_points({}, default_severity_weights()), 0.0);
  auto w = default_severity_weights();
  EXPECT_EQ(w[Severity::Low], 1);
  EXPECT_EQ(w[Severity::Critical], 8);
}

TEST(RiskTest, PointsAreRecomputableFromFindingsAndWeights) {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> sev(0, 3), count(0, 12);
  std::uniform_real_distribution<double> weight(0, 10);
  for (int i = 0; i < 100; ++i) {
    SeverityWeights w;
    for (auto s : {Severity::Low, Severity::Medium, Severity::High, Severity::Critical}) w[s] = weight(rng);
    nlohmann::json findings = nlohmann::json::array();
    double expected = 0;
    for (int n = count(rng); n > 0; --n) {
      auto s = static_cast<Severity>(sev(rng));
      expected += w[s];
      findings.push_back({{"title", "t"}, {"severity", std::string(to_string(s))},
                          {"affected_elements", nlohmann::json::array()}, {"rationale", "r"}});
    }
    auto reply = nlohmann::json{{"findings", findings}}.dump();
    JudgeConfig cfg;
    cfg.severity_weights = w;
    JudgeHarness h(std::make_shared<testing::ScriptedBackend>(
                       [&](const LlmRequest&, std::size_t) { return reply; }),
                   cfg);
    auto r = h.judge.security_red_team(testing::library_brief(), ViewModel{}, DiagramModel{});
    EXPECT_NEAR(r.points, expected, 1e-9);
    EXPECT_NEAR(weighted_risk_points(r.findings, r.weights_used), r.points, 1e-12);
  }
}

TEST(SemanticTest, HalfPresent) {
  auto list = entities(8);
  auto reply = verdicts(list, {0, 2, 4, 6});
  JudgeHarness h(std::make_shared<testing::ScriptedBackend>(
      [&](const LlmRequest&, std::size_t) { return reply; }));
  auto s = h.judge.verify_entities(list, testing::library_brief(), library_l1_view(), library_diagram("L1"));
  ASSERT_TRUE(s.score_percent);
  EXPECT_DOUBLE_EQ(*s.score_percent, 50.0);
  EXPECT_EQ(s.present.size(), 4u);
}

TEST(SemanticTest, EmptyGroundTruthIsNullWithoutACall) {
  auto backend = std::make_shared<testing::ScriptedBackend>(
      [](const LlmRequest&, std::size_t) { return std::string("{}"); });
  JudgeHarness h(backend);
  auto s = h.judge.verify_entities({}, testing::library_brief(), library_l1_view(), library_diagram("L1"));
  EXPECT_FALSE(s.score_percent);
  EXPECT_EQ(s.null_reason, "empty ground truth");
  EXPECT_TRUE(backend->requests().empty());
}

TEST(SemanticTest, VerificationPromptCarriesViewDiagramAndEntities) {
  auto list = entities(2);
  auto backend = std::make_shared<testing::ScriptedBackend>(
      [&](const LlmRequest&, std::size_t) { return verdicts(list, {0}); });
  JudgeHarness h(backend);
  h.judge.verify_entities(list, testing::library_brief(), library_l1_view(), library_diagram("L1"));
  ASSERT_EQ(backend->requests().size(), 1u);
  const auto& user = backend->requests()[0].prompt.user_text;
  EXPECT_NE(user.find("VIEW_YAML (L1)"), std::string::npos);
  EXPECT_NE(user.find("PLANTUML_DIAGRAM (L1)"), std::string::npos);
  EXPECT_NE(user.find("- Entity 1 (actor)"), std::string::npos);
  EXPECT_EQ(backend->requests()[0].key.stem(), "judge/verify_entities");
}

TEST(SemanticTest, MalformedThreeTimesIsJudgeUnavailable) {
  auto backend = std::make_shared<testing::ScriptedBackend>(
      [](const LlmRequest&, std::size_t) { return std::string("I think it looks fine."); });
  JudgeHarness h(backend);
  try {
    h.judge.extract_ground_truth_entities(testing::library_brief());
    FAIL() << "expected JudgeUnavailable";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::JudgeUnavailable);
    EXPECT_EQ(e.subject(), "extract_entities");
  }
  EXPECT_EQ(backend->requests().size(), 3u);
}

// Adding an entity that the judge marks present never lowers the score.
TEST(SemanticProperty, Monotone) {
  std::mt19937 rng(11);
  std::uniform_int_distribution<std::size_t> size(1, 15);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 100; ++trial) {
    auto list = entities(size(rng));
    std::set<std::size_t> present;
    for (std::size_t i = 0; i < list.entities.size(); ++i)
      if (coin(rng)) present.insert(i);
    auto extended = entities(list.entities.size() + 1);
    auto more = present;
    more.insert(list.entities.size());
    auto score = [](const EntityList& l, const std::set<std::size_t>& p) {
      auto reply = verdicts(l, p);
      JudgeHarness h(std::make_shared<testing::ScriptedBackend>(
          [&](const LlmRequest&, std::size_t) { return reply; }));
      return *h.judge.verify_entities(l, testing::library_brief(), ViewModel{}, DiagramModel{})
                  .score_percent;
    };
    EXPECT_GE(score(extended, more), score(list, present));
  }
}

TEST(ArchitectTest, NeedsL1Artifacts) {
  JudgeHarness h(std::make_shared<testing::ScriptedBackend>(
      [](const LlmRequest&, std::size_t) { return std::string("{}"); }));
  EXPECT_EQ(error_code_of([&] { h.judge.architect_critique(testing::library_brief(), {}); }),
            ErrorCode::JudgeUnavailable);
}

TEST(ArchitectTest, OldestArtifactsAreDroppedOverBudget) {
  std::vector<Artifact> arts;
  for (auto level : kAllLevels) {
    Artifact a;
    a.kind = ArtifactKind::AnalysisReport;
    a.level = level;
    if (level == Level::L3_Component) a.focus_container = "x";
    a.content = std::string(400, static_cast<char>('a' + static_cast<int>(level)));
    a.sequence_number = static_cast<std::uint64_t>(level);
    arts.push_back(a);
  }
  JudgeConfig cfg;
  cfg.architect_token_budget = 200;
  auto backend = std::make_shared<testing::ScriptedBackend>([](const LlmRequest&, std::size_t) {
    return std::string(R"({"clarity": 3, "feasibility": 4, "key_risks": ["r"], "recommendation": "x"})");
  });
  JudgeHarness h(backend, cfg);
  auto c = h.judge.architect_critique(testing::library_brief(), arts);
  EXPECT_EQ(c.clarity, 3);
  ASSERT_EQ(c.warnings.size(), 1u);
  EXPECT_NE(c.warnings[0].find("L1"), std::string::npos);
  const auto& user = backend->requests()[0].prompt.user_text;
  EXPECT_EQ(user.find(std::string(100, 'b')), std::string::npos);
  EXPECT_NE(user.find(std::string(100, 'c')), std::string::npos);
}

TEST(FixtureJudgeTest, LibraryFixturesAreDeterministic) {
  auto run = [] {
    JudgeHarness h(std::make_shared<MockBackend>(testing::library_fixtures()));
    auto brief = testing::library_brief();
    auto ents = h.judge.extract_ground_truth_entities(brief);
    auto sem = h.judge.verify_entities(ents, brief, library_l1_view(), library_diagram("L1"));
    auto risk = h.judge.security_red_team(
        brief,
        parse_view_yaml(testing::read_file(testing::library_fixtures() / "L2/structure_yaml.yaml"),
                        Level::L2_Container),
        library_diagram("L2"));
    return std::tuple{ents.entities.size(), sem.present.size(), *sem.score_percent, risk.points};
  };
  auto a = run();
  EXPECT_EQ(std::get<0>(a), 6u);
  EXPECT_EQ(std::get<1>(a), 5u);
  EXPECT_EQ(text::format_fixed(std::get<2>(a), 2), "83.33");
  EXPECT_DOUBLE_EQ(std::get<3>(a), 11.0);
  EXPECT_EQ(run(), a);
}

}  // namespace
}  // namespace c4mas
