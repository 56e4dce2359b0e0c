// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "icurate/evolution.hpp"
#include "support.hpp"

using namespace icurate;
using testing_support::make_record;
using testing_support::mock_gateway;

namespace {

Corpus seeds(std::size_t n) {
  Corpus c;
  for (std::size_t i = 0; i < n; ++i) {
    c.add(make_record("s" + std::to_string(i), "Explain topic number " + std::to_string(i), "Because."));
  }
  return c;
}

int assistant_turns(const InstructionRecord& r) {
  return static_cast<int>(std::count_if(r.turns.begin(), r.turns.end(),
                                        [](const Turn& t) { return t.role == Role::assistant; }));
}

}  // namespace

TEST(EvolutionParsers, EvolvedInstructionStripsLabels) {
  EXPECT_EQ(parse_evolved_instruction("#Rewritten Prompt#: Do X."), std::optional<std::string>("Do X."));
  EXPECT_EQ(parse_evolved_instruction("  \"quoted\"  "), std::optional<std::string>("quoted"));
  EXPECT_EQ(parse_evolved_instruction("#Created Prompt#:\n  Plan a trip"), std::optional<std::string>("Plan a trip"));
  EXPECT_EQ(parse_evolved_instruction("plain text"), std::optional<std::string>("plain text"));
  EXPECT_FALSE(parse_evolved_instruction("   ").has_value());
  EXPECT_FALSE(parse_evolved_instruction("#Rewritten Prompt#:").has_value());
}

TEST(EvolutionParsers, JudgeAcceptsOnlyExplicitPass) {
  for (const char* yes : {"PASS", "pass", " Pass.", "**PASS**", "PASS\nlooks fine", "\"PASS\""}) {
    EXPECT_EQ(parse_judge_verdict(yes), Verdict::pass) << yes;
  }
  for (const char* no : {"FAIL", "", "PASSED", "I think PASS", "PASS but unclear", "NOT PASS", "maybe"}) {
    EXPECT_EQ(parse_judge_verdict(no), Verdict::fail) << no;
  }
}

TEST(Evolution, JudgeFailureRejectsChild) {
  auto t = std::make_shared<MockTransport>(3);
  t->add_rule(ModelRole::judge, MockRule::Match::any, "", "FAIL: contradictory");
  auto gw = mock_gateway(t);
  EvolutionParams p;
  const auto out = run_evolution(seeds(5), *gw, TemplateSet::builtin(), p);
  EXPECT_EQ(out.passed, 0u);
  EXPECT_EQ(out.failed, 5u);
  EXPECT_TRUE(out.corpus.empty());
  for (const auto& r : out.log) EXPECT_TRUE(r.reason.starts_with("judge_rejected")) << r.reason;
}

TEST(Evolution, EmptySynthesisFails) {
  auto t = std::make_shared<MockTransport>(3);
  t->add_rule(ModelRole::synthesizer, MockRule::Match::contains, "#Given Instruction#", "@empty");
  auto gw = mock_gateway(t);
  const auto rec = evolve_seed(seeds(1)[0], *gw, TemplateSet::builtin(), EvolutionParams{});
  EXPECT_EQ(rec.verdict, Verdict::fail);
  EXPECT_EQ(rec.reason, "empty_synthesis");
}

TEST(Evolution, RoundsSpanOneToMaxAndShapeIsValid) {
  auto t = std::make_shared<MockTransport>(4);
  t->add_rule(ModelRole::judge, MockRule::Match::any, "", "PASS");
  auto gw = mock_gateway(t);
  EvolutionParams p;
  p.seed = 11;
  const auto out = run_evolution(seeds(60), *gw, TemplateSet::builtin(), p);
  ASSERT_EQ(out.passed, 60u);
  std::set<int> seen;
  for (const auto& r : out.log) {
    EXPECT_GE(r.rounds, 1);
    EXPECT_LE(r.rounds, 4);
    EXPECT_FALSE(r.truncated);
    EXPECT_EQ(assistant_turns(r.child), r.rounds);
    EXPECT_EQ(r.child.turns.size(), static_cast<std::size_t>(2 * r.rounds));
    EXPECT_EQ(r.child.turns.back().role, Role::assistant);
    EXPECT_NO_THROW(validate_record(r.child));
    EXPECT_EQ(r.child.provenance.kind, ProvenanceKind::evolved);
    EXPECT_EQ(r.child.provenance.parent_chain, std::vector<std::string>{r.parent_id});
    EXPECT_EQ(r.child.id, r.parent_id + "~e1");
    seen.insert(r.rounds);
  }
  EXPECT_EQ(seen, (std::set<int>{1, 2, 3, 4}));
}

TEST(Evolution, FailedFollowUpTruncatesButKeepsCompletedRounds) {
  auto t = std::make_shared<MockTransport>(4);
  t->add_rule(ModelRole::judge, MockRule::Match::any, "", "PASS");
  t->add_rule(ModelRole::synthesizer, MockRule::Match::contains, "play the user", "@empty");
  auto gw = mock_gateway(t);
  EvolutionParams p;
  p.seed = 11;
  const auto out = run_evolution(seeds(30), *gw, TemplateSet::builtin(), p);
  std::size_t truncated = 0;
  for (const auto& r : out.log) {
    ASSERT_EQ(r.verdict, Verdict::pass);
    EXPECT_EQ(r.rounds, 1);
    EXPECT_EQ(r.child.turns.size(), 2u);
    truncated += r.truncated;
  }
  EXPECT_GT(truncated, 0u);
  EXPECT_LT(truncated, 30u);
}

TEST(Evolution, NoReplyAtAllFailsExpansion) {
  auto t = std::make_shared<MockTransport>(4);
  t->add_rule(ModelRole::judge, MockRule::Match::any, "", "PASS");
  t->add_rule(ModelRole::synthesizer, MockRule::Match::contains, "next reply", "@empty");
  auto gw = mock_gateway(t);
  const auto rec = evolve_seed(seeds(1)[0], *gw, TemplateSet::builtin(), EvolutionParams{});
  EXPECT_EQ(rec.verdict, Verdict::fail);
  EXPECT_TRUE(rec.reason.starts_with("expansion_failed")) << rec.reason;
}

TEST(Evolution, DeterministicAcrossWorkerCounts) {
  const auto run = [](std::size_t workers) {
    auto t = std::make_shared<MockTransport>(21);
    auto gw = mock_gateway(t, workers);
    EvolutionParams p;
    p.seed = 5;
    p.workers = workers;
    p.generations = 2;
    return serialize_evolution_log(run_evolution(seeds(40), *gw, TemplateSet::builtin(), p).log);
  };
  const auto one = run(1);
  EXPECT_EQ(one, run(4));
  EXPECT_EQ(one, run(4));
}

TEST(Evolution, LaterGenerationsEvolvePassingChildren) {
  auto t = std::make_shared<MockTransport>(8);
  t->add_rule(ModelRole::judge, MockRule::Match::any, "", "PASS");
  auto gw = mock_gateway(t);
  EvolutionParams p;
  p.generations = 3;
  p.dimensions = {Dimension::deepening};
  const auto out = run_evolution(seeds(4), *gw, TemplateSet::builtin(), p);
  EXPECT_EQ(out.passed, 12u);
  const auto* g3 = out.corpus.find("s2~e1~e2~e3");
  ASSERT_NE(g3, nullptr);
  EXPECT_EQ(g3->provenance.parent_chain, (std::vector<std::string>{"s2", "s2~e1", "s2~e1~e2"}));
  for (const auto& r : out.log) EXPECT_EQ(r.dimension, Dimension::deepening);
}

TEST(Evolution, ParamsValidate) {
  EvolutionParams p;
  p.rounds_max = 0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = EvolutionParams{};
  p.dimensions.clear();
  EXPECT_THROW(p.validate(), ConfigError);
  EXPECT_THROW(dimension_from_string("sideways"), ConfigError);
  EXPECT_EQ(dimension_from_string("concretizing"), Dimension::concretizing);
}
