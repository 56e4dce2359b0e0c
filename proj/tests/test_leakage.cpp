// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "icurate/leakage.hpp"
#include "support.hpp"

using namespace icurate;
using testing_support::at_cosine;
using testing_support::basis;
using testing_support::make_record;

namespace {

BenchmarkQuerySet bench(std::vector<EmbeddingVector> e) {
  BenchmarkQuerySet b;
  b.name = "bench";
  for (std::size_t i = 0; i < e.size(); ++i) b.queries.push_back("q" + std::to_string(i));
  b.embeddings = std::move(e);
  return b;
}

Corpus corpus_of(std::size_t n) {
  Corpus c;
  for (std::size_t i = 0; i < n; ++i) c.add(make_record("r" + std::to_string(i), "text " + std::to_string(i)));
  return c;
}

}  // namespace

TEST(Leakage, ExactDuplicateIsRemovedAtTauOne) {
  auto t = std::make_shared<MockTransport>(5, 32);
  auto gw = testing_support::mock_gateway(t);
  Corpus c;
  c.add(make_record("copy", "What is the capital of France?"));
  c.add(make_record("other", "Write a haiku about rain"));
  const auto b = embed_benchmark("geo", {"What is the capital of France?", "Name a river"}, *gw);
  const auto res = filter_leaked(c, {b}, 1.0, *gw);
  ASSERT_EQ(res.report.removed.size(), 1u);
  EXPECT_EQ(res.report.removed[0].instruction_id, "copy");
  EXPECT_EQ(res.report.removed[0].benchmark, "geo");
  EXPECT_EQ(res.report.removed[0].matched_query_index, 0u);
  EXPECT_DOUBLE_EQ(res.report.removed[0].similarity, 1.0);
  ASSERT_EQ(res.corpus.size(), 1u);
  EXPECT_EQ(res.corpus[0].id, "other");
}

TEST(Leakage, PlantedNearDuplicateAtKnownCosine) {
  const auto q = basis(0, 4);
  const auto c = corpus_of(3);
  const std::vector<EmbeddingVector> e = {at_cosine(q, basis(1, 4), 0.95), at_cosine(q, basis(2, 4), 0.80),
                                          basis(3, 4)};
  const auto res = filter_leaked(c, e, {bench({q})}, 0.9);
  ASSERT_EQ(res.report.removed.size(), 1u);
  EXPECT_EQ(res.report.removed[0].instruction_id, "r0");
  EXPECT_NEAR(res.report.removed[0].similarity, 0.95, 1e-12);
  EXPECT_EQ(res.corpus.size(), 2u);
}

TEST(Leakage, OrthogonalRecordsSurvive) {
  const auto c = corpus_of(3);
  const std::vector<EmbeddingVector> e = {basis(1, 6), basis(2, 6), basis(3, 6)};
  const auto res = filter_leaked(c, e, {bench({basis(0, 6), basis(4, 6)})}, 0.01);
  EXPECT_TRUE(res.report.removed.empty());
  EXPECT_EQ(res.corpus.size(), 3u);
}

TEST(Leakage, RemovalsAreMonotoneInTau) {
  Rng rng(17, "leakage-monotone");
  const auto c = corpus_of(200);
  std::vector<EmbeddingVector> e;
  for (std::size_t i = 0; i < c.size(); ++i) e.push_back(testing_support::random_unit(rng, 3));
  std::vector<EmbeddingVector> q;
  for (int i = 0; i < 5; ++i) q.push_back(testing_support::random_unit(rng, 3));
  std::size_t prev = c.size() + 1;
  for (double tau : {0.1, 0.3, 0.5, 0.7, 0.9, 0.99}) {
    const auto res = filter_leaked(c, e, {bench(q)}, tau, 3);
    EXPECT_LE(res.report.removed.size(), prev) << tau;
    EXPECT_EQ(res.report.removed.size() + res.corpus.size(), c.size());
    for (const auto& m : res.report.removed) EXPECT_GE(m.similarity, tau);
    prev = res.report.removed.size();
  }
}

TEST(Leakage, GuardsAndEmptyBenchmarks) {
  const auto c = corpus_of(2);
  const std::vector<EmbeddingVector> e = {basis(0, 2), basis(1, 2)};
  EXPECT_THROW(filter_leaked(c, e, {bench({basis(0, 2)})}, 0.0), ContractError);
  EXPECT_THROW(filter_leaked(c, e, {bench({basis(0, 2)})}, 1.01), ContractError);
  EXPECT_THROW(filter_leaked(c, {basis(0, 2)}, {bench({basis(0, 2)})}, 0.5), ContractError);
  EXPECT_THROW(filter_leaked(c, e, {bench({})}, 0.5), DataError);
  const auto res = filter_leaked(c, e, {}, 0.5);
  EXPECT_EQ(res.corpus.size(), 2u);
  EXPECT_TRUE(res.report.removed.empty());

  auto t = std::make_shared<MockTransport>();
  auto gw = testing_support::mock_gateway(t);
  EXPECT_EQ(filter_leaked(c, {}, 0.5, *gw).corpus.size(), 2u);
  EXPECT_EQ(t->embed_calls(), 0u);
}

TEST(Leakage, UsesUserSideTextOnly) {
  auto t = std::make_shared<MockTransport>(5, 32);
  auto gw = testing_support::mock_gateway(t);
  Corpus c;
  c.add(make_record("a", "Sort a list in python", "totally different assistant text here"));
  const auto b = embed_benchmark("code", {"Sort a list in python"}, *gw);
  EXPECT_EQ(filter_leaked(c, {b}, 0.999, *gw).report.removed.size(), 1u);
}

TEST(Leakage, QueryFileAndReport) {
  const auto dir = testing_support::temp_dir("leakage_queries");
  write_file(dir + "/b.jsonl", "{\"query\":\"one\"}\n\n{\"query\":\"two\"}\n");
  EXPECT_EQ(load_benchmark_queries(dir + "/b.jsonl"), (std::vector<std::string>{"one", "two"}));
  write_file(dir + "/bad.jsonl", "{\"q\":\"one\"}\n");
  EXPECT_THROW(load_benchmark_queries(dir + "/bad.jsonl"), DataError);

  LeakageReport r;
  r.threshold = 0.9;
  r.removed.push_back({"id1", "b", 2, 0.95});
  const auto j = nlohmann::json::parse(serialize_leakage_report(r));
  EXPECT_EQ(j["instruction_id"], "id1");
  EXPECT_EQ(j["matched_query_index"], 2);
  EXPECT_DOUBLE_EQ(j["threshold"].get<double>(), 0.9);
}
