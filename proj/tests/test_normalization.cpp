// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "icurate/normalization.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace icurate;
using testing_support::basis;
using testing_support::make_record;
using testing_support::vec;

namespace {

/// Points scattered around a few random centres, plus uniform noise.
std::vector<EmbeddingVector> clustered_points(Rng& rng, std::size_t n, std::size_t dim, std::size_t centres,
                                              double spread) {
  std::vector<EmbeddingVector> c;
  for (std::size_t k = 0; k < centres; ++k) c.push_back(testing_support::random_unit(rng, dim));
  std::vector<EmbeddingVector> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (rng.uniform() < 0.15) {
      out.push_back(testing_support::random_unit(rng, dim));
      continue;
    }
    const auto& base = c[rng.below(centres)];
    std::vector<double> v(dim);
    for (std::size_t d = 0; d < dim; ++d) v[d] = base.values[d] + spread * rng.normal();
    out.push_back(EmbeddingVector{v});
  }
  return out;
}

std::vector<oracle::Group> as_oracle(const std::vector<MergeGroup>& groups) {
  std::vector<oracle::Group> out;
  for (const auto& g : groups) out.push_back({g.representative, g.members, g.frequency});
  return out;
}

}  // namespace

TEST(ThresholdMerge, TransitiveChainsMergeAndMostFrequentRepresents) {
  // a~b and b~c above lambda, a~c below: all three merge through b
  const double c = 0.95;
  const auto a = basis(0, 3);
  const auto b = testing_support::at_cosine(a, basis(1, 3), c);
  const double ang = 2 * std::acos(c);
  const auto cc = vec({std::cos(ang), std::sin(ang), 0.0});
  ASSERT_LT(oracle::cosine(a, cc), 0.91);
  EmbeddingTable emb{{"a", a}, {"b", b}, {"c", cc}, {"d", basis(2, 3)}};
  const auto groups = merge_by_threshold({{"a", 3}, {"b", 7}, {"c", 7}, {"d", 1}}, emb, 0.91);
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_EQ(groups[0].representative, "b");
  EXPECT_EQ(groups[0].members, (std::set<std::string>{"a", "b", "c"}));
  EXPECT_EQ(groups[0].frequency, 17);
  EXPECT_EQ(groups[1].representative, "d");
}

TEST(ThresholdMerge, BoundaryIsInclusive) {
  EmbeddingTable emb{{"x", vec({1, 0})}, {"y", vec({1, 0})}};
  EXPECT_EQ(merge_by_threshold({{"x", 1}, {"y", 1}}, emb, 1.0).size(), 1u);
}

TEST(ThresholdMerge, RejectsBadInput) {
  EmbeddingTable emb{{"x", vec({1, 0})}};
  EXPECT_THROW(merge_by_threshold({{"x", 1}, {"x", 2}}, emb, 0.9), ContractError);
  EXPECT_THROW(merge_by_threshold({{"y", 1}}, emb, 0.9), DataError);
  EXPECT_THROW(merge_by_threshold({{"x", 1}}, emb, 0.0), ContractError);
}

TEST(ThresholdMerge, MatchesClosureOracleOnRandomFixtures) {
  Rng rng(99, "threshold-fixtures");
  for (int f = 0; f < 10; ++f) {
    const auto pts = clustered_points(rng, 60, 6, 5, 0.12);
    std::vector<TagCount> tags;
    std::vector<std::string> names;
    std::vector<long> freq;
    EmbeddingTable emb;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      names.push_back("t" + std::to_string(i));
      freq.push_back(1 + static_cast<long>(rng.below(50)));
      tags.push_back({names.back(), freq.back()});
      emb.emplace(names.back(), pts[i]);
    }
    const auto got = merge_by_threshold(tags, emb, 0.91, 3);
    EXPECT_EQ(as_oracle(got), oracle::threshold_components(names, freq, pts, 0.91)) << "fixture " << f;
  }
}

TEST(Dbscan, CoreBorderAndNoise) {
  // three tight points, one border point reachable from one core only, one far point
  std::vector<EmbeddingVector> pts = {vec({1, 0, 0}), vec({0.99, 0.14, 0}), vec({0.99, -0.14, 0}),
                                      vec({0.6, 0.8, 0}), vec({0, 0, 1})};
  const auto labels = dbscan_cluster(pts, 0.3, 3);
  EXPECT_EQ(labels[0], 0);
  EXPECT_EQ(labels[1], 0);
  EXPECT_EQ(labels[2], 0);
  EXPECT_EQ(labels[4], kNoise);
  EXPECT_EQ(oracle::canonical_labels(labels), oracle::canonical_labels(oracle::dbscan(pts, 0.3, 3)));
}

TEST(Dbscan, MinSamplesOneMakesEveryPointCore) {
  std::vector<EmbeddingVector> pts = {basis(0, 3), basis(1, 3), basis(2, 3)};
  EXPECT_EQ(dbscan_cluster(pts, 0.1, 1), (std::vector<int>{0, 1, 2}));
  EXPECT_TRUE(dbscan_cluster({}, 0.1, 1).empty());
  EXPECT_THROW(dbscan_cluster(pts, 0.0, 1), ContractError);
  EXPECT_THROW(dbscan_cluster({basis(0, 2), basis(0, 3)}, 0.5, 1), ContractError);
}

TEST(Dbscan, MatchesQuadraticOracleOnRandomFixtures) {
  Rng rng(7, "dbscan-fixtures");
  for (int f = 0; f < 10; ++f) {
    const auto pts = clustered_points(rng, 80, 5, 4, 0.25);
    for (int ms : {2, 4}) {
      const auto got = dbscan_cluster(pts, 0.1, ms, 2);
      EXPECT_EQ(oracle::canonical_labels(got), oracle::canonical_labels(oracle::dbscan(pts, 0.1, ms)))
          << "fixture " << f << " min_samples " << ms;
    }
  }
}

TEST(Normalization, FrequencyFilterAndRemap) {
  // "python" and "python code" merge by threshold; "poem" is rare and dropped
  EmbeddingTable emb{{"python", vec({1, 0, 0})},
                     {"python code", vec({0.999, 0.0447, 0})},
                     {"poem", vec({0, 0, 1})},
                     {"sql", vec({0, 1, 0})}};
  VocabParams p;
  p.lambda = 0.99;
  p.eps = 0.05;
  p.min_samples = 2;
  p.min_freq = 5;
  const auto res = normalize_vocabulary({{"poem", 2}, {"python", 6}, {"python code", 3}, {"sql", 5}}, emb, p);
  EXPECT_EQ(res.total_raw_occurrences, 16);
  ASSERT_EQ(res.vocabulary.size(), 2u);
  EXPECT_EQ(res.vocabulary.frequency("python"), 9);
  EXPECT_EQ(res.vocabulary.entries.at("python").merged_aliases, std::set<std::string>{"python code"});
  EXPECT_EQ(res.vocabulary.remap.at("python code"), std::optional<std::string>("python"));
  EXPECT_EQ(res.vocabulary.remap.at("poem"), std::nullopt);
  ASSERT_EQ(res.dropped.size(), 1u);
  EXPECT_EQ(res.dropped[0].representative, "poem");
}

TEST(Normalization, ClusteringCollapsesRepresentatives) {
  // no threshold merges at lambda 1, but the first three lie within eps of each other
  EmbeddingTable emb{{"a", vec({1, 0})}, {"b", vec({0.95, 0.31})}, {"c", vec({0.95, -0.31})}, {"z", vec({-1, 0})}};
  VocabParams p;
  p.lambda = 1.0;
  p.eps = 0.1;
  p.min_samples = 2;
  p.min_freq = 0;
  const auto res = normalize_vocabulary({{"a", 1}, {"b", 4}, {"c", 2}, {"z", 1}}, emb, p);
  ASSERT_EQ(res.final_groups.size(), 2u);
  EXPECT_EQ(res.final_groups[0].representative, "b");
  EXPECT_EQ(res.final_groups[0].rule, MergeRule::dbscan);
  EXPECT_EQ(res.final_groups[0].frequency, 7);
  EXPECT_EQ(res.final_groups[1].representative, "z");
  EXPECT_EQ(res.final_groups[1].rule, MergeRule::threshold);
}

TEST(Normalization, ThroughGatewayAndRewrite) {
  auto t = std::make_shared<MockTransport>(1, 16);
  t->pin_embedding("algebra", vec({1, 0}));
  t->pin_embedding("Algebra", vec({1, 0}));
  t->pin_embedding("poetry", vec({0, 1}));
  auto gw = testing_support::mock_gateway(t);
  const std::vector<RawTagAssignment> a = {{"r1", {"algebra", "poetry"}}, {"r2", {"Algebra"}}, {"r3", {"algebra"}}};
  VocabParams p;
  p.min_freq = 2;
  const auto res = normalize_vocabulary(a, *gw, p);
  EXPECT_EQ(res.vocabulary.size(), 1u);
  EXPECT_EQ(res.vocabulary.frequency("algebra"), 3);

  Corpus c;
  c.add(make_record("r1", "q", "a", {"stale"}));
  c.add(make_record("r2", "q"));
  c.add(make_record("r4", "q", "a", {"stale"}));
  rewrite_tags(c, a, res.vocabulary);
  EXPECT_EQ(c[0].fine_tags, std::set<std::string>{"algebra"});
  EXPECT_EQ(c[1].fine_tags, std::set<std::string>{"algebra"});
  EXPECT_TRUE(c[2].fine_tags.empty());
}

TEST(Normalization, VocabularyJsonRoundTrip) {
  TagVocabulary v;
  v.params.min_freq = 3;
  v.entries["a"] = VocabEntry{"a", "a", 5, {"A"}, {"Math"}};
  v.remap["a"] = "a";
  v.remap["A"] = "a";
  v.remap["rare"] = std::nullopt;
  const auto back = vocabulary_from_json(to_json(v));
  EXPECT_EQ(back.entries, v.entries);
  EXPECT_EQ(back.remap, v.remap);
  EXPECT_EQ(back.params.min_freq, 3);
  EXPECT_THROW(vocabulary_from_json(nlohmann::json::object()), DataError);
}

TEST(Normalization, CountsEachTagOncePerAssignment) {
  const auto raw = count_raw_tags({{"a", {"x", "x", "y"}}, {"b", {"x"}}});
  ASSERT_EQ(raw.size(), 2u);
  EXPECT_EQ(raw[0].tag, "x");
  EXPECT_EQ(raw[0].frequency, 2);
  EXPECT_EQ(raw[1].frequency, 1);
}
