// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "icurate/analytics.hpp"
#include "icurate/plot.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace icurate;
using testing_support::make_record;
using testing_support::vec;

namespace {

double dist(const Point2& a, const Point2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace

TEST(Projection, PcaPreservesPlanarGeometry) {
  // points in a plane embedded in 3D after a rotation: pairwise distances survive
  const double c = std::cos(0.7), s = std::sin(0.7);
  const std::vector<std::pair<double, double>> planar = {{0, 0}, {3, 0}, {0, 1}, {3, 1}, {1.5, 0.2}};
  std::vector<EmbeddingVector> embs;
  for (const auto& [x, y] : planar) embs.push_back(vec({c * x - s * y, s * x + c * y, 0.0}));
  const auto pts = project_pca(embs);
  for (std::size_t i = 0; i < planar.size(); ++i) {
    for (std::size_t j = 0; j < planar.size(); ++j) {
      const double want = std::hypot(planar[i].first - planar[j].first, planar[i].second - planar[j].second);
      EXPECT_NEAR(dist(pts[i], pts[j]), want, 1e-9);
    }
  }
}

TEST(Projection, CollinearInputHasZeroSecondAxis) {
  const auto pts = project_pca({vec({0, 0}), vec({1, 1}), vec({2, 2})});
  for (const auto& p : pts) EXPECT_NEAR(p.y, 0.0, 1e-12);
  EXPECT_NEAR(pts[2].x - pts[0].x, 2 * std::sqrt(2.0), 1e-12);
  EXPECT_THROW(project_pca({vec({1, 2})}), ContractError);
}

TEST(Projection, DeterministicAndTsneFallback) {
  Rng rng(1, "proj");
  std::vector<EmbeddingVector> embs;
  for (int i = 0; i < 30; ++i) embs.push_back(testing_support::random_unit(rng, 8));
  EXPECT_EQ(project_pca(embs), project_pca(embs));
  const auto a = project_2d(embs, Projection::tsne, 3);
  EXPECT_EQ(a.method_used, Projection::tsne);
  EXPECT_EQ(a.points, project_2d(embs, Projection::tsne, 3).points);
  for (const auto& p : a.points) EXPECT_TRUE(std::isfinite(p.x) && std::isfinite(p.y));

  const std::vector<EmbeddingVector> same(5, vec({1, 2, 3}));
  const auto fb = project_2d(same, Projection::tsne);
  EXPECT_EQ(fb.method_used, Projection::pca);
  EXPECT_EQ(fb.warnings.size(), 1u);
  EXPECT_THROW(projection_from_string("umap"), ConfigError);
}

TEST(Grid, CornersAndEdgesLandInExpectedCells) {
  const auto h = grid_histogram({{0, 0}, {1, 1}, {1, 0}, {0, 1}, {0.5, 0.5}}, 4);
  EXPECT_EQ(h.total, 5);
  EXPECT_EQ(h.at(0, 0), 1);
  EXPECT_EQ(h.at(3, 3), 1);
  EXPECT_EQ(h.at(3, 0), 1);
  EXPECT_EQ(h.at(0, 3), 1);
  EXPECT_EQ(h.at(2, 2), 1);
  EXPECT_EQ(h.non_empty(), 5u);
}

TEST(Grid, DegenerateAxisAndBadInput) {
  const auto h = grid_histogram({{2, 5}, {2, 5}, {2, 6}}, 10);
  EXPECT_LT(h.xmin, h.xmax);
  EXPECT_EQ(h.at(0, 0), 2);
  EXPECT_EQ(h.at(0, 9), 1);
  EXPECT_THROW(grid_histogram({}, 10), ContractError);
  EXPECT_THROW(grid_histogram({{0, NAN}}, 10), ContractError);
  EXPECT_THROW(grid_histogram({{0, 0}}, 0), ContractError);
}

TEST(Entropy, FrozenFixtures) {
  EXPECT_NEAR(spatial_entropy(GridHistogram::from_counts(2, {5, 5, 5, 5})), std::log(4.0), 1e-12);
  EXPECT_NEAR(spatial_entropy(GridHistogram::from_counts(2, {1, 1, 2})), 1.0397207708399179, 1e-12);
  EXPECT_EQ(spatial_entropy(GridHistogram::from_counts(3, {0, 0, 0, 9})), 0.0);
  EXPECT_FALSE(std::signbit(spatial_entropy(GridHistogram::from_counts(3, {7}))));
  EXPECT_NEAR(coverage_metric(GridHistogram::from_counts(2, {1, 0, 3, 1})), std::log(3.0), 1e-12);
  EXPECT_THROW(spatial_entropy(GridHistogram::from_counts(2, {})), ContractError);
  EXPECT_THROW(GridHistogram::from_counts(1, {1, 1}), ContractError);
}

TEST(Entropy, MergingCellsNeverIncreasesEntropy) {
  Rng rng(8, "merge-cells");
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<long> counts(16);
    for (auto& x : counts) x = static_cast<long>(rng.below(6));
    counts[0] += 1;
    const double before = spatial_entropy(GridHistogram::from_counts(4, counts));
    EXPECT_LE(before, std::log(16.0) + 1e-12);
    std::vector<long> merged = counts;
    const auto a = rng.below(16), b = (a + 1 + rng.below(15)) % 16;
    merged[a] += merged[b];
    merged[b] = 0;
    EXPECT_LE(spatial_entropy(GridHistogram::from_counts(4, merged)), before + 1e-12);
  }
}

TEST(Depth, MetricAndSummary) {
  auto r = make_record("a", "q", "a", {"x", "y", "z"}, 2.0);
  EXPECT_NEAR(*depth_metric(r), std::log(3.0) * 2.0, 1e-12);
  EXPECT_EQ(*depth_metric(make_record("b", "q", "a", {"x"}, 5.0)), 0.0);
  EXPECT_FALSE(depth_metric(make_record("c", "q", "a", {}, 5.0)).has_value());
  EXPECT_FALSE(depth_metric(make_record("d", "q", "a", {"x"})).has_value());
  Corpus c;
  c.add(r);
  c.add(make_record("e", "q", "a", {"x", "y"}, 1.0));
  c.add(make_record("f", "q"));
  const auto s = depth_summary(c);
  EXPECT_EQ(s.count, 2u);
  EXPECT_EQ(s.excluded, 1u);
  EXPECT_NEAR(s.sum, 2 * std::log(3.0) + std::log(2.0), 1e-12);
  EXPECT_NEAR(s.mean, s.sum / 2, 1e-12);
}

TEST(Difficulty, LabelParserAndHistogram) {
  EXPECT_EQ(parse_difficulty_label("very hard"), 4);
  EXPECT_EQ(parse_difficulty_label("  Very_Hard. "), 4);
  EXPECT_EQ(parse_difficulty_label("\"Medium\""), 2);
  EXPECT_EQ(parse_difficulty_label("very-easy"), 0);
  EXPECT_EQ(parse_difficulty_label("EASY"), 1);
  EXPECT_FALSE(parse_difficulty_label("hard-ish").has_value());
  EXPECT_FALSE(parse_difficulty_label("It is hard").has_value());
  EXPECT_FALSE(parse_difficulty_label("").has_value());

  const auto h = difficulty_histogram({0, 4, 4, std::nullopt, 2});
  EXPECT_EQ(h.counts, (std::array<long, 5>{1, 0, 1, 0, 2}));
  EXPECT_EQ(h.scored, 4u);
  EXPECT_EQ(h.unscored, 1u);
  EXPECT_DOUBLE_EQ(h.mean, 2.5);
}

TEST(Difficulty, ScoredThroughScorerRole) {
  auto t = std::make_shared<MockTransport>();
  t->add_rule(ModelRole::scorer, MockRule::Match::contains, "tough", "Hard.");
  t->add_rule(ModelRole::scorer, MockRule::Match::any, "", "no idea");
  auto gw = testing_support::mock_gateway(t);
  Corpus c;
  c.add(make_record("a", "a tough one"));
  c.add(make_record("b", "simple"));
  const auto s = score_difficulty(c, *gw, TemplateSet::builtin(), 2);
  EXPECT_EQ(s[0], 3);
  EXPECT_FALSE(s[1].has_value());
}

TEST(CoOccurrence, MatchesPairwiseOracle) {
  Rng rng(12, "cooc");
  const std::vector<std::string> pool = {"a", "b", "c", "d", "e", "f", "g", "h"};
  Corpus c;
  for (int i = 0; i < 50; ++i) {
    auto r = make_record("r" + std::to_string(i), "q");
    const auto k = rng.below(5);
    for (std::size_t j = 0; j < k; ++j) r.fine_tags.insert(pool[rng.below(pool.size())]);
    c.add(r);
  }
  const auto g = build_cooccurrence_graph(c);
  const auto o = oracle::cooccurrence(c);
  EXPECT_EQ(g.weights, o.weights);
  EXPECT_EQ(g.degrees, o.degrees);
  for (const auto& [e, w] : o.weights) EXPECT_EQ(g.weight(e.second, e.first), w);
}

TEST(CoOccurrence, SmallGraph) {
  Corpus c;
  c.add(make_record("1", "q", "a", {"x", "y", "z"}));
  c.add(make_record("2", "q", "a", {"x", "y"}));
  c.add(make_record("3", "q", "a", {"lonely"}));
  const auto g = build_cooccurrence_graph(c);
  EXPECT_EQ(g.edge_count(), 3u);
  EXPECT_EQ(g.weight("y", "x"), 2);
  EXPECT_EQ(g.degree("lonely"), 0);
  EXPECT_EQ(g.degree("x"), 2);
  EXPECT_EQ(g.degree_spectrum(), (std::map<long, long>{{2, 3}}));
}

TEST(PowerLaw, RecoversExponentOfExactSpectrum) {
  std::map<long, long> s;
  for (long d = 1; d <= 64; d *= 2) s[d] = std::llround(std::pow(2.0, 20) * std::pow(static_cast<double>(d), -2.0));
  const auto fit = fit_power_law(s);
  EXPECT_NEAR(fit.gamma, 2.0, 1e-12);
  EXPECT_NEAR(fit.intercept, 20 * std::log(2.0), 1e-9);
  EXPECT_NEAR(fit.r_squared, 1.0, 1e-12);
  EXPECT_EQ(fit.points_used, 7u);
}

TEST(PowerLaw, LogBinningAndDegenerateSpectra) {
  // degrees 1..255 fill the bins [1,2) .. [128,256) completely
  const auto s = oracle::power_law_spectrum(2.0, 1e6, 255);
  const auto binned = fit_power_law(s, true);
  EXPECT_NEAR(binned.gamma, 2.0, 0.15);
  EXPECT_GT(binned.r_squared, 0.99);
  EXPECT_THROW(fit_power_law(std::map<long, long>{{3, 10}}), DataError);
  EXPECT_THROW(fit_power_law(std::map<long, long>{}), DataError);
  EXPECT_THROW(fit_power_law(std::map<long, long>{{1, 5}, {2, 0}}), DataError);
  const auto flat = fit_power_law(std::map<long, long>{{1, 4}, {2, 4}, {3, 4}});
  EXPECT_EQ(flat.gamma, -0.0);
  EXPECT_EQ(flat.r_squared, 1.0);
  EXPECT_EQ(degree_spectrum_csv({{1, 5}, {2, 3}}), "degree,frequency\n1,5\n2,3\n");
}

TEST(Plots, SvgDocumentsAreWellFormed) {
  const auto proj = plot_projection({{0, 0}, {1, 2}}, "t <x>");
  EXPECT_TRUE(proj.starts_with("<svg"));
  EXPECT_NE(proj.find("t &lt;x&gt;"), std::string::npos);
  EXPECT_NE(proj.rfind("</svg>"), std::string::npos);
  PowerLawFit fit;
  fit.gamma = 2;
  fit.intercept = 3;
  EXPECT_NE(plot_degree_spectrum({{1, 20}, {2, 5}}, fit).find("</svg>"), std::string::npos);
  EXPECT_NE(plot_degree_spectrum({}, std::nullopt).find("</svg>"), std::string::npos);
  EXPECT_NE(plot_difficulty(difficulty_histogram({0, 1, 1})).find("</svg>"), std::string::npos);
}
