// SPDX-License-Identifier: Apache-2.0
#pragma once

// Distribution measurements over a corpus: 2D projection of embeddings, grid
// occupancy histogram, spatial entropy and coverage, per-record depth,
// difficulty histogram, tag co-occurrence graph and its degree power law.
// Natural logarithms throughout.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "icurate/corpus.hpp"
#include "icurate/embedding.hpp"
#include "icurate/gateway.hpp"
#include "icurate/parallel.hpp"
#include "icurate/prompts.hpp"
#include "icurate/util.hpp"

namespace icurate {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

// ---------------------------------------------------------------------------
// Projection

enum class Projection { pca, tsne };

inline const char* to_string(Projection p) { return p == Projection::pca ? "pca" : "tsne"; }

inline Projection projection_from_string(std::string_view s) {
  if (s == "pca") return Projection::pca;
  if (s == "tsne") return Projection::tsne;
  throw ConfigError("unknown projection '" + std::string(s) + "' (expected pca or tsne)");
}

namespace detail {

inline Eigen::MatrixXd to_matrix(const std::vector<EmbeddingVector>& embs) {
  if (embs.size() < 2) throw ContractError("projection needs at least two points");
  const auto d = embs.front().dim();
  if (d == 0) throw ContractError("projection input has zero dimensions");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(embs.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < embs.size(); ++i) {
    if (embs[i].dim() != d) throw ContractError("projection inputs differ in dimensionality");
    for (std::size_t k = 0; k < d; ++k) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = embs[i].values[k];
  }
  return x;
}

inline bool all_rows_identical(const Eigen::MatrixXd& x) {
  for (Eigen::Index i = 1; i < x.rows(); ++i) {
    if (x.row(i) != x.row(0)) return false;
  }
  return true;
}

}  // namespace detail

/// Principal-component projection onto the top two axes. Each axis is signed so
/// its largest-magnitude loading is positive, making the output unique.
inline std::vector<Point2> project_pca(const std::vector<EmbeddingVector>& embs) {
  Eigen::MatrixXd x = detail::to_matrix(embs);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  Eigen::MatrixXd v = svd.matrixV();
  const Eigen::Index comps = std::min<Eigen::Index>(2, v.cols());
  for (Eigen::Index c = 0; c < comps; ++c) {
    Eigen::Index arg = 0;
    v.col(c).cwiseAbs().maxCoeff(&arg);
    if (v(arg, c) < 0) v.col(c) *= -1.0;
  }
  const Eigen::MatrixXd proj = x * v.leftCols(comps);
  std::vector<Point2> out(embs.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out[i].x = proj(r, 0);
    out[i].y = comps > 1 ? proj(r, 1) : 0.0;
  }
  return out;
}

struct TsneParams {
  double perplexity = 30.0;
  int iterations = 750;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  int exaggeration_iters = 100;
  std::uint64_t seed = 0;
};

/// Exact (O(n^2)) t-SNE with Euclidean input affinities. Perplexity is clamped to
/// (n - 1) / 3 for small inputs.
inline std::vector<Point2> project_tsne(const std::vector<EmbeddingVector>& embs, const TsneParams& p) {
  const Eigen::MatrixXd x = detail::to_matrix(embs);
  const auto n = static_cast<std::size_t>(x.rows());
  const double perplexity = std::max(1.0, std::min(p.perplexity, (static_cast<double>(n) - 1.0) / 3.0));
  const double target_entropy = std::log(perplexity);

  std::vector<double> d2(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      d2[i * n + j] = (x.row(static_cast<Eigen::Index>(i)) - x.row(static_cast<Eigen::Index>(j))).squaredNorm();
    }
  }
  // conditional affinities by bisection on the precision beta
  std::vector<double> pc(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    for (int step = 0; step < 64; ++step) {
      double sum = 0.0, weighted = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double w = std::exp(-beta * d2[i * n + j]);
        pc[i * n + j] = w;
        sum += w;
        weighted += w * d2[i * n + j];
      }
      if (sum <= 0.0) {
        hi = beta;
        beta = (lo + hi) / 2.0;
        continue;
      }
      const double entropy = std::log(sum) + beta * weighted / sum;
      for (std::size_t j = 0; j < n; ++j) pc[i * n + j] /= sum;
      if (std::abs(entropy - target_entropy) < 1e-5) break;
      if (entropy > target_entropy) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : (lo + hi) / 2.0;
      } else {
        hi = beta;
        beta = (lo + hi) / 2.0;
      }
    }
  }
  std::vector<double> pj(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      pj[i * n + j] = std::max((pc[i * n + j] + pc[j * n + i]) / (2.0 * static_cast<double>(n)), 1e-12);
    }
  }

  Rng rng(p.seed, "tsne");
  std::vector<double> y(n * 2), vel(n * 2, 0.0), gains(n * 2, 1.0), grad(n * 2);
  for (auto& v : y) v = 1e-4 * rng.normal();
  std::vector<double> q(n * n);
  for (int it = 0; it < p.iterations; ++it) {
    const double exag = it < p.exaggeration_iters ? p.early_exaggeration : 1.0;
    const double momentum = it < 250 ? 0.5 : 0.8;
    double qsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) {
          q[i * n + j] = 0.0;
          continue;
        }
        const double dx = y[2 * i] - y[2 * j], dy = y[2 * i + 1] - y[2 * j + 1];
        q[i * n + j] = 1.0 / (1.0 + dx * dx + dy * dy);
        qsum += q[i * n + j];
      }
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double mult = 4.0 * (exag * pj[i * n + j] - q[i * n + j] / qsum) * q[i * n + j];
        grad[2 * i] += mult * (y[2 * i] - y[2 * j]);
        grad[2 * i + 1] += mult * (y[2 * i + 1] - y[2 * j + 1]);
      }
    }
    for (std::size_t k = 0; k < y.size(); ++k) {
      gains[k] = (grad[k] > 0) != (vel[k] > 0) ? gains[k] + 0.2 : std::max(0.01, gains[k] * 0.8);
      vel[k] = momentum * vel[k] - p.learning_rate * gains[k] * grad[k];
      y[k] += vel[k];
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mx += y[2 * i];
      my += y[2 * i + 1];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[2 * i] -= mx;
      y[2 * i + 1] -= my;
    }
  }
  std::vector<Point2> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = {y[2 * i], y[2 * i + 1]};
  return out;
}

struct ProjectionResult {
  std::vector<Point2> points;
  Projection method_used = Projection::pca;
  std::vector<std::string> warnings;
};

/// PCA by default (deterministic, seed-free). t-SNE on all-identical inputs
/// falls back to PCA with a warning.
inline ProjectionResult project_2d(const std::vector<EmbeddingVector>& embs, Projection method,
                                   std::uint64_t seed = 0) {
  ProjectionResult out;
  if (method == Projection::tsne) {
    if (detail::all_rows_identical(detail::to_matrix(embs))) {
      out.warnings.push_back("all inputs identical; t-SNE replaced by PCA");
    } else {
      TsneParams p;
      p.seed = seed;
      out.points = project_tsne(embs, p);
      out.method_used = Projection::tsne;
      return out;
    }
  }
  out.points = project_pca(embs);
  out.method_used = Projection::pca;
  return out;
}

// ---------------------------------------------------------------------------
// Grid histogram, entropy, coverage

struct GridHistogram {
  std::size_t n_side = 200;
  std::vector<long> counts;  // n_side * n_side, index = ix * n_side + iy
  double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
  long total = 0;

  long at(std::size_t ix, std::size_t iy) const { return counts[ix * n_side + iy]; }

  std::size_t non_empty() const {
    return static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(), [](long c) { return c > 0; }));
  }

  /// Histogram over arbitrary pre-counted cells; used for fixtures and merges.
  static GridHistogram from_counts(std::size_t n_side, std::vector<long> counts) {
    if (n_side < 1) throw ContractError("n_side must be >= 1");
    if (counts.size() > n_side * n_side) throw ContractError("more cells than the grid holds");
    counts.resize(n_side * n_side, 0);
    GridHistogram h;
    h.n_side = n_side;
    for (long c : counts) {
      if (c < 0) throw ContractError("negative cell count");
      h.total += c;
    }
    h.counts = std::move(counts);
    return h;
  }
};

/// Bounds are the data bounding box; a degenerate axis gets width 1 so all its
/// points fall in cell 0. Points on the max edge land in the last cell.
inline GridHistogram grid_histogram(const std::vector<Point2>& points, std::size_t n_side = 200) {
  if (n_side < 1) throw ContractError("n_side must be >= 1");
  if (points.empty()) throw ContractError("grid histogram of an empty point set");
  GridHistogram h;
  h.n_side = n_side;
  h.counts.assign(n_side * n_side, 0);
  h.xmin = h.xmax = points.front().x;
  h.ymin = h.ymax = points.front().y;
  for (const auto& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw ContractError("non-finite projected point");
    h.xmin = std::min(h.xmin, p.x);
    h.xmax = std::max(h.xmax, p.x);
    h.ymin = std::min(h.ymin, p.y);
    h.ymax = std::max(h.ymax, p.y);
  }
  if (h.xmax == h.xmin) h.xmax = h.xmin + 1.0;
  if (h.ymax == h.ymin) h.ymax = h.ymin + 1.0;
  const auto cell = [n_side](double v, double lo, double hi) {
    const double f = std::floor(static_cast<double>(n_side) * (v - lo) / (hi - lo));
    return static_cast<std::size_t>(std::clamp(f, 0.0, static_cast<double>(n_side - 1)));
  };
  for (const auto& p : points) {
    ++h.counts[cell(p.x, h.xmin, h.xmax) * n_side + cell(p.y, h.ymin, h.ymax)];
  }
  h.total = static_cast<long>(points.size());
  return h;
}

/// -sum p_i ln p_i over non-empty cells, p_i = count_i / total.
inline double spatial_entropy(const GridHistogram& h) {
  if (h.total < 1) throw ContractError("entropy of an empty histogram");
  const double total = static_cast<double>(h.total);
  double s = 0.0;
  for (long c : h.counts) {
    if (c <= 0) continue;
    const double p = static_cast<double>(c) / total;
    s -= p * std::log(p);
  }
  // the exact value lies in [0, ln(non-empty)]; clamp away rounding at the ends
  const double upper = std::log(static_cast<double>(h.non_empty()));
  return std::clamp(s, 0.0, upper) + 0.0;
}

/// ln(number of non-empty cells).
inline double coverage_metric(const GridHistogram& h) {
  if (h.total < 1) throw ContractError("coverage of an empty histogram");
  return std::log(static_cast<double>(h.non_empty()));
}

// ---------------------------------------------------------------------------
// Depth

/// ln(|fine_tags|) * base_loss; nullopt when the record has no tags or no loss.
inline std::optional<double> depth_metric(const InstructionRecord& r) {
  if (r.fine_tags.empty() || !r.base_loss) return std::nullopt;
  return std::log(static_cast<double>(r.fine_tags.size())) * *r.base_loss;
}

struct DepthSummary {
  double sum = 0.0;
  double mean = 0.0;
  std::size_t count = 0;
  std::size_t excluded = 0;
};

inline DepthSummary depth_summary(const Corpus& c) {
  DepthSummary s;
  for (const auto& r : c) {
    if (auto d = depth_metric(r)) {
      s.sum += *d;
      ++s.count;
    } else {
      ++s.excluded;
    }
  }
  if (s.count) s.mean = s.sum / static_cast<double>(s.count);
  return s;
}

// ---------------------------------------------------------------------------
// Difficulty

inline constexpr std::array<const char*, 5> kDifficultyLabels = {"very easy", "easy", "medium", "hard", "very hard"};

/// Maps one of the five labels (case and whitespace insensitive, optional quotes
/// or trailing period) to 0..4. Anything else is rejected.
inline std::optional<int> parse_difficulty_label(std::string_view reply) {
  std::string_view t = trim_view(reply);
  while (!t.empty() && (t.back() == '.' || t.back() == '"' || t.back() == '\'')) t.remove_suffix(1);
  while (!t.empty() && (t.front() == '"' || t.front() == '\'')) t.remove_prefix(1);
  std::string norm;
  bool space = false;
  for (char c : trim_view(t)) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == '_' || c == '-') {
      space = true;
      continue;
    }
    if (space && !norm.empty()) norm += ' ';
    space = false;
    norm += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  for (std::size_t i = 0; i < kDifficultyLabels.size(); ++i) {
    if (norm == kDifficultyLabels[i]) return static_cast<int>(i);
  }
  return std::nullopt;
}

inline constexpr ModelRole kScorerRole = ModelRole::scorer;

/// Scores each record's user text; unparseable replies stay nullopt.
inline std::vector<std::optional<int>> score_difficulty(const Corpus& c, Gateway& gw, const TemplateSet& templates,
                                                        std::size_t workers = 1) {
  std::vector<std::optional<int>> out(c.size());
  const auto& t = templates.get("difficulty");
  parallel_for(c.size(), workers, [&](std::size_t i) {
    const Bindings b{{"instruction", user_text(c[i])}};
    ChatRequest req;
    req.system = t.render_system(b);
    req.user = t.render_user(b);
    req.model_role = kScorerRole;
    req.max_tokens = 8;
    out[i] = parse_difficulty_label(gw.chat_complete(req));
  });
  return out;
}

struct DifficultyHistogram {
  std::array<long, 5> counts{};
  double mean = 0.0;
  std::size_t scored = 0;
  std::size_t unscored = 0;
};

inline DifficultyHistogram difficulty_histogram(const std::vector<std::optional<int>>& scores) {
  DifficultyHistogram h;
  double sum = 0.0;
  for (const auto& s : scores) {
    if (!s || *s < 0 || *s > 4) {
      ++h.unscored;
      continue;
    }
    ++h.counts[static_cast<std::size_t>(*s)];
    sum += *s;
    ++h.scored;
  }
  if (h.scored) h.mean = sum / static_cast<double>(h.scored);
  return h;
}

inline DifficultyHistogram difficulty_histogram(const Corpus& c) {
  std::vector<std::optional<int>> scores;
  scores.reserve(c.size());
  for (const auto& r : c) scores.push_back(r.difficulty);
  return difficulty_histogram(scores);
}

// ---------------------------------------------------------------------------
// Co-occurrence graph and power law

struct CoOccurrenceGraph {
  std::set<std::string> nodes;
  std::map<std::pair<std::string, std::string>, long> weights;  // key.first < key.second
  std::map<std::string, long> degrees;                          // distinct neighbours

  std::size_t edge_count() const { return weights.size(); }

  long weight(const std::string& a, const std::string& b) const {
    auto it = weights.find(a < b ? std::make_pair(a, b) : std::make_pair(b, a));
    return it == weights.end() ? 0 : it->second;
  }

  long degree(const std::string& node) const {
    auto it = degrees.find(node);
    return it == degrees.end() ? 0 : it->second;
  }

  /// degree -> number of nodes with that degree, for degree >= 1
  std::map<long, long> degree_spectrum() const {
    std::map<long, long> spec;
    for (const auto& [node, d] : degrees) {
      if (d >= 1) ++spec[d];
    }
    return spec;
  }
};

/// Every unordered pair of distinct tags in a record adds 1 to that edge.
inline CoOccurrenceGraph build_cooccurrence_graph(const Corpus& c) {
  CoOccurrenceGraph g;
  for (const auto& r : c) {
    const std::vector<std::string> tags(r.fine_tags.begin(), r.fine_tags.end());  // sorted, unique
    g.nodes.insert(tags.begin(), tags.end());
    for (std::size_t i = 0; i < tags.size(); ++i) {
      for (std::size_t j = i + 1; j < tags.size(); ++j) ++g.weights[{tags[i], tags[j]}];
    }
  }
  for (const auto& n : g.nodes) g.degrees[n] = 0;
  for (const auto& [edge, w] : g.weights) {
    ++g.degrees[edge.first];
    ++g.degrees[edge.second];
  }
  return g;
}

struct PowerLawFit {
  double gamma = 0.0;      // P(d) ~ d^-gamma
  double intercept = 0.0;  // ln Freq at ln d = 0
  double r_squared = 0.0;
  std::size_t points_used = 0;
};

/// Least squares through (ln d, ln Freq(d)). With `log_binning`, degrees are
/// pooled into [2^k, 2^(k+1)) bins, each bin's frequency divided by its width
/// and placed at the bin's geometric centre.
inline PowerLawFit fit_power_law(const std::map<long, long>& spectrum, bool log_binning = false) {
  std::vector<std::pair<double, double>> pts;
  if (!log_binning) {
    for (const auto& [d, f] : spectrum) {
      if (d >= 1 && f > 0) pts.emplace_back(std::log(static_cast<double>(d)), std::log(static_cast<double>(f)));
    }
  } else {
    std::map<int, long> bins;
    for (const auto& [d, f] : spectrum) {
      if (d < 1 || f <= 0) continue;
      int k = 0;
      while ((2L << k) <= d) ++k;
      bins[k] += f;
    }
    for (const auto& [k, f] : bins) {
      const double lo = static_cast<double>(1L << k);
      const double width = lo;  // [2^k, 2^(k+1))
      pts.emplace_back(std::log(std::sqrt(lo * (2.0 * lo))), std::log(static_cast<double>(f) / width));
    }
  }
  if (pts.size() < 2) throw DataError("degenerate degree spectrum: fewer than two usable points");
  const double n = static_cast<double>(pts.size());
  double sx = 0, sy = 0;
  for (const auto& [x, y] : pts) {
    sx += x;
    sy += y;
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& [x, y] : pts) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
    syy += (y - my) * (y - my);
  }
  PowerLawFit fit;
  const double slope = sxy / sxx;
  fit.gamma = -slope;
  fit.intercept = my - slope * mx;
  double ss_res = 0;
  for (const auto& [x, y] : pts) {
    const double e = y - (fit.intercept + slope * x);
    ss_res += e * e;
  }
  fit.r_squared = syy == 0.0 ? 1.0 : std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  fit.points_used = pts.size();
  return fit;
}

inline PowerLawFit fit_power_law(const CoOccurrenceGraph& g, bool log_binning = false) {
  return fit_power_law(g.degree_spectrum(), log_binning);
}

inline std::string degree_spectrum_csv(const std::map<long, long>& spectrum) {
  std::string out = "degree,frequency\n";
  for (const auto& [d, f] : spectrum) out += std::to_string(d) + "," + std::to_string(f) + "\n";
  return out;
}

}  // namespace icurate
