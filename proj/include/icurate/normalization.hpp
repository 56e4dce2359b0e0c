// SPDX-License-Identifier: Apache-2.0
#pragma once

// Raw tags -> normalized vocabulary:
//   1. alias merge: connected components of the graph with an edge wherever
//      cosine >= lambda; the most frequent member represents the group
//   2. density clustering (cosine distance) over group representatives; each
//      cluster collapses into one entry, noise points stay as their own entries
//   3. frequency filter on the summed frequency

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "icurate/corpus.hpp"
#include "icurate/embedding.hpp"
#include "icurate/gateway.hpp"
#include "icurate/parallel.hpp"
#include "icurate/tagging.hpp"
#include "icurate/vocabulary.hpp"

namespace icurate {

struct TagCount {
  std::string tag;
  long frequency = 0;
};

enum class MergeRule { threshold, dbscan };

inline const char* to_string(MergeRule r) { return r == MergeRule::threshold ? "threshold" : "dbscan"; }

struct MergeGroup {
  std::string representative;
  std::set<std::string> members;  // includes the representative
  MergeRule rule = MergeRule::threshold;
  long frequency = 0;             // sum of member frequencies

  bool operator==(const MergeGroup&) const = default;
};

using EmbeddingTable = std::unordered_map<std::string, EmbeddingVector>;

namespace detail {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

/// Higher frequency wins; equal frequency goes to the lexicographically smaller tag.
inline bool better_representative(const std::string& a, long fa, const std::string& b, long fb) {
  return fa != fb ? fa > fb : a < b;
}

}  // namespace detail

/// Groups tags whose embeddings reach cosine >= lambda, transitively. Output is
/// sorted by representative, so it does not depend on input order.
inline std::vector<MergeGroup> merge_by_threshold(const std::vector<TagCount>& tags, const EmbeddingTable& emb,
                                                  double lambda, std::size_t workers = 1) {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw ContractError("lambda must lie in (0, 1]");
  const std::size_t n = tags.size();
  std::vector<const EmbeddingVector*> vecs(n);
  std::vector<double> norms(n);
  std::set<std::string> seen;
  for (std::size_t i = 0; i < n; ++i) {
    if (!seen.insert(tags[i].tag).second) throw ContractError("duplicate tag '" + tags[i].tag + "' in merge input");
    auto it = emb.find(tags[i].tag);
    if (it == emb.end()) throw DataError("missing embedding for tag '" + tags[i].tag + "'");
    vecs[i] = &it->second;
    norms[i] = norm(vecs[i]->view());
  }
  std::vector<std::vector<std::size_t>> edges(n);
  parallel_for(n, workers, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double sim =
          (norms[i] == 0.0 || norms[j] == 0.0) ? 0.0 : dot(vecs[i]->view(), vecs[j]->view()) / (norms[i] * norms[j]);
      if (sim >= lambda) edges[i].push_back(j);
    }
  });
  detail::DisjointSets sets(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto j : edges[i]) sets.unite(i, j);
  }
  std::map<std::size_t, MergeGroup> by_root;
  for (std::size_t i = 0; i < n; ++i) {
    auto& g = by_root[sets.find(i)];
    g.rule = MergeRule::threshold;
    g.members.insert(tags[i].tag);
    g.frequency += tags[i].frequency;
  }
  std::unordered_map<std::string, long> freq;
  for (const auto& t : tags) freq[t.tag] = t.frequency;
  std::vector<MergeGroup> groups;
  groups.reserve(by_root.size());
  for (auto& [root, g] : by_root) {
    for (const auto& m : g.members) {
      if (g.representative.empty() || detail::better_representative(m, freq[m], g.representative, freq[g.representative])) {
        g.representative = m;
      }
    }
    groups.push_back(std::move(g));
  }
  std::sort(groups.begin(), groups.end(),
            [](const MergeGroup& a, const MergeGroup& b) { return a.representative < b.representative; });
  return groups;
}

inline constexpr int kNoise = -1;

/// Density-based clustering with cosine distance (1 - cosine similarity).
/// A point is core when at least `min_samples` points (itself included) lie
/// within `eps`. Clusters are numbered in order of their first core point in
/// input order; a border point joins the first cluster that reaches it.
inline std::vector<int> dbscan_cluster(const std::vector<EmbeddingVector>& points, double eps, int min_samples,
                                       std::size_t workers = 1) {
  if (!(eps > 0.0)) throw ContractError("eps must be > 0");
  if (min_samples < 1) throw ContractError("min_samples must be >= 1");
  const std::size_t n = points.size();
  if (n == 0) return {};
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (points[i].dim() != points[0].dim()) throw ContractError("points differ in dimensionality");
    norms[i] = norm(points[i].view());
  }
  std::vector<std::vector<std::size_t>> neighbors(n);
  parallel_for(n, workers, [&](std::size_t i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) {
        neighbors[i].push_back(j);
        continue;
      }
      const double sim =
          (norms[i] == 0.0 || norms[j] == 0.0) ? 0.0 : dot(points[i].view(), points[j].view()) / (norms[i] * norms[j]);
      if (1.0 - sim <= eps) neighbors[i].push_back(j);
    }
  });
  const auto is_core = [&](std::size_t i) { return neighbors[i].size() >= static_cast<std::size_t>(min_samples); };

  constexpr int kUnvisited = -2;
  std::vector<int> labels(n, kUnvisited);
  int cluster = 0;
  std::vector<std::size_t> frontier;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != kUnvisited) continue;
    if (!is_core(i)) {
      labels[i] = kNoise;
      continue;
    }
    labels[i] = cluster;
    frontier.assign(neighbors[i].begin(), neighbors[i].end());
    for (std::size_t head = 0; head < frontier.size(); ++head) {
      const std::size_t j = frontier[head];
      if (labels[j] == kNoise) labels[j] = cluster;  // border point
      if (labels[j] != kUnvisited) continue;
      labels[j] = cluster;
      if (is_core(j)) frontier.insert(frontier.end(), neighbors[j].begin(), neighbors[j].end());
    }
    ++cluster;
  }
  return labels;
}

struct FilteredVocabulary {
  TagVocabulary vocabulary;      // remap left empty
  std::vector<MergeGroup> dropped;
};

/// Keeps groups whose summed frequency is at least `min_freq`.
inline FilteredVocabulary apply_frequency_filter(const std::vector<MergeGroup>& groups, long min_freq) {
  if (min_freq < 0) throw ContractError("min_freq must be >= 0");
  FilteredVocabulary out;
  out.vocabulary.params.min_freq = min_freq;
  for (const auto& g : groups) {
    if (g.frequency < min_freq) {
      out.dropped.push_back(g);
      continue;
    }
    VocabEntry e;
    e.id = g.representative;
    e.surface = g.representative;
    e.frequency = g.frequency;
    e.merged_aliases = g.members;
    e.merged_aliases.erase(g.representative);
    if (!out.vocabulary.entries.emplace(e.id, e).second) {
      throw ContractError("two groups share representative '" + g.representative + "'");
    }
  }
  return out;
}

/// Raw tag frequencies: the number of assignments that carry each tag.
inline std::vector<TagCount> count_raw_tags(const std::vector<RawTagAssignment>& assignments) {
  std::map<std::string, long> counts;
  for (const auto& a : assignments) {
    std::set<std::string> uniq(a.tags.begin(), a.tags.end());
    for (const auto& t : uniq) ++counts[t];
  }
  std::vector<TagCount> out;
  out.reserve(counts.size());
  for (const auto& [tag, f] : counts) out.push_back({tag, f});
  return out;
}

struct NormalizationResult {
  TagVocabulary vocabulary;                 // includes the full remap
  std::vector<MergeGroup> threshold_groups;
  std::vector<MergeGroup> final_groups;     // after clustering, before the filter
  std::vector<MergeGroup> dropped;
  long total_raw_occurrences = 0;
};

/// Full normalization given precomputed embeddings for every raw tag.
inline NormalizationResult normalize_vocabulary(const std::vector<TagCount>& raw, const EmbeddingTable& emb,
                                                const VocabParams& params, std::size_t workers = 1) {
  params.validate();
  NormalizationResult result;
  std::unordered_map<std::string, long> raw_freq;
  for (const auto& t : raw) {
    raw_freq[t.tag] = t.frequency;
    result.total_raw_occurrences += t.frequency;
  }
  result.threshold_groups = merge_by_threshold(raw, emb, params.lambda, workers);

  std::vector<EmbeddingVector> rep_points;
  rep_points.reserve(result.threshold_groups.size());
  for (const auto& g : result.threshold_groups) rep_points.push_back(emb.at(g.representative));
  const auto labels = dbscan_cluster(rep_points, params.eps, params.min_samples, workers);

  std::map<int, MergeGroup> clusters;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& g = result.threshold_groups[i];
    if (labels[i] == kNoise) {
      result.final_groups.push_back(g);
      continue;
    }
    auto& c = clusters[labels[i]];
    c.rule = MergeRule::dbscan;
    c.members.insert(g.members.begin(), g.members.end());
    c.frequency += g.frequency;
  }
  for (auto& [label, c] : clusters) {
    for (const auto& m : c.members) {
      if (c.representative.empty() ||
          detail::better_representative(m, raw_freq[m], c.representative, raw_freq[c.representative])) {
        c.representative = m;
      }
    }
    result.final_groups.push_back(std::move(c));
  }
  std::sort(result.final_groups.begin(), result.final_groups.end(),
            [](const MergeGroup& a, const MergeGroup& b) { return a.representative < b.representative; });

  auto filtered = apply_frequency_filter(result.final_groups, params.min_freq);
  result.vocabulary = std::move(filtered.vocabulary);
  result.vocabulary.params = params;
  result.dropped = std::move(filtered.dropped);
  for (const auto& g : result.final_groups) {
    const bool kept = result.vocabulary.contains(g.representative);
    for (const auto& m : g.members) {
      result.vocabulary.remap[m] = kept ? std::optional<std::string>(g.representative) : std::nullopt;
    }
  }
  return result;
}

/// Embeds every distinct raw tag through the gateway, then normalizes.
inline NormalizationResult normalize_vocabulary(const std::vector<RawTagAssignment>& assignments, Gateway& gw,
                                                const VocabParams& params, std::size_t workers = 1) {
  const auto raw = count_raw_tags(assignments);
  std::vector<std::string> texts;
  texts.reserve(raw.size());
  for (const auto& t : raw) texts.push_back(t.tag);
  const auto vecs = gw.embed_batch(texts);
  EmbeddingTable emb;
  for (std::size_t i = 0; i < texts.size(); ++i) emb.emplace(texts[i], vecs[i]);
  return normalize_vocabulary(raw, emb, params, workers);
}

/// Rewrites each record's fine_tags through the vocabulary remap. Records
/// without an assignment keep no fine tags.
inline void rewrite_tags(Corpus& c, const std::vector<RawTagAssignment>& assignments, const TagVocabulary& vocab) {
  std::unordered_map<std::string, const RawTagAssignment*> by_id;
  for (const auto& a : assignments) by_id[a.instruction_id] = &a;
  for (std::size_t i = 0; i < c.size(); ++i) {
    auto& r = c.at_mutable(i);
    r.fine_tags.clear();
    auto it = by_id.find(r.id);
    if (it == by_id.end()) continue;
    for (const auto& raw : it->second->tags) {
      auto m = vocab.remap.find(raw);
      if (m != vocab.remap.end() && m->second) r.fine_tags.insert(*m->second);
    }
  }
}

}  // namespace icurate
