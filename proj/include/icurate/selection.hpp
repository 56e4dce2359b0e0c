// SPDX-License-Identifier: Apache-2.0
#pragma once

// Informative seed selection. Each criterion is evaluated independently over the
// whole corpus and the seed set is their union, with per-criterion membership.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "icurate/corpus.hpp"
#include "icurate/util.hpp"
#include "icurate/vocabulary.hpp"

namespace icurate {

using IdSet = std::set<std::string>;

struct SelectionParams {
  std::size_t hard_k = 50000;           // hard-to-follow: smallest loss-reduction ratio
  long long_tail_below = 200;           // any tag rarer than this -> always included
  long sample_lo = 200;                 // min tag frequency range sampled at sample_fraction
  long sample_hi = 500;
  double sample_fraction = 0.30;
  std::size_t multi_skill_min_tags = 5; // strictly more than four
  double sigma_multiplier = 1.96;
  std::size_t undertrained_cap = 200000;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (sample_lo > sample_hi) throw ConfigError("selection sample range is empty");
    if (!(sample_fraction >= 0.0 && sample_fraction <= 1.0)) throw ConfigError("sample_fraction must lie in [0, 1]");
    if (!std::isfinite(sigma_multiplier)) throw ConfigError("sigma_multiplier must be finite");
  }
};

struct CriterionResult {
  IdSet ids;
  std::size_t skipped = 0;  // records the criterion could not evaluate
  std::vector<std::string> warnings;
};

/// Loss-reduction ratio (base - ft) / base; the k smallest win, ties by id.
/// Records without both losses, or with base_loss == 0, are skipped.
inline CriterionResult select_hard_to_follow(const Corpus& c, std::size_t k) {
  CriterionResult out;
  std::vector<std::pair<double, const std::string*>> ranked;
  for (const auto& r : c) {
    if (!r.base_loss || !r.ft_loss) {
      ++out.skipped;
      continue;
    }
    if (*r.base_loss == 0.0) {
      ++out.skipped;
      out.warnings.push_back("record '" + r.id + "' has base_loss 0; reduction ratio undefined");
      continue;
    }
    ranked.emplace_back((*r.base_loss - *r.ft_loss) / *r.base_loss, &r.id);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first < b.first : *a.second < *b.second;
  });
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) out.ids.insert(*ranked[i].second);
  return out;
}

/// Records carrying a tag rarer than `long_tail_below` are always included.
/// Of the remaining records whose rarest tag frequency lies in [sample_lo, sample_hi],
/// round(sample_fraction * n) are drawn uniformly without replacement.
inline CriterionResult select_long_tail(const Corpus& c, const TagVocabulary& vocab, const SelectionParams& p) {
  CriterionResult out;
  std::vector<std::string> pool;
  for (const auto& r : c) {
    std::optional<long> min_freq;
    for (const auto& tag : r.fine_tags) {
      if (auto f = vocab.frequency(tag)) min_freq = min_freq ? std::min(*min_freq, *f) : *f;
    }
    if (!min_freq) {
      ++out.skipped;
      continue;
    }
    if (*min_freq < p.long_tail_below) {
      out.ids.insert(r.id);
    } else if (*min_freq >= p.sample_lo && *min_freq <= p.sample_hi) {
      pool.push_back(r.id);
    }
  }
  std::sort(pool.begin(), pool.end());
  const auto take = static_cast<std::size_t>(std::llround(p.sample_fraction * static_cast<double>(pool.size())));
  Rng rng(p.rng_seed, "long_tail");
  rng.shuffle(pool);
  for (std::size_t i = 0; i < std::min(take, pool.size()); ++i) out.ids.insert(pool[i]);
  return out;
}

inline CriterionResult select_multi_skill(const Corpus& c, std::size_t min_tags = 5) {
  CriterionResult out;
  for (const auto& r : c) {
    if (r.fine_tags.size() >= min_tags) out.ids.insert(r.id);
  }
  return out;
}

struct LossStats {
  double mean = 0.0;
  double stddev = 0.0;  // population
  double threshold = 0.0;
  std::size_t count = 0;
};

inline LossStats base_loss_stats(const Corpus& c, double sigma_multiplier) {
  LossStats s;
  double sum = 0.0;
  for (const auto& r : c) {
    if (!r.base_loss) continue;
    sum += *r.base_loss;
    ++s.count;
  }
  if (s.count == 0) return s;
  s.mean = sum / static_cast<double>(s.count);
  double sq = 0.0;
  for (const auto& r : c) {
    if (r.base_loss) sq += (*r.base_loss - s.mean) * (*r.base_loss - s.mean);
  }
  s.stddev = std::sqrt(sq / static_cast<double>(s.count));
  s.threshold = s.mean + sigma_multiplier * s.stddev;
  return s;
}

/// base_loss strictly above mean + sigma * std (population), highest losses first,
/// truncated to `cap`. Fewer than two losses yields an empty result.
inline CriterionResult select_undertrained(const Corpus& c, std::size_t cap, double sigma_multiplier = 1.96) {
  CriterionResult out;
  const auto stats = base_loss_stats(c, sigma_multiplier);
  out.skipped = c.size() - stats.count;
  if (stats.count < 2) {
    out.warnings.push_back("fewer than two records carry base_loss; undertrained criterion is empty");
    return out;
  }
  std::vector<std::pair<double, const std::string*>> above;
  for (const auto& r : c) {
    if (r.base_loss && *r.base_loss > stats.threshold) above.emplace_back(*r.base_loss, &r.id);
  }
  std::sort(above.begin(), above.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : *a.second < *b.second;
  });
  for (std::size_t i = 0; i < std::min(cap, above.size()); ++i) out.ids.insert(*above[i].second);
  return out;
}

inline constexpr const char* kCriterionHard = "hard_to_follow";
inline constexpr const char* kCriterionLongTail = "long_tail";
inline constexpr const char* kCriterionMultiSkill = "multi_skill";
inline constexpr const char* kCriterionUndertrained = "undertrained";

struct SelectionReport {
  IdSet selected_ids;
  std::map<std::string, IdSet> per_criterion;
  std::map<std::string, std::size_t> skipped;
  SelectionParams params;
  std::uint64_t rng_seed = 0;

  /// id -> criteria that selected it
  std::map<std::string, std::vector<std::string>> membership() const {
    std::map<std::string, std::vector<std::string>> m;
    for (const auto& [name, ids] : per_criterion) {
      for (const auto& id : ids) m[id].push_back(name);
    }
    return m;
  }
};

/// Union of the criterion results with membership recorded.
inline SelectionReport compose_seed_set(const std::map<std::string, CriterionResult>& criteria,
                                        const SelectionParams& params) {
  SelectionReport report;
  report.params = params;
  report.rng_seed = params.rng_seed;
  for (const auto& [name, result] : criteria) {
    report.per_criterion[name] = result.ids;
    report.skipped[name] = result.skipped;
    report.selected_ids.insert(result.ids.begin(), result.ids.end());
  }
  return report;
}

inline SelectionReport run_selection(const Corpus& c, const TagVocabulary& vocab, const SelectionParams& params) {
  params.validate();
  std::map<std::string, CriterionResult> criteria;
  criteria[kCriterionHard] = select_hard_to_follow(c, params.hard_k);
  criteria[kCriterionLongTail] = select_long_tail(c, vocab, params);
  criteria[kCriterionMultiSkill] = select_multi_skill(c, params.multi_skill_min_tags);
  criteria[kCriterionUndertrained] = select_undertrained(c, params.undertrained_cap, params.sigma_multiplier);
  return compose_seed_set(criteria, params);
}

/// Selected records in corpus order.
inline Corpus seed_corpus(const Corpus& c, const SelectionReport& report) {
  Corpus out;
  for (const auto& r : c) {
    if (report.selected_ids.count(r.id)) out.add(r);
  }
  return out;
}

inline nlohmann::json to_json(const SelectionReport& r) {
  const auto& p = r.params;
  nlohmann::json j;
  j["rng_seed"] = r.rng_seed;
  j["params"] = {{"hard_k", p.hard_k},
                 {"long_tail_below", p.long_tail_below},
                 {"sample_lo", p.sample_lo},
                 {"sample_hi", p.sample_hi},
                 {"sample_fraction", p.sample_fraction},
                 {"multi_skill_min_tags", p.multi_skill_min_tags},
                 {"sigma_multiplier", p.sigma_multiplier},
                 {"undertrained_cap", p.undertrained_cap}};
  j["selected_ids"] = r.selected_ids;
  j["per_criterion"] = r.per_criterion;
  j["skipped"] = r.skipped;
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [name, ids] : r.per_criterion) counts[name] = ids.size();
  counts["selected"] = r.selected_ids.size();
  j["counts"] = std::move(counts);
  j["membership"] = r.membership();
  return j;
}

inline SelectionReport selection_from_json(const nlohmann::json& j) {
  SelectionReport r;
  try {
    r.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    const auto& p = j.at("params");
    r.params.hard_k = p.at("hard_k").get<std::size_t>();
    r.params.long_tail_below = p.at("long_tail_below").get<long>();
    r.params.sample_lo = p.at("sample_lo").get<long>();
    r.params.sample_hi = p.at("sample_hi").get<long>();
    r.params.sample_fraction = p.at("sample_fraction").get<double>();
    r.params.multi_skill_min_tags = p.at("multi_skill_min_tags").get<std::size_t>();
    r.params.sigma_multiplier = p.at("sigma_multiplier").get<double>();
    r.params.undertrained_cap = p.at("undertrained_cap").get<std::size_t>();
    r.params.rng_seed = r.rng_seed;
    r.selected_ids = j.at("selected_ids").get<IdSet>();
    r.per_criterion = j.at("per_criterion").get<std::map<std::string, IdSet>>();
    r.skipped = j.value("skipped", std::map<std::string, std::size_t>{});
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed selection report: ") + e.what());
  }
  return r;
}

}  // namespace icurate
