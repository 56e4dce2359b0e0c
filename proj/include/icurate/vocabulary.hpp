// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "icurate/error.hpp"

namespace icurate {

struct VocabParams {
  double lambda = 0.91;   // cosine threshold for alias merging
  double eps = 0.47;      // density-clustering radius, in cosine distance
  int min_samples = 2;    // neighbours (self included) needed for a core point
  long min_freq = 100;    // entries below this merged frequency are dropped

  void validate() const {
    if (!(lambda > 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in (0, 1]");
    if (!(eps > 0.0)) throw ConfigError("eps must be > 0");
    if (min_samples < 1) throw ConfigError("min_samples must be >= 1");
    if (min_freq < 0) throw ConfigError("min_freq must be >= 0");
  }
};

struct VocabEntry {
  std::string id;       // equals the surface form of the representative
  std::string surface;
  long frequency = 0;   // summed raw frequency of surface and aliases
  std::set<std::string> merged_aliases;
  std::set<std::string> domain_tags;

  bool operator==(const VocabEntry&) const = default;
};

/// Normalized fine-grained tag vocabulary plus the raw-tag remap that produced it.
struct TagVocabulary {
  VocabParams params;
  std::map<std::string, VocabEntry> entries;
  /// raw tag -> entry id, or nullopt when its group was filtered out
  std::map<std::string, std::optional<std::string>> remap;

  bool contains(const std::string& id) const { return entries.count(id) != 0; }

  std::optional<long> frequency(const std::string& id) const {
    auto it = entries.find(id);
    if (it == entries.end()) return std::nullopt;
    return it->second.frequency;
  }

  std::size_t size() const { return entries.size(); }

  /// The k most frequent entry ids; ties broken by lexicographically smaller id.
  std::vector<std::string> top(std::size_t k) const {
    std::vector<const VocabEntry*> all;
    for (const auto& [id, e] : entries) all.push_back(&e);
    std::sort(all.begin(), all.end(), [](const VocabEntry* a, const VocabEntry* b) {
      if (a->frequency != b->frequency) return a->frequency > b->frequency;
      return a->id < b->id;
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back(all[i]->id);
    return out;
  }
};

inline nlohmann::json to_json(const TagVocabulary& v) {
  nlohmann::json j;
  j["params"] = {{"lambda", v.params.lambda},
                 {"eps", v.params.eps},
                 {"min_samples", v.params.min_samples},
                 {"min_freq", v.params.min_freq}};
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [id, e] : v.entries) {
    entries.push_back({{"id", e.id},
                       {"surface", e.surface},
                       {"frequency", e.frequency},
                       {"merged_aliases", e.merged_aliases},
                       {"domain_tags", e.domain_tags}});
  }
  j["entries"] = std::move(entries);
  nlohmann::json remap = nlohmann::json::object();
  for (const auto& [raw, id] : v.remap) remap[raw] = id ? nlohmann::json(*id) : nlohmann::json(nullptr);
  j["remap"] = std::move(remap);
  return j;
}

inline TagVocabulary vocabulary_from_json(const nlohmann::json& j) {
  TagVocabulary v;
  try {
    const auto& p = j.at("params");
    v.params.lambda = p.at("lambda").get<double>();
    v.params.eps = p.at("eps").get<double>();
    v.params.min_samples = p.at("min_samples").get<int>();
    v.params.min_freq = p.at("min_freq").get<long>();
    for (const auto& e : j.at("entries")) {
      VocabEntry entry;
      entry.id = e.at("id").get<std::string>();
      entry.surface = e.at("surface").get<std::string>();
      entry.frequency = e.at("frequency").get<long>();
      entry.merged_aliases = e.at("merged_aliases").get<std::set<std::string>>();
      entry.domain_tags = e.value("domain_tags", std::set<std::string>{});
      v.entries.emplace(entry.id, std::move(entry));
    }
    for (const auto& [raw, id] : j.at("remap").items()) {
      v.remap[raw] = id.is_null() ? std::nullopt : std::optional<std::string>(id.get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed vocabulary: ") + e.what());
  }
  return v;
}

}  // namespace icurate
