// SPDX-License-Identifier: Apache-2.0
#pragma once

// Benchmark contamination screening by embedding similarity. Only user-side
// text of each record is compared; a record is removed when its best cosine
// against any benchmark query reaches tau.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "icurate/corpus.hpp"
#include "icurate/embedding.hpp"
#include "icurate/gateway.hpp"
#include "icurate/parallel.hpp"
#include "icurate/util.hpp"

namespace icurate {

inline constexpr double kDefaultLeakageTau = 0.85;

struct BenchmarkQuerySet {
  std::string name;
  std::vector<std::string> queries;
  std::vector<EmbeddingVector> embeddings;  // aligned with queries

  void validate() const {
    if (queries.empty()) throw DataError("benchmark '" + name + "' has no queries");
    if (embeddings.size() != queries.size()) throw ContractError("benchmark '" + name + "' embeddings misaligned");
  }
};

struct LeakageMatch {
  std::string instruction_id;
  std::string benchmark;
  std::size_t matched_query_index = 0;
  double similarity = 0.0;
};

struct LeakageReport {
  std::vector<LeakageMatch> removed;
  double threshold = kDefaultLeakageTau;
};

/// Loads a JSONL file of {"query": "..."} lines.
inline std::vector<std::string> load_benchmark_queries(const std::string& path) {
  std::vector<std::string> out;
  std::size_t lineno = 0;
  for (const auto& line : split_lines(read_file(path))) {
    ++lineno;
    if (trim_view(line).empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line).at("query").get<std::string>());
    } catch (const std::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline BenchmarkQuerySet embed_benchmark(std::string name, std::vector<std::string> queries, Gateway& gw) {
  BenchmarkQuerySet b;
  b.name = std::move(name);
  b.queries = std::move(queries);
  b.embeddings = gw.embed_batch(b.queries);
  b.validate();
  return b;
}

struct LeakageResult {
  Corpus corpus;  // survivors, input order
  LeakageReport report;
};

/// Filter with precomputed instruction embeddings (aligned with corpus order).
inline LeakageResult filter_leaked(const Corpus& c, const std::vector<EmbeddingVector>& instruction_embeddings,
                                   const std::vector<BenchmarkQuerySet>& benches, double tau, std::size_t workers = 1) {
  if (!(tau > 0.0 && tau <= 1.0)) throw ContractError("tau must lie in (0, 1]");
  if (instruction_embeddings.size() != c.size()) throw ContractError("instruction embeddings misaligned with corpus");
  LeakageResult out;
  out.report.threshold = tau;
  if (benches.empty()) {
    out.corpus = c;
    return out;
  }
  std::vector<NormalizedMatrix> bench_mats;
  for (const auto& b : benches) {
    b.validate();
    bench_mats.emplace_back(b.embeddings);
  }
  const NormalizedMatrix inst(instruction_embeddings);
  std::vector<std::optional<LeakageMatch>> best(c.size());
  parallel_for(c.size(), workers, [&](std::size_t i) {
    const auto row = inst.row(i);
    std::optional<LeakageMatch> m;
    for (std::size_t b = 0; b < benches.size(); ++b) {
      for (std::size_t q = 0; q < bench_mats[b].rows(); ++q) {
        double sim = dot(row, bench_mats[b].row(q));
        // rounding can leave an exact duplicate a hair under 1
        if (sim > 1.0 - 1e-9 && instruction_embeddings[i] == benches[b].embeddings[q]) sim = 1.0;
        if (!m || sim > m->similarity) m = LeakageMatch{c[i].id, benches[b].name, q, sim};
      }
    }
    if (m && m->similarity >= tau) best[i] = m;
  });
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (best[i]) {
      out.report.removed.push_back(*best[i]);
    } else {
      out.corpus.add(c[i]);
    }
  }
  return out;
}

/// Embeds the user side of every record through the gateway, then filters.
inline LeakageResult filter_leaked(const Corpus& c, const std::vector<BenchmarkQuerySet>& benches, double tau,
                                   Gateway& gw, std::size_t workers = 1) {
  if (!(tau > 0.0 && tau <= 1.0)) throw ContractError("tau must lie in (0, 1]");
  if (benches.empty()) return filter_leaked(c, std::vector<EmbeddingVector>(c.size()), benches, tau, workers);
  std::vector<std::string> texts;
  texts.reserve(c.size());
  for (const auto& r : c) texts.push_back(user_text(r));
  return filter_leaked(c, gw.embed_batch(texts), benches, tau, workers);
}

inline std::string serialize_leakage_report(const LeakageReport& r) {
  std::string out;
  for (const auto& m : r.removed) {
    out += nlohmann::json{{"instruction_id", m.instruction_id},
                          {"benchmark", m.benchmark},
                          {"matched_query_index", m.matched_query_index},
                          {"similarity", m.similarity},
                          {"threshold", r.threshold}}
               .dump();
    out += '\n';
  }
  return out;
}

}  // namespace icurate
