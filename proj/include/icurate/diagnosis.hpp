// SPDX-License-Identifier: Apache-2.0
#pragma once

// Deficiency diagnosis: compare a fine-tuned model's answers against reference
// answers through an oracle model, then ask the oracle for instructions that
// target each diagnosed gap.
//
// Oracle reply formats (pinned so they can be parsed strictly):
//   diagnosis:  "NONE"  or lines  "1. Deficiency: <category> | <description>"
//   synthesis:  lines  "1. Instruction: <instruction text>"

#include <algorithm>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "icurate/corpus.hpp"
#include "icurate/gateway.hpp"
#include "icurate/parallel.hpp"
#include "icurate/prompts.hpp"
#include "icurate/selection.hpp"
#include "icurate/util.hpp"

namespace icurate {

inline constexpr ModelRole kOracleRole = ModelRole::oracle;
inline constexpr ModelRole kCandidateRole = ModelRole::candidate;

struct Deficiency {
  std::string category;
  std::string description;

  bool operator==(const Deficiency&) const = default;
};

struct DiagnosisCase {
  std::string id;  // id of the source record
  std::string query;
  std::string reference;
  std::string model_response;
  std::vector<Deficiency> deficiencies;
  bool diagnosed = false;
  std::string stratum;                    // primary domain used for sampling
  std::vector<std::string> parent_chain;  // the source record's own ancestry
};

struct DiagnosisSet {
  std::vector<DiagnosisCase> cases;
  std::size_t skipped = 0;  // seed records without an assistant turn
  std::vector<std::string> warnings;
};

/// Lexicographically first domain tag, or "Other".
inline std::string primary_domain(const InstructionRecord& r) {
  return r.domain_tags.empty() ? std::string("Other") : *r.domain_tags.begin();
}

/// Integer allocation of `n` across strata proportional to `sizes`, using largest
/// remainders (ties to the smaller stratum name). Sums to n exactly.
inline std::map<std::string, std::size_t> proportional_allocation(const std::map<std::string, std::size_t>& sizes,
                                                                  std::size_t n) {
  std::size_t total = 0;
  for (const auto& [k, s] : sizes) total += s;
  std::map<std::string, std::size_t> alloc;
  if (total == 0) return alloc;
  std::vector<std::pair<std::size_t, std::string>> remainders;
  std::size_t given = 0;
  for (const auto& [k, s] : sizes) {
    alloc[k] = n * s / total;
    given += alloc[k];
    remainders.emplace_back(n * s % total, k);
  }
  std::sort(remainders.begin(), remainders.end(),
            [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
  for (std::size_t i = 0; given < n && i < remainders.size(); ++i) {
    auto& slot = alloc[remainders[i].second];
    if (slot < sizes.at(remainders[i].second)) {
      ++slot;
      ++given;
    }
  }
  return alloc;
}

/// Stratified sample of n seed records, proportional to primary-domain shares.
/// Query = first user turn, reference = first assistant turn. Cases come out in corpus order.
inline DiagnosisSet build_diagnosis_set(const SelectionReport& seeds, const Corpus& c, std::size_t n,
                                        std::uint64_t rng_seed) {
  DiagnosisSet out;
  std::map<std::string, std::vector<const InstructionRecord*>> strata;
  std::size_t pool = 0;
  for (const auto& r : c) {
    if (!seeds.selected_ids.count(r.id)) continue;
    if (r.turns.size() < 2) {
      ++out.skipped;
      out.warnings.push_back("seed '" + r.id + "' has no assistant turn; skipped for diagnosis");
      continue;
    }
    strata[primary_domain(r)].push_back(&r);
    ++pool;
  }
  if (n > pool) {
    throw ContractError("diagnosis set size " + std::to_string(n) + " exceeds the " + std::to_string(pool) +
                        " eligible seed records");
  }
  std::map<std::string, std::size_t> sizes;
  for (const auto& [k, v] : strata) sizes[k] = v.size();
  const auto alloc = proportional_allocation(sizes, n);
  std::unordered_map<std::string, std::string> chosen;  // id -> stratum
  for (auto& [k, members] : strata) {
    std::vector<const InstructionRecord*> order = members;
    Rng rng(rng_seed, "diagnosis:" + k);
    rng.shuffle(order);
    for (std::size_t i = 0; i < alloc.at(k); ++i) chosen.emplace(order[i]->id, k);
  }
  for (const auto& r : c) {
    auto it = chosen.find(r.id);
    if (it == chosen.end()) continue;
    DiagnosisCase dc;
    dc.id = r.id;
    dc.query = r.turns[0].text;
    dc.reference = r.turns[1].text;
    dc.stratum = it->second;
    dc.parent_chain = r.provenance.parent_chain;
    out.cases.push_back(std::move(dc));
  }
  return out;
}

/// Fills model_response from a JSONL sidecar of {"id","response"}. Returns the
/// number of cases that remain without a response.
inline std::size_t ingest_model_responses(std::vector<DiagnosisCase>& cases, const std::string& path) {
  std::unordered_map<std::string, std::string> responses;
  std::size_t lineno = 0;
  for (const auto& line : split_lines(read_file(path))) {
    ++lineno;
    if (trim_view(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      responses[j.at("id").get<std::string>()] = j.at("response").get<std::string>();
    } catch (const std::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  std::size_t missing = 0;
  for (auto& c : cases) {
    auto it = responses.find(c.id);
    if (it == responses.end() || trim_view(it->second).empty()) {
      ++missing;
      continue;
    }
    c.model_response = it->second;
  }
  return missing;
}

/// Asks the candidate (fine-tuned) model for each query.
inline void generate_model_responses(std::vector<DiagnosisCase>& cases, Gateway& gw, std::size_t workers = 1) {
  parallel_for(cases.size(), workers, [&](std::size_t i) {
    ChatRequest req;
    req.user = cases[i].query;
    req.model_role = kCandidateRole;
    cases[i].model_response = gw.chat_complete(req);
  });
}

/// nullopt when the reply is neither NONE nor at least one well-formed deficiency line.
inline std::optional<std::vector<Deficiency>> parse_deficiencies(std::string_view reply) {
  std::string_view t = trim_view(reply);
  while (!t.empty() && t.back() == '.') t.remove_suffix(1);
  if (to_upper(t) == "NONE") return std::vector<Deficiency>{};
  static const std::regex kLine(R"(^\s*\d+\s*[.)]\s*Deficiency:\s*(.*?)\s*\|\s*(.*?)\s*$)", std::regex::icase);
  std::vector<Deficiency> out;
  for (const auto& line : split_lines(reply)) {
    std::smatch m;
    if (!std::regex_match(line, m, kLine)) continue;
    auto cat = trim(m[1].str());
    auto desc = trim(m[2].str());
    if (cat.empty() || desc.empty()) continue;
    out.push_back({std::move(cat), std::move(desc)});
  }
  if (out.empty()) return std::nullopt;
  return out;
}

struct DiagnoseOutcome {
  std::vector<Deficiency> deficiencies;
  bool diagnosed = false;
};

/// One oracle comparison; an unparseable reply is retried once, then the case is
/// reported undiagnosed.
inline DiagnoseOutcome diagnose_case(const DiagnosisCase& c, Gateway& gw, const TemplateSet& templates) {
  if (trim_view(c.model_response).empty()) throw ContractError("case '" + c.id + "' has no model response");
  const auto& t = templates.get("diagnose");
  const Bindings b{{"query", c.query}, {"reference", c.reference}, {"response", c.model_response}};
  ChatRequest req;
  req.system = t.render_system(b);
  req.user = t.render_user(b);
  req.model_role = kOracleRole;
  for (int attempt = 0; attempt < 2; ++attempt) {
    if (attempt == 1) req.temperature = 0.7;
    if (auto parsed = parse_deficiencies(gw.chat_complete(req))) return {std::move(*parsed), true};
  }
  return {};
}

struct RemedialBatch {
  std::string source_case_id;
  std::vector<InstructionRecord> instructions;
};

inline std::vector<std::string> parse_remedial_instructions(std::string_view reply) {
  static const std::regex kLine(R"(^\s*\d+\s*[.)]\s*Instruction:\s*(.*?)\s*$)", std::regex::icase);
  std::vector<std::string> out;
  for (const auto& line : split_lines(reply)) {
    std::smatch m;
    if (std::regex_match(line, m, kLine)) {
      auto text = trim(m[1].str());
      if (!text.empty()) out.push_back(std::move(text));
    }
  }
  return out;
}

/// Up to m remedial instructions for a case with at least one deficiency.
inline RemedialBatch synthesize_remedial(const DiagnosisCase& c, std::size_t m, Gateway& gw,
                                         const TemplateSet& templates, int iteration = 1) {
  if (c.deficiencies.empty()) throw ContractError("case '" + c.id + "' has no deficiencies to remedy");
  if (m < 1) throw ContractError("remedial count must be >= 1");
  std::string listing;
  for (const auto& d : c.deficiencies) listing += "- " + d.category + ": " + d.description + "\n";
  const auto& t = templates.get("remedial");
  const Bindings b{{"deficiencies", listing}, {"query", c.query}, {"count", std::to_string(m)}};
  ChatRequest req;
  req.system = t.render_system(b);
  req.user = t.render_user(b);
  req.model_role = kOracleRole;
  req.temperature = 0.7;
  RemedialBatch batch;
  batch.source_case_id = c.id;
  auto texts = parse_remedial_instructions(gw.chat_complete(req));
  if (texts.size() > m) texts.resize(m);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    InstructionRecord r;
    r.id = c.id + "~r" + std::to_string(iteration) + "." + std::to_string(i + 1);
    r.turns.push_back({Role::user, texts[i]});
    r.provenance.kind = ProvenanceKind::remedial;
    r.provenance.parent_chain = c.parent_chain;
    r.provenance.parent_chain.push_back(c.id);
    batch.instructions.push_back(std::move(r));
  }
  return batch;
}

struct DiagnosisOutput {
  std::vector<DiagnosisCase> cases;
  std::vector<RemedialBatch> batches;
  Corpus remedial;
  std::size_t undiagnosed = 0;
  std::size_t without_response = 0;
  std::size_t with_deficiencies = 0;
};

/// Diagnose every case once, then synthesize for cases with deficiencies.
inline DiagnosisOutput run_diagnosis(std::vector<DiagnosisCase> cases, Gateway& gw, const TemplateSet& templates,
                                     std::size_t per_case, std::size_t workers = 1, int iteration = 1) {
  DiagnosisOutput out;
  std::vector<std::optional<RemedialBatch>> batches(cases.size());
  parallel_for(cases.size(), workers, [&](std::size_t i) {
    auto& c = cases[i];
    if (trim_view(c.model_response).empty()) return;
    auto outcome = diagnose_case(c, gw, templates);
    c.diagnosed = outcome.diagnosed;
    c.deficiencies = std::move(outcome.deficiencies);
    if (c.diagnosed && !c.deficiencies.empty()) batches[i] = synthesize_remedial(c, per_case, gw, templates, iteration);
  });
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (trim_view(cases[i].model_response).empty()) {
      ++out.without_response;
    } else if (!cases[i].diagnosed) {
      ++out.undiagnosed;
    } else if (!cases[i].deficiencies.empty()) {
      ++out.with_deficiencies;
    }
    if (batches[i]) {
      for (const auto& r : batches[i]->instructions) out.remedial.add(r);
      out.batches.push_back(std::move(*batches[i]));
    }
  }
  out.cases = std::move(cases);
  return out;
}

inline nlohmann::json to_json(const DiagnosisCase& c) {
  nlohmann::json defs = nlohmann::json::array();
  for (const auto& d : c.deficiencies) defs.push_back({{"category", d.category}, {"description", d.description}});
  return {{"id", c.id},
          {"query", c.query},
          {"reference", c.reference},
          {"model_response", c.model_response},
          {"stratum", c.stratum},
          {"diagnosed", c.diagnosed},
          {"deficiencies", defs}};
}

}  // namespace icurate
