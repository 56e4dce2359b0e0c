// SPDX-License-Identifier: Apache-2.0
#pragma once

// Seed evolution in three steps: rewrite along a randomly drawn dimension,
// judge the rewrite (reject by default), expand survivors into 1..N rounds of
// dialogue. Every random draw comes from an Rng keyed by (global seed,
// parent id, generation), so results do not depend on worker scheduling.

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "icurate/corpus.hpp"
#include "icurate/gateway.hpp"
#include "icurate/parallel.hpp"
#include "icurate/prompts.hpp"
#include "icurate/util.hpp"

namespace icurate {

enum class Dimension { diversity, more_reasoning_steps, concretizing, deepening };

inline constexpr Dimension kAllDimensions[] = {Dimension::diversity, Dimension::more_reasoning_steps,
                                               Dimension::concretizing, Dimension::deepening};

inline const char* to_string(Dimension d) {
  switch (d) {
    case Dimension::diversity: return "diversity";
    case Dimension::more_reasoning_steps: return "more_reasoning_steps";
    case Dimension::concretizing: return "concretizing";
    case Dimension::deepening: return "deepening";
  }
  return "diversity";
}

inline Dimension dimension_from_string(std::string_view s) {
  for (auto d : kAllDimensions) {
    if (s == to_string(d)) return d;
  }
  throw ConfigError("unknown evolution dimension '" + std::string(s) + "'");
}

enum class Verdict { pass, fail };

inline const char* to_string(Verdict v) { return v == Verdict::pass ? "pass" : "fail"; }

struct JudgeOutcome {
  Verdict verdict = Verdict::fail;
  std::string reason;
};

struct EvolutionRecord {
  InstructionRecord child;
  std::string parent_id;
  Dimension dimension = Dimension::diversity;
  Verdict verdict = Verdict::fail;
  std::string reason;     // why it failed, empty on pass
  int rounds = 0;         // completed dialogue rounds; 0 unless passed
  bool truncated = false; // fewer rounds completed than drawn
};

struct EvolutionParams {
  std::uint64_t seed = 0;
  int rounds_max = 4;
  int generations = 1;
  std::vector<Dimension> dimensions{std::begin(kAllDimensions), std::end(kAllDimensions)};
  std::size_t workers = 1;

  void validate() const {
    if (rounds_max < 1) throw ConfigError("rounds_max must be >= 1");
    if (generations < 1) throw ConfigError("generations must be >= 1");
    if (dimensions.empty()) throw ConfigError("at least one evolution dimension is required");
  }
};

inline constexpr ModelRole kSynthesisRole = ModelRole::synthesizer;
inline constexpr ModelRole kJudgeRole = ModelRole::judge;

inline Dimension draw_dimension(Rng& rng, const std::vector<Dimension>& dims) { return dims[rng.below(dims.size())]; }

inline int draw_rounds(Rng& rng, int rounds_max) { return 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(rounds_max))); }

/// Strips a leading "#Rewritten Prompt#:"-style label and wrapping quotes.
inline std::optional<std::string> parse_evolved_instruction(std::string_view response) {
  std::string_view t = trim_view(response);
  if (t.starts_with('#')) {
    const auto close = t.find('#', 1);
    if (close != std::string_view::npos && close < 40) {
      t.remove_prefix(close + 1);
      t = trim_view(t);
      if (t.starts_with(':')) t.remove_prefix(1);
      t = trim_view(t);
    }
  }
  if (t.size() >= 2 && t.front() == '"' && t.back() == '"') t = trim_view(t.substr(1, t.size() - 2));
  if (t.empty()) return std::nullopt;
  return std::string(t);
}

/// Accepts only an explicit PASS as the first word of the first line.
inline Verdict parse_judge_verdict(std::string_view response) {
  std::string_view t = trim_view(response);
  t = trim_view(t.substr(0, t.find('\n')));
  while (!t.empty() && (t.front() == '*' || t.front() == '"' || t.front() == '\'')) t.remove_prefix(1);
  std::size_t end = 0;
  while (end < t.size() && std::isalpha(static_cast<unsigned char>(t[end]))) ++end;
  const auto word = to_upper(t.substr(0, end));
  const auto rest = trim_view(t.substr(end));
  const bool only_punct = std::all_of(rest.begin(), rest.end(), [](char c) { return std::ispunct(static_cast<unsigned char>(c)); });
  return word == "PASS" && only_punct ? Verdict::pass : Verdict::fail;
}

inline std::string evolved_id(const std::string& parent_id, int generation) {
  return parent_id + "~e" + std::to_string(generation);
}

/// Step 1: rewrite the seed along a dimension drawn from `rng`.
/// The returned record has verdict fail (with reason) if synthesis produced nothing.
inline EvolutionRecord evolve_instruction(const InstructionRecord& seed, Rng& rng, Gateway& gw,
                                          const TemplateSet& templates, const EvolutionParams& params,
                                          int generation = 1) {
  if (std::none_of(seed.turns.begin(), seed.turns.end(), [](const Turn& t) { return t.role == Role::user; })) {
    throw ContractError("seed '" + seed.id + "' has no user turn");
  }
  EvolutionRecord rec;
  rec.parent_id = seed.id;
  rec.dimension = draw_dimension(rng, params.dimensions);
  rec.child.id = evolved_id(seed.id, generation);
  rec.child.source_dataset = seed.source_dataset;
  rec.child.provenance.kind = ProvenanceKind::evolved;
  rec.child.provenance.parent_chain = seed.provenance.parent_chain;
  rec.child.provenance.parent_chain.push_back(seed.id);

  const auto& t = templates.get(std::string("evolve_") + to_string(rec.dimension));
  const Bindings b{{"instruction", flatten_dialogue(seed)}};
  ChatRequest req;
  req.system = t.render_system(b);
  req.user = t.render_user(b);
  req.model_role = kSynthesisRole;
  req.temperature = 0.7;
  std::optional<std::string> query;
  try {
    query = parse_evolved_instruction(gw.chat_complete(req));
  } catch (const GatewayError& e) {
    rec.reason = std::string("synthesizer_unavailable: ") + e.what();
    return rec;
  }
  if (!query) {
    rec.reason = "empty_synthesis";
    return rec;
  }
  rec.child.turns.push_back({Role::user, *query});
  rec.verdict = Verdict::pass;
  return rec;
}

/// Step 2: judge the child; anything but an explicit PASS fails.
inline JudgeOutcome validate_instruction(const InstructionRecord& child, Gateway& gw, const TemplateSet& templates) {
  if (child.turns.empty()) throw ContractError("cannot judge an empty instruction");
  const auto& t = templates.get("judge");
  const Bindings b{{"instruction", user_text(child)}};
  ChatRequest req;
  req.system = t.render_system(b);
  req.user = t.render_user(b);
  req.model_role = kJudgeRole;
  req.max_tokens = 8;
  std::string reply;
  try {
    reply = gw.chat_complete(req);
  } catch (const GatewayError& e) {
    return {Verdict::fail, std::string("judge_unavailable: ") + e.what()};
  }
  if (parse_judge_verdict(reply) == Verdict::pass) return {Verdict::pass, ""};
  return {Verdict::fail, "judge_rejected: " + trim(std::string_view(reply).substr(0, 60))};
}

struct ExpansionResult {
  std::optional<InstructionRecord> record;
  int rounds_drawn = 0;
  int rounds_completed = 0;
  bool truncated = false;
  std::string reason;
};

/// Step 3: grow the child into 1..rounds_max rounds. Each round is an assistant
/// reply followed, if more rounds remain, by a follow-up user turn. A failure
/// keeps the completed rounds (flagged truncated); zero completed rounds fails.
inline ExpansionResult expand_multi_turn(const InstructionRecord& child, Rng& rng, Gateway& gw,
                                         const TemplateSet& templates, int rounds_max) {
  if (child.turns.empty() || child.turns.back().role != Role::user) {
    throw ContractError("expansion needs a child ending in a user turn");
  }
  ExpansionResult out;
  out.rounds_drawn = draw_rounds(rng, rounds_max);
  InstructionRecord rec = child;
  auto ask = [&](const char* name) -> std::optional<std::string> {
    const auto& t = templates.get(name);
    const Bindings b{{"dialogue", flatten_dialogue(rec)}};
    ChatRequest req;
    req.system = t.render_system(b);
    req.user = t.render_user(b);
    req.model_role = kSynthesisRole;
    req.temperature = 0.7;
    try {
      auto text = trim(gw.chat_complete(req));
      if (text.empty()) return std::nullopt;
      return text;
    } catch (const GatewayError& e) {
      out.reason = e.what();
      return std::nullopt;
    }
  };
  for (int round = 1; round <= out.rounds_drawn; ++round) {
    auto reply = ask("respond");
    if (!reply) break;
    rec.turns.push_back({Role::assistant, std::move(*reply)});
    out.rounds_completed = round;
    if (round == out.rounds_drawn) break;
    auto follow = ask("follow_up");
    if (!follow) break;
    rec.turns.push_back({Role::user, std::move(*follow)});
  }
  // drop a dangling user follow-up left by a failed reply
  if (rec.turns.back().role == Role::user && out.rounds_completed > 0) rec.turns.pop_back();
  out.truncated = out.rounds_completed < out.rounds_drawn;
  if (out.rounds_completed == 0) {
    if (out.reason.empty()) out.reason = "empty_response";
    return out;
  }
  out.record = std::move(rec);
  return out;
}

/// All three steps for one seed.
inline EvolutionRecord evolve_seed(const InstructionRecord& seed, Gateway& gw, const TemplateSet& templates,
                                   const EvolutionParams& params, int generation = 1) {
  Rng rng(params.seed, seed.id + "#gen" + std::to_string(generation));
  auto rec = evolve_instruction(seed, rng, gw, templates, params, generation);
  if (rec.verdict == Verdict::fail) return rec;
  const auto judged = validate_instruction(rec.child, gw, templates);
  if (judged.verdict == Verdict::fail) {
    rec.verdict = Verdict::fail;
    rec.reason = judged.reason;
    return rec;
  }
  auto expanded = expand_multi_turn(rec.child, rng, gw, templates, params.rounds_max);
  if (!expanded.record) {
    rec.verdict = Verdict::fail;
    rec.reason = "expansion_failed: " + expanded.reason;
    return rec;
  }
  rec.child = std::move(*expanded.record);
  rec.rounds = expanded.rounds_completed;
  rec.truncated = expanded.truncated;
  return rec;
}

struct EvolutionOutput {
  std::vector<EvolutionRecord> log;  // every attempt, all generations
  Corpus corpus;                     // passing children only
  std::size_t passed = 0;
  std::size_t failed = 0;
};

/// Generation g evolves the passing children of generation g-1 (generation 1 evolves the seeds).
inline EvolutionOutput run_evolution(const Corpus& seeds, Gateway& gw, const TemplateSet& templates,
                                     const EvolutionParams& params) {
  params.validate();
  EvolutionOutput out;
  std::vector<InstructionRecord> parents(seeds.begin(), seeds.end());
  for (int gen = 1; gen <= params.generations && !parents.empty(); ++gen) {
    std::vector<EvolutionRecord> batch(parents.size());
    parallel_for(parents.size(), params.workers,
                 [&](std::size_t i) { batch[i] = evolve_seed(parents[i], gw, templates, params, gen); });
    std::vector<InstructionRecord> next;
    for (auto& rec : batch) {
      if (rec.verdict == Verdict::pass) {
        ++out.passed;
        out.corpus.add(rec.child);
        next.push_back(rec.child);
      } else {
        ++out.failed;
      }
      out.log.push_back(std::move(rec));
    }
    parents = std::move(next);
  }
  return out;
}

inline nlohmann::json to_json(const EvolutionRecord& r) {
  return {{"parent_id", r.parent_id},
          {"child_id", r.child.id},
          {"dimension", to_string(r.dimension)},
          {"verdict", to_string(r.verdict)},
          {"reason", r.reason},
          {"rounds", r.rounds},
          {"truncated", r.truncated},
          {"child", r.child.turns.empty() ? nlohmann::json(nullptr) : to_json(r.child)}};
}

inline std::string serialize_evolution_log(const std::vector<EvolutionRecord>& log) {
  std::string out;
  for (const auto& r : log) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

}  // namespace icurate
