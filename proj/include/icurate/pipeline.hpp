// SPDX-License-Identifier: Apache-2.0
#pragma once

// Stage runner behind the command-line tool. Stages talk to each other only
// through files in the output directory, so any stage can be re-run alone.
//
//   ingest    inputs (+ loss sidecar)                -> corpus.jsonl
//   tag       corpus.jsonl                           -> tag_assignments.jsonl
//   normalize corpus.jsonl, tag_assignments.jsonl    -> vocabulary.json, domains.json, normalized.jsonl
//   select    normalized.jsonl, vocabulary.json      -> selection.json, seeds.jsonl
//   evolve    seeds.jsonl                            -> evolution_log.jsonl, evolved.jsonl
//   diagnose  normalized.jsonl, selection.json       -> diagnosis.jsonl, remedial.jsonl
//   dedup     seeds/evolved/remedial .jsonl          -> final.jsonl, leakage_report.jsonl
//   analyze   final.jsonl                            -> metrics.json, degree_spectrum.csv, projection.csv
//   plot      metrics.json, *.csv                    -> projection.svg, degree_spectrum.svg, difficulty.svg
//
// manifest.json holds the config hash, input and template fingerprints and the
// sha256 of every artifact present. It has no timestamps.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "icurate/analytics.hpp"
#include "icurate/corpus.hpp"
#include "icurate/diagnosis.hpp"
#include "icurate/evolution.hpp"
#include "icurate/gateway_factory.hpp"
#include "icurate/leakage.hpp"
#include "icurate/normalization.hpp"
#include "icurate/plot.hpp"
#include "icurate/prompts.hpp"
#include "icurate/selection.hpp"
#include "icurate/tagging.hpp"
#include "icurate/vocabulary.hpp"

namespace icurate {

inline constexpr const char* kStageOrder[] = {"ingest", "tag",   "normalize", "select", "evolve",
                                              "diagnose", "dedup", "analyze",   "plot"};

inline bool is_stage(std::string_view s) {
  return std::any_of(std::begin(kStageOrder), std::end(kStageOrder), [&](const char* n) { return s == n; });
}

struct PipelineConfig {
  // [pipeline]
  std::vector<std::string> inputs;  // "path" or "prefix=path"
  std::string losses;
  bool strict = false;
  std::string templates_dir;
  std::uint64_t seed = 0;
  std::size_t workers = 4;
  // [normalize]
  VocabParams vocab;
  std::size_t domain_top_k = 1000;
  // [select]
  SelectionParams selection;
  // [evolve]
  int generations = 1;
  int rounds_max = 4;
  std::vector<Dimension> dimensions{std::begin(kAllDimensions), std::end(kAllDimensions)};
  // [diagnose]
  std::size_t diagnosis_n = 100;
  std::size_t remedial_per_case = 3;
  int diagnosis_iterations = 1;
  std::string responses;  // JSONL {"id","response"}; empty -> ask the candidate role
  // [dedup]
  double tau = kDefaultLeakageTau;
  std::vector<std::string> benchmarks;  // "path" or "name=path"
  // [analyze]
  std::size_t grid = 200;
  Projection projection = Projection::pca;
  bool score_difficulty = true;
  bool log_binning = false;
  // [gateway]
  GatewayConfig gateway;

  void validate() const {
    vocab.validate();
    selection.validate();
    gateway.validate();
    if (workers < 1) throw ConfigError("pipeline.workers must be >= 1");
    if (generations < 1) throw ConfigError("evolve.generations must be >= 1");
    if (rounds_max < 1) throw ConfigError("evolve.rounds_max must be >= 1");
    if (dimensions.empty()) throw ConfigError("evolve.dimensions must not be empty");
    if (remedial_per_case < 1) throw ConfigError("diagnose.per_case must be >= 1");
    if (diagnosis_iterations < 1) throw ConfigError("diagnose.iterations must be >= 1");
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("dedup.tau must lie in (0, 1]");
    if (grid < 1) throw ConfigError("analyze.grid must be >= 1");
  }
};

namespace detail {

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!trim(cur).empty()) out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) out.push_back(trim(cur));
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    T out{};
    if constexpr (std::is_floating_point_v<T>) {
      out = static_cast<T>(std::stod(value, &pos));
    } else if constexpr (std::is_unsigned_v<T>) {
      if (trim(value).starts_with('-')) throw std::invalid_argument("negative");
      out = static_cast<T>(std::stoull(value, &pos));
    } else {
      out = static_cast<T>(std::stoll(value, &pos));
    }
    if (!trim(value.substr(pos)).empty()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("invalid value for " + key + ": '" + value + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  const auto v = to_lower(trim(value));
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("invalid boolean for " + key + ": '" + value + "'");
}

/// Splits "name=path" (name optional). A bare path gets an empty name.
inline std::pair<std::string, std::string> split_named(const std::string& spec) {
  auto eq = spec.find('=');
  if (eq == std::string::npos) return {"", spec};
  return {trim(spec.substr(0, eq)), trim(spec.substr(eq + 1))};
}

}  // namespace detail

/// Sets one "section.key" value. Unknown keys are configuration errors.
inline void apply_setting(PipelineConfig& c, const std::string& key, const std::string& raw) {
  using namespace detail;
  const std::string value = trim(raw);
  auto& g = c.gateway;
  if (key == "pipeline.inputs") c.inputs = split_list(value);
  else if (key == "pipeline.losses") c.losses = value;
  else if (key == "pipeline.strict") c.strict = parse_bool(key, value);
  else if (key == "pipeline.templates") c.templates_dir = value;
  else if (key == "pipeline.seed") c.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "pipeline.workers") c.workers = parse_number<std::size_t>(key, value);
  else if (key == "normalize.lambda") c.vocab.lambda = parse_number<double>(key, value);
  else if (key == "normalize.eps") c.vocab.eps = parse_number<double>(key, value);
  else if (key == "normalize.min_samples") c.vocab.min_samples = parse_number<int>(key, value);
  else if (key == "normalize.min_freq") c.vocab.min_freq = parse_number<long>(key, value);
  else if (key == "normalize.domain_top_k") c.domain_top_k = parse_number<std::size_t>(key, value);
  else if (key == "select.hard_k") c.selection.hard_k = parse_number<std::size_t>(key, value);
  else if (key == "select.long_tail_below") c.selection.long_tail_below = parse_number<long>(key, value);
  else if (key == "select.sample_lo") c.selection.sample_lo = parse_number<long>(key, value);
  else if (key == "select.sample_hi") c.selection.sample_hi = parse_number<long>(key, value);
  else if (key == "select.sample_fraction") c.selection.sample_fraction = parse_number<double>(key, value);
  else if (key == "select.multi_skill_min_tags") c.selection.multi_skill_min_tags = parse_number<std::size_t>(key, value);
  else if (key == "select.sigma") c.selection.sigma_multiplier = parse_number<double>(key, value);
  else if (key == "select.undertrained_cap") c.selection.undertrained_cap = parse_number<std::size_t>(key, value);
  else if (key == "evolve.generations") c.generations = parse_number<int>(key, value);
  else if (key == "evolve.rounds_max") c.rounds_max = parse_number<int>(key, value);
  else if (key == "evolve.dimensions") {
    c.dimensions.clear();
    for (const auto& d : split_list(value)) c.dimensions.push_back(dimension_from_string(d));
  }
  else if (key == "diagnose.n") c.diagnosis_n = parse_number<std::size_t>(key, value);
  else if (key == "diagnose.per_case") c.remedial_per_case = parse_number<std::size_t>(key, value);
  else if (key == "diagnose.iterations") c.diagnosis_iterations = parse_number<int>(key, value);
  else if (key == "diagnose.responses") c.responses = value;
  else if (key == "dedup.tau") c.tau = parse_number<double>(key, value);
  else if (key == "dedup.benchmarks") c.benchmarks = split_list(value);
  else if (key == "analyze.grid") c.grid = parse_number<std::size_t>(key, value);
  else if (key == "analyze.projection") c.projection = projection_from_string(value);
  else if (key == "analyze.score_difficulty") c.score_difficulty = parse_bool(key, value);
  else if (key == "analyze.log_binning") c.log_binning = parse_bool(key, value);
  else if (key == "gateway.mock") g.mock = parse_bool(key, value);
  else if (key == "gateway.mock_seed") g.mock_seed = parse_number<std::uint64_t>(key, value);
  else if (key == "gateway.mock_dim") g.mock_dim = parse_number<std::size_t>(key, value);
  else if (key == "gateway.mock_rules") g.mock_rules_path = value;
  else if (key == "gateway.api_key_env") g.api_key_env = value;
  else if (key == "gateway.max_in_flight") g.max_in_flight = parse_number<std::size_t>(key, value);
  else if (key == "gateway.max_attempts") g.max_attempts = parse_number<int>(key, value);
  else if (key == "gateway.backoff_base_ms") g.backoff_base_ms = parse_number<int>(key, value);
  else if (key == "gateway.timeout_ms") g.timeout_ms = parse_number<int>(key, value);
  else if (key == "gateway.embed_batch_size") g.embed_batch_size = parse_number<std::size_t>(key, value);
  else if (key == "gateway.embedding_url") g.embedding_endpoint.url = value;
  else if (key == "gateway.embedding_model") g.embedding_endpoint.model = value;
  else {
    // gateway.<role>_url / gateway.<role>_model
    if (key.starts_with("gateway.")) {
      const auto rest = key.substr(8);
      for (const char* suffix : {"_url", "_model"}) {
        if (!rest.ends_with(suffix)) continue;
        if (auto role = role_from_string(rest.substr(0, rest.size() - std::strlen(suffix)))) {
          auto& ep = g.chat_endpoints[*role];
          (std::string(suffix) == "_url" ? ep.url : ep.model) = value;
          return;
        }
      }
    }
    throw ConfigError("unknown configuration key '" + key + "'");
  }
}

/// Reads an INI file; every "section.key" goes through apply_setting.
inline void load_config_file(PipelineConfig& c, const std::string& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config key '" + section + "' is outside any section");
    for (const auto& [key, value] : body) apply_setting(c, section + "." + key, value.data());
  }
}

/// Canonical JSON of everything that influences outputs (not out dir, not workers).
inline nlohmann::json config_to_json(const PipelineConfig& c) {
  std::vector<std::string> dims;
  for (auto d : c.dimensions) dims.push_back(to_string(d));
  nlohmann::json chat = nlohmann::json::object();
  for (const auto& [role, ep] : c.gateway.chat_endpoints) chat[to_string(role)] = {{"url", ep.url}, {"model", ep.model}};
  return {{"pipeline",
           {{"inputs", c.inputs}, {"losses", c.losses}, {"strict", c.strict}, {"templates", c.templates_dir},
            {"seed", c.seed}}},
          {"normalize",
           {{"lambda", c.vocab.lambda}, {"eps", c.vocab.eps}, {"min_samples", c.vocab.min_samples},
            {"min_freq", c.vocab.min_freq}, {"domain_top_k", c.domain_top_k}}},
          {"select",
           {{"hard_k", c.selection.hard_k}, {"long_tail_below", c.selection.long_tail_below},
            {"sample_lo", c.selection.sample_lo}, {"sample_hi", c.selection.sample_hi},
            {"sample_fraction", c.selection.sample_fraction},
            {"multi_skill_min_tags", c.selection.multi_skill_min_tags}, {"sigma", c.selection.sigma_multiplier},
            {"undertrained_cap", c.selection.undertrained_cap}}},
          {"evolve", {{"generations", c.generations}, {"rounds_max", c.rounds_max}, {"dimensions", dims}}},
          {"diagnose",
           {{"n", c.diagnosis_n}, {"per_case", c.remedial_per_case}, {"iterations", c.diagnosis_iterations},
            {"responses", c.responses}}},
          {"dedup", {{"tau", c.tau}, {"benchmarks", c.benchmarks}}},
          {"analyze",
           {{"grid", c.grid}, {"projection", to_string(c.projection)}, {"score_difficulty", c.score_difficulty},
            {"log_binning", c.log_binning}}},
          {"gateway",
           {{"mock", c.gateway.mock}, {"mock_seed", c.gateway.mock_seed}, {"mock_dim", c.gateway.mock_dim},
            {"mock_rules", c.gateway.mock_rules_path}, {"chat", chat},
            {"embedding", {{"url", c.gateway.embedding_endpoint.url}, {"model", c.gateway.embedding_endpoint.model}}}}}};
}

inline constexpr const char* kArtifacts[] = {
    "corpus.jsonl",        "tag_assignments.jsonl", "vocabulary.json",     "domains.json",
    "normalized.jsonl",    "selection.json",        "seeds.jsonl",         "evolution_log.jsonl",
    "evolved.jsonl",       "diagnosis.jsonl",       "remedial.jsonl",      "final.jsonl",
    "leakage_report.jsonl", "metrics.json",         "degree_spectrum.csv", "projection.csv",
    "projection.svg",      "degree_spectrum.svg",   "difficulty.svg"};

class Pipeline {
 public:
  Pipeline(PipelineConfig config, std::string out_dir, std::ostream* log = nullptr)
      : config_(std::move(config)), out_(std::move(out_dir)), log_(log) {}

  const PipelineConfig& config() const { return config_; }
  const std::string& out_dir() const { return out_; }

  /// Roles and embedding access the given stages will need.
  std::pair<std::vector<ModelRole>, bool> requirements(const std::vector<std::string>& stages) const {
    std::set<ModelRole> roles;
    bool embeddings = false;
    for (const auto& s : stages) {
      if (s == "tag") roles.insert(kTaggingRole);
      if (s == "normalize") {
        roles.insert({kInductionRole, kMappingRole});
        embeddings = true;
      }
      if (s == "evolve") roles.insert({kSynthesisRole, kJudgeRole});
      if (s == "diagnose") {
        roles.insert(kOracleRole);
        if (config_.responses.empty()) roles.insert(kCandidateRole);
      }
      if (s == "dedup" && !config_.benchmarks.empty()) embeddings = true;
      if (s == "analyze") {
        embeddings = true;
        if (config_.score_difficulty) roles.insert(kScorerRole);
      }
    }
    return {{roles.begin(), roles.end()}, embeddings};
  }

  /// Validates everything up front, then runs the stages in pipeline order.
  void run(std::vector<std::string> stages) {
    for (const auto& s : stages) {
      if (!is_stage(s)) throw ConfigError("unknown stage '" + s + "'");
    }
    std::vector<std::string> ordered;
    for (const char* s : kStageOrder) {
      if (std::find(stages.begin(), stages.end(), s) != stages.end()) ordered.emplace_back(s);
    }
    config_.validate();
    const auto [roles, embeddings] = requirements(ordered);
    config_.gateway.require_roles(roles, embeddings);
    templates_ = TemplateSet::with_overrides(config_.templates_dir);
    std::filesystem::create_directories(out_);
    load_manifest();
    for (const auto& s : ordered) {
      say("stage " + s);
      try {
        run_stage(s);
      } catch (const Error& e) {
        write_manifest();
        rethrow_with_stage(e, s);
      }
      write_manifest();
    }
  }

  std::string path(const std::string& artifact) const { return (std::filesystem::path(out_) / artifact).string(); }

 private:
  PipelineConfig config_;
  std::string out_;
  std::ostream* log_;
  TemplateSet templates_;
  nlohmann::json reports_ = nlohmann::json::object();
  std::shared_ptr<Gateway> gateway_;

  void say(const std::string& msg) const {
    if (log_) *log_ << msg << '\n';
  }

  [[noreturn]] static void rethrow_with_stage(const Error& e, const std::string& stage) {
    const std::string msg = "stage '" + stage + "' failed: " + e.what();
    switch (e.kind()) {
      case ErrorKind::config: throw ConfigError(msg);
      case ErrorKind::gateway: throw GatewayError(msg);
      case ErrorKind::contract: throw ContractError(msg);
      case ErrorKind::data: throw DataError(msg);
    }
    throw DataError(msg);
  }

  Gateway& gateway() {
    if (!gateway_) gateway_ = make_gateway(config_.gateway);
    return *gateway_;
  }

  std::string require(const std::string& artifact) const {
    const auto p = path(artifact);
    if (!std::filesystem::exists(p)) {
      throw DataError("missing " + artifact + " in " + out_ + "; run the stage that produces it first");
    }
    return p;
  }

  Corpus load_artifact_corpus(const std::string& artifact) const {
    return load_corpus(require(artifact), true).corpus;
  }

  void report(const std::string& stage, nlohmann::json j) { reports_[stage] = std::move(j); }

  void run_stage(const std::string& s) {
    if (s == "ingest") stage_ingest();
    else if (s == "tag") stage_tag();
    else if (s == "normalize") stage_normalize();
    else if (s == "select") stage_select();
    else if (s == "evolve") stage_evolve();
    else if (s == "diagnose") stage_diagnose();
    else if (s == "dedup") stage_dedup();
    else if (s == "analyze") stage_analyze();
    else if (s == "plot") stage_plot();
  }

  void stage_ingest() {
    if (config_.inputs.empty()) throw ConfigError("no input corpus configured (pipeline.inputs)");
    std::vector<std::pair<std::string, Corpus>> sources;
    std::size_t skipped = 0;
    std::vector<std::string> warnings;
    for (const auto& spec : config_.inputs) {
      auto [prefix, p] = detail::split_named(spec);
      auto loaded = load_corpus(p, config_.strict);
      skipped += loaded.skipped;
      for (auto& w : loaded.warnings) warnings.push_back(std::move(w));
      sources.emplace_back(prefix, std::move(loaded.corpus));
    }
    Corpus merged = merge_sources(sources);
    nlohmann::json rep = {{"records", merged.size()}, {"skipped", skipped}};
    if (!config_.losses.empty()) {
      const auto attached = attach_loss_metadata(merged, config_.losses);
      rep["losses_attached"] = attached.attached;
      rep["losses_unknown_ids"] = attached.unknown_ids;
      for (const auto& w : attached.warnings) warnings.push_back(w);
    }
    for (const auto& w : warnings) say("  warning: " + w);
    rep["warnings"] = warnings.size();
    save_corpus(merged, path("corpus.jsonl"));
    say("  " + std::to_string(merged.size()) + " records");
    report("ingest", rep);
  }

  void stage_tag() {
    const Corpus c = load_artifact_corpus("corpus.jsonl");
    const auto result = generate_fine_tags(c, gateway(), templates_, config_.workers);
    write_file(path("tag_assignments.jsonl"), serialize_assignments(result.assignments));
    say("  " + std::to_string(result.untagged) + " untagged");
    report("tag", {{"records", c.size()}, {"untagged", result.untagged}, {"untagged_ids", result.untagged_ids},
                   {"prompt_hash", result.prompt_hash}});
  }

  void stage_normalize() {
    Corpus c = load_artifact_corpus("corpus.jsonl");
    const auto assignments = load_assignments(require("tag_assignments.jsonl"));
    auto norm = normalize_vocabulary(assignments, gateway(), config_.vocab, config_.workers);
    auto& vocab = norm.vocabulary;
    rewrite_tags(c, assignments, vocab);
    nlohmann::json rep = {{"raw_tags", vocab.remap.size()},
                          {"threshold_groups", norm.threshold_groups.size()},
                          {"final_groups", norm.final_groups.size()},
                          {"kept", vocab.size()},
                          {"dropped", norm.dropped.size()}};
    DomainCategorySet cats;
    if (vocab.size() > 0) {
      auto induced = induce_domain_categories(vocab, config_.domain_top_k, gateway(), templates_);
      cats = std::move(induced.categories);
      map_vocabulary_domains(vocab, cats, gateway(), templates_, config_.workers);
      apply_domains(c, vocab);
    } else {
      say("  warning: vocabulary is empty after filtering; no domain categories induced");
    }
    rep["domain_categories"] = cats.size();
    write_file(path("vocabulary.json"), to_json(vocab).dump(2) + "\n");
    write_file(path("domains.json"), to_json(cats).dump(2) + "\n");
    save_corpus(c, path("normalized.jsonl"));
    say("  vocabulary " + std::to_string(vocab.size()) + " entries, " + std::to_string(cats.size()) + " domains");
    report("normalize", rep);
  }

  void stage_select() {
    const Corpus c = load_artifact_corpus("normalized.jsonl");
    const auto vocab = vocabulary_from_json(nlohmann::json::parse(read_file(require("vocabulary.json"))));
    auto params = config_.selection;
    params.rng_seed = config_.seed;
    const auto sel = run_selection(c, vocab, params);
    write_file(path("selection.json"), to_json(sel).dump(2) + "\n");
    save_corpus(seed_corpus(c, sel), path("seeds.jsonl"));
    nlohmann::json counts = nlohmann::json::object();
    for (const auto& [name, ids] : sel.per_criterion) counts[name] = ids.size();
    say("  " + std::to_string(sel.selected_ids.size()) + " seeds");
    report("select", {{"selected", sel.selected_ids.size()}, {"per_criterion", counts}, {"skipped", sel.skipped}});
  }

  void stage_evolve() {
    const Corpus seeds = load_artifact_corpus("seeds.jsonl");
    EvolutionParams p;
    p.seed = config_.seed;
    p.rounds_max = config_.rounds_max;
    p.generations = config_.generations;
    p.dimensions = config_.dimensions;
    p.workers = config_.workers;
    const auto out = run_evolution(seeds, gateway(), templates_, p);
    write_file(path("evolution_log.jsonl"), serialize_evolution_log(out.log));
    save_corpus(out.corpus, path("evolved.jsonl"));
    say("  " + std::to_string(out.passed) + " passed, " + std::to_string(out.failed) + " failed");
    report("evolve", {{"seeds", seeds.size()}, {"passed", out.passed}, {"failed", out.failed}});
  }

  void stage_diagnose() {
    const Corpus c = load_artifact_corpus("normalized.jsonl");
    const auto sel = selection_from_json(nlohmann::json::parse(read_file(require("selection.json"))));
    std::size_t eligible = 0;
    for (const auto& r : c) {
      if (sel.selected_ids.count(r.id) && r.turns.size() >= 2) ++eligible;
    }
    std::size_t n = config_.diagnosis_n;
    if (n > eligible) {
      say("  warning: diagnosis size " + std::to_string(n) + " clamped to " + std::to_string(eligible) +
          " eligible seeds");
      n = eligible;
    }
    std::string diag_out;
    Corpus remedial;
    nlohmann::json iterations = nlohmann::json::array();
    for (int it = 1; it <= config_.diagnosis_iterations; ++it) {
      const auto rng_seed = it == 1 ? config_.seed : mix_seed(config_.seed, "diagnosis#" + std::to_string(it));
      auto set = build_diagnosis_set(sel, c, n, rng_seed);
      std::size_t missing = 0;
      if (!config_.responses.empty()) {
        missing = ingest_model_responses(set.cases, config_.responses);
      } else {
        generate_model_responses(set.cases, gateway(), config_.workers);
      }
      auto out = run_diagnosis(std::move(set.cases), gateway(), templates_, config_.remedial_per_case,
                               config_.workers, it);
      for (const auto& dc : out.cases) {
        auto j = to_json(dc);
        j["iteration"] = it;
        diag_out += j.dump() + "\n";
      }
      for (const auto& r : out.remedial) remedial.add(r);
      iterations.push_back({{"iteration", it},
                            {"cases", out.cases.size()},
                            {"missing_responses", missing},
                            {"undiagnosed", out.undiagnosed},
                            {"with_deficiencies", out.with_deficiencies},
                            {"remedial", out.remedial.size()}});
    }
    write_file(path("diagnosis.jsonl"), diag_out);
    save_corpus(remedial, path("remedial.jsonl"));
    say("  " + std::to_string(remedial.size()) + " remedial instructions");
    report("diagnose", {{"iterations", iterations}});
  }

  void stage_dedup() {
    std::vector<std::pair<std::string, Corpus>> parts;
    parts.emplace_back("", load_artifact_corpus("seeds.jsonl"));
    for (const char* optional_part : {"evolved.jsonl", "remedial.jsonl"}) {
      if (std::filesystem::exists(path(optional_part))) parts.emplace_back("", load_corpus(path(optional_part), true).corpus);
    }
    const Corpus pool = merge_sources(parts);
    std::vector<BenchmarkQuerySet> benches;
    if (!config_.benchmarks.empty()) {
      for (const auto& spec : config_.benchmarks) {
        auto [name, p] = detail::split_named(spec);
        if (name.empty()) name = std::filesystem::path(p).stem().string();
        benches.push_back(embed_benchmark(name, load_benchmark_queries(p), gateway()));
      }
    }
    const auto result = benches.empty()
                            ? filter_leaked(pool, std::vector<EmbeddingVector>(pool.size()), benches, config_.tau)
                            : filter_leaked(pool, benches, config_.tau, gateway(), config_.workers);
    save_corpus(result.corpus, path("final.jsonl"));
    write_file(path("leakage_report.jsonl"), serialize_leakage_report(result.report));
    say("  " + std::to_string(result.report.removed.size()) + " removed, " + std::to_string(result.corpus.size()) +
        " kept");
    report("dedup", {{"input", pool.size()}, {"removed", result.report.removed.size()},
                     {"kept", result.corpus.size()}, {"tau", config_.tau}, {"benchmarks", benches.size()}});
  }

  void stage_analyze() {
    const Corpus c = load_artifact_corpus("final.jsonl");
    if (c.size() < 2) throw DataError("analysis needs at least two records in final.jsonl");
    std::vector<std::string> texts;
    for (const auto& r : c) texts.push_back(user_text(r));
    const auto embs = gateway().embed_batch(texts);
    const auto proj = project_2d(embs, config_.projection, config_.seed);
    for (const auto& w : proj.warnings) say("  warning: " + w);
    const auto hist = grid_histogram(proj.points, config_.grid);
    const auto depth = depth_summary(c);

    std::vector<std::optional<int>> scores;
    for (const auto& r : c) scores.push_back(r.difficulty);
    if (config_.score_difficulty) {
      const auto live = score_difficulty(c, gateway(), templates_, config_.workers);
      for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!scores[i]) scores[i] = live[i];
      }
    }
    const auto diff = difficulty_histogram(scores);

    const auto graph = build_cooccurrence_graph(c);
    const auto spectrum = graph.degree_spectrum();
    nlohmann::json power = nullptr;
    try {
      const auto fit = fit_power_law(spectrum, config_.log_binning);
      power = {{"gamma", fit.gamma}, {"intercept", fit.intercept}, {"r_squared", fit.r_squared},
               {"points_used", fit.points_used}, {"log_binning", config_.log_binning}};
    } catch (const DataError& e) {
      say(std::string("  warning: ") + e.what());
    }

    nlohmann::json metrics = {
        {"records", c.size()},
        {"projection", to_string(proj.method_used)},
        {"grid", config_.grid},
        {"non_empty_cells", hist.non_empty()},
        {"spatial_entropy", spatial_entropy(hist)},
        {"coverage", coverage_metric(hist)},
        {"depth", {{"sum", depth.sum}, {"mean", depth.mean}, {"count", depth.count}, {"excluded", depth.excluded}}},
        {"difficulty",
         {{"counts", diff.counts}, {"mean", diff.mean}, {"scored", diff.scored}, {"unscored", diff.unscored}}},
        {"cooccurrence", {{"nodes", graph.nodes.size()}, {"edges", graph.edge_count()}}},
        {"power_law", power}};
    write_file(path("metrics.json"), metrics.dump(2) + "\n");
    write_file(path("degree_spectrum.csv"), degree_spectrum_csv(spectrum));
    std::ostringstream csv;
    csv << "id,x,y\n" << std::setprecision(12);
    for (std::size_t i = 0; i < c.size(); ++i) csv << c[i].id << ',' << proj.points[i].x << ',' << proj.points[i].y << '\n';
    write_file(path("projection.csv"), csv.str());
    say("  entropy " + std::to_string(spatial_entropy(hist)) + ", coverage " + std::to_string(coverage_metric(hist)));
    report("analyze", {{"records", c.size()}});
  }

  void stage_plot() {
    const auto metrics = nlohmann::json::parse(read_file(require("metrics.json")));
    std::vector<Point2> pts;
    {
      std::istringstream in(read_file(require("projection.csv")));
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) {
        const auto b = line.rfind(',');
        const auto a = line.rfind(',', b - 1);
        if (a == std::string::npos || b == std::string::npos) throw DataError("malformed projection.csv line: " + line);
        pts.push_back({std::stod(line.substr(a + 1, b - a - 1)), std::stod(line.substr(b + 1))});
      }
    }
    std::map<long, long> spectrum;
    {
      std::istringstream in(read_file(require("degree_spectrum.csv")));
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) {
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw DataError("malformed degree_spectrum.csv line: " + line);
        spectrum[std::stol(line.substr(0, comma))] = std::stol(line.substr(comma + 1));
      }
    }
    std::optional<PowerLawFit> fit;
    if (!metrics.at("power_law").is_null()) {
      const auto& p = metrics.at("power_law");
      fit = PowerLawFit{p.at("gamma").get<double>(), p.at("intercept").get<double>(), p.at("r_squared").get<double>(),
                        p.at("points_used").get<std::size_t>()};
    }
    DifficultyHistogram diff;
    diff.counts = metrics.at("difficulty").at("counts").get<std::array<long, 5>>();
    diff.mean = metrics.at("difficulty").at("mean").get<double>();
    write_file(path("projection.svg"), plot_projection(pts, "Instruction embeddings (2D projection)"));
    write_file(path("degree_spectrum.svg"), plot_degree_spectrum(spectrum, fit));
    write_file(path("difficulty.svg"), plot_difficulty(diff));
    report("plot", {{"images", 3}});
  }

  void load_manifest() {
    const auto p = path("manifest.json");
    if (!std::filesystem::exists(p)) return;
    try {
      const auto j = nlohmann::json::parse(read_file(p));
      if (j.contains("reports")) reports_ = j.at("reports");
    } catch (const nlohmann::json::exception&) {
      say("  warning: existing manifest.json unreadable; starting a new one");
    }
  }

  void write_manifest() const {
    nlohmann::json inputs = nlohmann::json::object();
    for (const auto& spec : config_.inputs) {
      const auto p = detail::split_named(spec).second;
      if (std::filesystem::exists(p)) inputs[spec] = sha256_file(p);
    }
    for (const auto& extra : {config_.losses, config_.responses}) {
      if (!extra.empty() && std::filesystem::exists(extra)) inputs[extra] = sha256_file(extra);
    }
    for (const auto& spec : config_.benchmarks) {
      const auto p = detail::split_named(spec).second;
      if (std::filesystem::exists(p)) inputs[spec] = sha256_file(p);
    }
    nlohmann::json artifacts = nlohmann::json::object();
    for (const char* a : kArtifacts) {
      if (std::filesystem::exists(path(a))) artifacts[a] = sha256_file(path(a));
    }
    const auto cfg = config_to_json(config_);
    const nlohmann::json manifest = {{"config", cfg},
                                     {"config_hash", sha256_hex(cfg.dump())},
                                     {"inputs", inputs},
                                     {"templates", templates_.fingerprints()},
                                     {"artifacts", artifacts},
                                     {"reports", reports_}};
    write_file(path("manifest.json"), manifest.dump(2) + "\n");
  }
};

}  // namespace icurate
