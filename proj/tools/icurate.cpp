// SPDX-License-Identifier: Apache-2.0
// icurate: command-line front end for the curation pipeline.
//
// Exit codes: 0 ok, 1 configuration, 2 data, 3 gateway.

#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "icurate/pipeline.hpp"

namespace {

using Overrides = std::vector<std::pair<std::string, std::string>>;

struct Common {
  std::string config;
  std::string out = "out";
  std::vector<std::string> sets;
  bool quiet = false;
};

void add_common(CLI::App* sub, Common& common, Overrides& flags) {
  sub->add_option("-c,--config", common.config, "INI configuration file")->check(CLI::ExistingFile);
  sub->add_option("-o,--out", common.out, "output directory for artifacts");
  sub->add_option("--set", common.sets, "override a config key, e.g. --set select.hard_k=1000");
  sub->add_flag("-q,--quiet", common.quiet, "suppress progress output");
  sub->add_option_function<std::string>(
      "--seed", [&flags](const std::string& v) { flags.emplace_back("pipeline.seed", v); }, "global random seed");
  sub->add_option_function<std::string>(
      "--workers", [&flags](const std::string& v) { flags.emplace_back("pipeline.workers", v); },
      "parallel workers per stage");
  sub->add_flag_callback("--mock", [&flags] { flags.emplace_back("gateway.mock", "true"); },
                         "use the offline mock gateway");
  sub->add_flag_callback("--live", [&flags] { flags.emplace_back("gateway.mock", "false"); },
                         "use the configured HTTP endpoints");
}

void bind_flag(CLI::App* sub, Overrides& flags, const std::string& flag, const std::string& key, const std::string& help) {
  sub->add_option_function<std::string>(flag, [&flags, key](const std::string& v) { flags.emplace_back(key, v); },
                                        help);
}

void bind_list(CLI::App* sub, Overrides& flags, const std::string& flag, const std::string& key,
               const std::string& help) {
  sub->add_option_function<std::vector<std::string>>(
      flag,
      [&flags, key](const std::vector<std::string>& v) {
        std::string joined;
        for (std::size_t i = 0; i < v.size(); ++i) joined += (i ? "," : "") + v[i];
        flags.emplace_back(key, joined);
      },
      help);
}

void add_stage_flags(CLI::App* sub, const std::string& stage, Overrides& f) {
  const bool all = stage == "run";
  if (all || stage == "ingest") {
    bind_list(sub, f, "--input", "pipeline.inputs", "corpus JSONL, optionally prefix=path (repeatable)");
    bind_flag(sub, f, "--losses", "pipeline.losses", "loss sidecar JSONL {id, base_loss, ft_loss}");
    sub->add_flag_callback("--strict", [&f] { f.emplace_back("pipeline.strict", "true"); },
                           "abort on the first malformed record");
  }
  if (all || stage == "normalize") {
    bind_flag(sub, f, "--lambda", "normalize.lambda", "alias-merge cosine threshold");
    bind_flag(sub, f, "--eps", "normalize.eps", "clustering radius in cosine distance");
    bind_flag(sub, f, "--min-samples", "normalize.min_samples", "clustering core size");
    bind_flag(sub, f, "--min-freq", "normalize.min_freq", "drop tags rarer than this");
    bind_flag(sub, f, "--domain-top-k", "normalize.domain_top_k", "tags summarized into domain categories");
  }
  if (all || stage == "select") {
    bind_flag(sub, f, "--k", "select.hard_k", "hard-to-follow count");
    bind_flag(sub, f, "--cap", "select.undertrained_cap", "undertrained cap");
    bind_flag(sub, f, "--sigma", "select.sigma", "undertrained threshold multiplier");
    bind_flag(sub, f, "--long-tail-below", "select.long_tail_below", "always keep tags rarer than this");
    bind_flag(sub, f, "--sample-lo", "select.sample_lo", "lower bound of the sampled frequency band");
    bind_flag(sub, f, "--sample-hi", "select.sample_hi", "upper bound of the sampled frequency band");
    bind_flag(sub, f, "--sample-fraction", "select.sample_fraction", "fraction drawn from the band");
    bind_flag(sub, f, "--min-tags", "select.multi_skill_min_tags", "multi-skill tag count");
  }
  if (all || stage == "evolve") {
    bind_flag(sub, f, "--generations", "evolve.generations", "evolution generations");
    bind_list(sub, f, "--dimensions", "evolve.dimensions",
              "subset of diversity, more_reasoning_steps, concretizing, deepening");
    bind_flag(sub, f, "--rounds-max", "evolve.rounds_max", "maximum dialogue rounds");
  }
  if (all || stage == "diagnose") {
    bind_flag(sub, f, "--n", "diagnose.n", "diagnosis set size");
    bind_flag(sub, f, "--per-case", "diagnose.per_case", "remedial instructions per deficient case");
    bind_flag(sub, f, "--iterations", "diagnose.iterations", "diagnose/synthesize passes");
    bind_flag(sub, f, "--responses", "diagnose.responses", "model responses JSONL {id, response}");
  }
  if (all || stage == "dedup") {
    bind_flag(sub, f, "--tau", "dedup.tau", "leakage similarity threshold");
    bind_list(sub, f, "--benchmarks", "dedup.benchmarks", "benchmark query JSONL, optionally name=path");
  }
  if (all || stage == "analyze") {
    bind_flag(sub, f, "--grid", "analyze.grid", "grid cells per side");
    bind_flag(sub, f, "--projection", "analyze.projection", "pca or tsne");
    sub->add_flag_callback("--no-difficulty", [&f] { f.emplace_back("analyze.score_difficulty", "false"); },
                           "skip live difficulty scoring");
    sub->add_flag_callback("--log-binning", [&f] { f.emplace_back("analyze.log_binning", "true"); },
                           "fit the power law on log-binned degrees");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Instruction corpus curation pipeline"};
  app.require_subcommand(1);
  Common common;
  Overrides flags;
  std::vector<std::string> stages;

  std::vector<std::pair<std::string, CLI::App*>> subs;
  for (const char* s : icurate::kStageOrder) subs.emplace_back(s, app.add_subcommand(s, std::string("run the ") + s + " stage"));
  subs.emplace_back("run", app.add_subcommand("run", "run several stages in order (all by default)"));
  for (auto& [name, sub] : subs) {
    add_common(sub, common, flags);
    add_stage_flags(sub, name, flags);
  }
  subs.back().second->add_option("--stages", stages, "comma-separated subset of stages")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  std::string chosen;
  for (auto& [name, sub] : subs) {
    if (sub->parsed()) chosen = name;
  }
  if (chosen != "run") {
    stages = {chosen};
  } else if (stages.empty()) {
    stages.assign(std::begin(icurate::kStageOrder), std::end(icurate::kStageOrder));
  }

  try {
    icurate::PipelineConfig config;
    if (!common.config.empty()) icurate::load_config_file(config, common.config);
    for (const auto& s : common.sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw icurate::ConfigError("--set expects key=value, got '" + s + "'");
      icurate::apply_setting(config, icurate::trim(s.substr(0, eq)), s.substr(eq + 1));
    }
    for (const auto& [key, value] : flags) icurate::apply_setting(config, key, value);
    icurate::Pipeline pipeline(std::move(config), common.out, common.quiet ? nullptr : &std::cerr);
    pipeline.run(stages);
  } catch (const icurate::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return icurate::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
