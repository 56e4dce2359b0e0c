// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "icurate/pipeline.hpp"
#include "support.hpp"

using namespace icurate;

namespace {

const std::string kSource = ICURATE_SOURCE_DIR;

/// The sample configuration with its relative paths anchored at the source tree.
PipelineConfig sample_config() {
  PipelineConfig c;
  load_config_file(c, kSource + "/samples/config.ini");
  for (auto& in : c.inputs) in = kSource + "/" + in;
  c.losses = kSource + "/" + c.losses;
  for (auto& b : c.benchmarks) b = kSource + "/" + b;
  return c;
}

std::map<std::string, std::string> artifact_hashes(const std::string& dir) {
  std::map<std::string, std::string> out;
  for (const char* a : kArtifacts) {
    const auto p = dir + "/" + a;
    if (std::filesystem::exists(p)) out[a] = sha256_file(p);
  }
  return out;
}

int run_cli(const std::string& args) {
  const std::string cmd = "cd '" + kSource + "' && '" + ICURATE_CLI + "' " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, SampleFileLoads) {
  const auto c = sample_config();
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.workers, 2u);
  EXPECT_EQ(c.vocab.min_freq, 5);
  EXPECT_EQ(c.selection.hard_k, 20u);
  EXPECT_EQ(c.diagnosis_n, 10u);
  EXPECT_EQ(c.gateway.mock_dim, 64u);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, UnknownKeysAndBadValuesAreErrors) {
  PipelineConfig c;
  EXPECT_THROW(apply_setting(c, "select.nonsense", "1"), ConfigError);
  EXPECT_THROW(apply_setting(c, "gateway.wizard_url", "x"), ConfigError);
  EXPECT_THROW(apply_setting(c, "select.hard_k", "-3"), ConfigError);
  EXPECT_THROW(apply_setting(c, "dedup.tau", "0.5x"), ConfigError);
  EXPECT_THROW(apply_setting(c, "analyze.score_difficulty", "maybe"), ConfigError);
  EXPECT_THROW(apply_setting(c, "evolve.dimensions", "diversity,sideways"), ConfigError);
  apply_setting(c, "gateway.judge_url", "http://h/v1");
  apply_setting(c, "gateway.judge_model", "m");
  EXPECT_EQ(c.gateway.chat_endpoints.at(ModelRole::judge).url, "http://h/v1");
  apply_setting(c, "evolve.dimensions", "deepening, concretizing");
  EXPECT_EQ(c.dimensions, (std::vector<Dimension>{Dimension::deepening, Dimension::concretizing}));

  const auto dir = testing_support::temp_dir("config_files");
  write_file(dir + "/stray.ini", "seed = 1\n[pipeline]\nworkers = 2\n");
  EXPECT_THROW(load_config_file(c, dir + "/stray.ini"), ConfigError);
  write_file(dir + "/unknown.ini", "[pipeline]\nwrokers = 2\n");
  EXPECT_THROW(load_config_file(c, dir + "/unknown.ini"), ConfigError);
}

TEST(Pipeline, ValidationHappensBeforeAnyWork) {
  auto c = sample_config();
  c.gateway.mock = false;
  const auto dir = testing_support::temp_dir("pipeline_live");
  std::filesystem::remove_all(dir);
  Pipeline p(c, dir);
  EXPECT_THROW(p.run({"ingest", "tag"}), ConfigError);
  EXPECT_FALSE(std::filesystem::exists(dir));

  c = sample_config();
  c.tau = 0;
  EXPECT_THROW(Pipeline(c, dir).run({"ingest"}), ConfigError);
  EXPECT_THROW(Pipeline(sample_config(), dir).run({"ingest", "bogus"}), ConfigError);
  EXPECT_FALSE(std::filesystem::exists(dir));
}

TEST(Pipeline, MissingUpstreamArtifactIsADataError) {
  const auto dir = testing_support::temp_dir("pipeline_missing");
  try {
    Pipeline(sample_config(), dir).run({"select"});
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("stage 'select' failed: missing normalized.jsonl"), std::string::npos);
  }
}

TEST(Pipeline, StagesRunIndependentlyAndLeaveUpstreamUntouched) {
  const auto dir = testing_support::temp_dir("pipeline_gating");
  Pipeline(sample_config(), dir).run({"normalize", "ingest", "tag"});  // reordered internally
  const auto before = artifact_hashes(dir);
  EXPECT_TRUE(before.count("vocabulary.json"));
  EXPECT_FALSE(before.count("selection.json"));

  Pipeline(sample_config(), dir).run({"select"});
  const auto after = artifact_hashes(dir);
  for (const auto& [name, hash] : before) EXPECT_EQ(after.at(name), hash) << name;
  EXPECT_TRUE(after.count("selection.json"));

  const auto manifest = nlohmann::json::parse(read_file(dir + "/manifest.json"));
  EXPECT_TRUE(manifest["reports"].contains("tag"));
  EXPECT_TRUE(manifest["reports"].contains("select"));
  EXPECT_EQ(manifest["artifacts"]["selection.json"], after.at("selection.json"));
  EXPECT_EQ(manifest["templates"].size(), TemplateSet::builtin().all().size());
}

TEST(Pipeline, FullRunIsDeterministicAcrossWorkerCounts) {
  const auto a = testing_support::temp_dir("pipeline_det_a");
  const auto b = testing_support::temp_dir("pipeline_det_b");
  auto ca = sample_config();
  ca.workers = 1;
  auto cb = sample_config();
  cb.workers = 3;
  std::vector<std::string> all(std::begin(kStageOrder), std::end(kStageOrder));
  Pipeline(ca, a).run(all);
  Pipeline(cb, b).run(all);
  const auto ha = artifact_hashes(a);
  EXPECT_EQ(ha.size(), std::size(kArtifacts));
  EXPECT_EQ(ha, artifact_hashes(b));
  EXPECT_EQ(read_file(a + "/manifest.json"), read_file(b + "/manifest.json"));

  // final pool = seeds + evolved + remedial, minus leaked records
  const auto metrics = nlohmann::json::parse(read_file(a + "/metrics.json"));
  EXPECT_TRUE(metrics.contains("spatial_entropy"));
  const auto seeds = load_corpus(a + "/seeds.jsonl", true).corpus.size();
  const auto evolved = load_corpus(a + "/evolved.jsonl", true).corpus.size();
  const auto remedial = load_corpus(a + "/remedial.jsonl", true).corpus.size();
  const auto final_size = load_corpus(a + "/final.jsonl", true).corpus.size();
  const auto leaked = split_lines(read_file(a + "/leakage_report.jsonl"));
  std::size_t removed = 0;
  for (const auto& l : leaked) removed += !trim_view(l).empty();
  EXPECT_EQ(final_size + removed, seeds + evolved + remedial);
}

TEST(Cli, ExitCodes) {
  const auto out = testing_support::temp_dir("cli_codes");
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("no-such-command"), 1);
  EXPECT_EQ(run_cli("ingest -c samples/config.ini -o '" + out + "' --set select.bogus=1"), 1);
  EXPECT_EQ(run_cli("tag -c samples/config.ini -o '" + out + "' --live"), 1);
  EXPECT_EQ(run_cli("select -c samples/config.ini -o '" + out + "'"), 2);
  EXPECT_EQ(run_cli("ingest -c samples/config.ini -o '" + out + "' -q"), 0);
  EXPECT_TRUE(std::filesystem::exists(out + "/corpus.jsonl"));
  EXPECT_EQ(run_cli("ingest -o '" + out + "' --input samples/does_not_exist.jsonl"), 2);
}
