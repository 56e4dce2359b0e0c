// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>

#include "icurate/prompts.hpp"
#include "support.hpp"

using namespace icurate;

TEST(Prompts, RendersPlaceholdersAndEscapes) {
  PromptTemplate t("t", 2, "sys {a}", "x {{literal}} {a} and {b}");
  EXPECT_EQ(t.render_system({{"a", "1"}}), "sys 1");
  EXPECT_EQ(t.render_user({{"a", "1"}, {"b", "2"}}), "x {literal} 1 and 2");
  EXPECT_THROW(t.render_user({{"a", "1"}}), ConfigError);
}

TEST(Prompts, ParseSerializeRoundTrip) {
  PromptTemplate t("t", 3, "system line", "user\nlines {x}");
  const auto back = PromptTemplate::parse("t", t.serialize());
  EXPECT_EQ(back.version(), 3);
  EXPECT_EQ(back.system_text(), "system line");
  EXPECT_EQ(back.user_text(), "user\nlines {x}");
  EXPECT_EQ(back.hash(), t.hash());
  EXPECT_THROW(PromptTemplate::parse("t", "no header\n=====\nx"), ConfigError);
  EXPECT_THROW(PromptTemplate::parse("t", "version: 1\nno separator"), ConfigError);
}

TEST(Prompts, HashTracksContentAndVersion) {
  PromptTemplate a("t", 1, "s", "u");
  PromptTemplate b("t", 2, "s", "u");
  PromptTemplate c("t", 1, "s", "u2");
  EXPECT_NE(a.hash(), b.hash());
  EXPECT_NE(a.hash(), c.hash());
  EXPECT_EQ(a.hash().size(), 16u);
}

TEST(Prompts, ShippedTemplateFilesMatchBuiltins) {
  const std::string dir = std::string(ICURATE_SOURCE_DIR) + "/templates";
  const auto builtin = TemplateSet::builtin();
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() != ".txt") continue;
    ++files;
    const auto name = e.path().stem().string();
    EXPECT_EQ(read_file(e.path().string()), builtin.get(name).serialize()) << name;
  }
  EXPECT_EQ(files, builtin.all().size());
  EXPECT_EQ(TemplateSet::with_overrides(dir).fingerprints(), builtin.fingerprints());
}

TEST(Prompts, OverridesReplaceByNameAndRejectUnknownFiles) {
  const auto dir = testing_support::temp_dir("prompt_overrides");
  write_file(dir + "/judge.txt", "version: 9\nsys\n=====\nJudge {instruction}\n");
  const auto set = TemplateSet::with_overrides(dir);
  EXPECT_EQ(set.get("judge").version(), 9);
  EXPECT_EQ(set.get("judge").render_user({{"instruction", "x"}}), "Judge x");
  write_file(dir + "/nonsense.txt", "version: 1\na\n=====\nb\n");
  EXPECT_THROW(TemplateSet::with_overrides(dir), ConfigError);
  EXPECT_THROW(TemplateSet::builtin().get("missing"), ConfigError);
}

TEST(Prompts, EveryBuiltinRendersWithItsDocumentedBindings) {
  const Bindings all{{"dialogue", "d"}, {"tags", "t"},        {"tag", "t"},          {"standard", "s"},
                     {"instruction", "i"}, {"query", "q"},    {"reference", "r"},    {"response", "r"},
                     {"deficiencies", "d"}, {"count", "3"}};
  const auto set = TemplateSet::builtin();
  for (const auto& [name, t] : set.all()) {
    EXPECT_NO_THROW(t.render_system(all)) << name;
    EXPECT_NO_THROW(t.render_user(all)) << name;
  }
}
