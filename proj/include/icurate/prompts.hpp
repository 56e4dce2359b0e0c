// SPDX-License-Identifier: Apache-2.0
#pragma once

// Versioned prompt templates with {named} placeholders.
//
// On-disk format (one file per template, <name>.txt):
//   version: <int>
//   <system text...>
//   =====
//   <user text...>
//
// The template hash covers name, version and both texts; stages record it in
// their outputs so a changed prompt is visible in provenance.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "icurate/error.hpp"
#include "icurate/util.hpp"

namespace icurate {

using Bindings = std::map<std::string, std::string, std::less<>>;

class PromptTemplate {
 public:
  PromptTemplate() = default;
  PromptTemplate(std::string name, int version, std::string system, std::string user)
      : name_(std::move(name)), version_(version), system_(std::move(system)), user_(std::move(user)) {}

  const std::string& name() const { return name_; }
  int version() const { return version_; }
  const std::string& system_text() const { return system_; }
  const std::string& user_text() const { return user_; }

  std::string hash() const {
    return sha256_hex(name_ + '\x1f' + std::to_string(version_) + '\x1f' + system_ + '\x1f' + user_).substr(0, 16);
  }

  std::string render_system(const Bindings& b) const { return substitute(system_, b); }
  std::string render_user(const Bindings& b) const { return substitute(user_, b); }

  std::string serialize() const {
    return "version: " + std::to_string(version_) + "\n" + system_ + "\n=====\n" + user_ + "\n";
  }

  static PromptTemplate parse(std::string name, std::string_view text) {
    const auto first_nl = text.find('\n');
    const auto header = trim(text.substr(0, first_nl));
    if (!header.starts_with("version:")) throw ConfigError("template '" + name + "' lacks a version header");
    int version = 0;
    try {
      version = std::stoi(trim(header.substr(8)));
    } catch (const std::exception&) {
      throw ConfigError("template '" + name + "' has a bad version header");
    }
    if (first_nl == std::string_view::npos) throw ConfigError("template '" + name + "' is empty");
    std::string_view body = text.substr(first_nl + 1);
    const auto sep = body.find("\n=====\n");
    if (sep == std::string_view::npos) throw ConfigError("template '" + name + "' lacks the ===== separator");
    std::string system(body.substr(0, sep));
    std::string user(body.substr(sep + 7));
    if (!user.empty() && user.back() == '\n') user.pop_back();
    return PromptTemplate(std::move(name), version, std::move(system), std::move(user));
  }

 private:
  /// Replaces {key} with its binding. Unknown keys are an error; "{{" and "}}" escape braces.
  std::string substitute(const std::string& text, const Bindings& b) const {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
      const char c = text[i];
      if (c == '{' && i + 1 < text.size() && text[i + 1] == '{') {
        out += '{';
        ++i;
      } else if (c == '}' && i + 1 < text.size() && text[i + 1] == '}') {
        out += '}';
        ++i;
      } else if (c == '{') {
        const auto close = text.find('}', i);
        if (close == std::string::npos) throw ConfigError("template '" + name_ + "': unterminated placeholder");
        const std::string_view key(text.data() + i + 1, close - i - 1);
        auto it = b.find(key);
        if (it == b.end()) {
          throw ConfigError("template '" + name_ + "': no binding for {" + std::string(key) + "}");
        }
        out += it->second;
        i = close;
      } else {
        out += c;
      }
    }
    return out;
  }

  std::string name_;
  int version_ = 1;
  std::string system_;
  std::string user_;
};

namespace builtin_prompts {

inline constexpr std::string_view kTagging = R"(version: 1
You are an annotator of instruction-tuning data. You label dialogues with the knowledge and skills an assistant needs in order to answer them well.
=====
Read the dialogue below and list the knowledge areas and skills required to complete it.

Guidelines:
- Each tag names one skill or knowledge area, in 1 to 4 words (for example: "mathematical reasoning", "python programming", "historical knowledge").
- Avoid tags that are too broad ("knowledge", "thinking") or too specific (tags that repeat details of this particular dialogue).
- Give between 1 and 8 tags; do not repeat a tag.
- Output only the tags as a comma-separated list on one line, with no numbering or explanation.

Dialogue:
{dialogue})";

inline constexpr std::string_view kTaggingRetry = R"(version: 1
You are an annotator of instruction-tuning data. Your previous answer could not be read. Answer with tags only.
=====
List the skills and knowledge areas needed for the dialogue below as a single comma-separated line, for example: "arithmetic, word problems". Nothing else.

Dialogue:
{dialogue})";

inline constexpr std::string_view kDomainInduction = R"(version: 1
You design taxonomies for instruction-tuning corpora.
=====
Below are the most frequent fine-grained skill tags from an instruction corpus, one per line with their counts. Summarize them into a compact set of domain-level categories that together cover all of the tags.

Output one category per line in exactly this form:
<Category Name>: one-sentence description of what the category covers

Tags:
{tags})";

inline constexpr std::string_view kDomainMapping = R"(version: 1
You assign fine-grained skill tags to broad domain categories using a fixed classification standard.
=====
Given the fine-grained skill tag below and the classification standard that follows, decide which one or more categories of the standard the tag belongs to. List only category names exactly as they appear in the standard, wrapping each name in angle brackets, e.g. <Category A><Category B>.

Tag: {tag}

Classification standard:
{standard})";

inline constexpr std::string_view kEvolveDiversity = R"(version: 1
You are an instruction rewriter. You create a new instruction that is inspired by a given one.
=====
Create a brand-new instruction that belongs to the same domain as the given instruction but covers a rarer topic or a different task type. It must be of similar length and difficulty, be answerable on its own, and be understandable without the original.
Output only the new instruction.

#Given Instruction#:
{instruction})";

inline constexpr std::string_view kEvolveReasoning = R"(version: 1
You are an instruction rewriter. You make a given instruction harder for strong AI assistants while keeping it reasonable for humans.
=====
Rewrite the given instruction so that answering it explicitly requires several steps of reasoning. If it can be solved with a few simple thinking steps, restate it so it requires multi-step reasoning. Add at most 20 words and keep it answerable.
Output only the rewritten instruction.

#Given Instruction#:
{instruction})";

inline constexpr std::string_view kEvolveConcretizing = R"(version: 1
You are an instruction rewriter. You make a given instruction harder for strong AI assistants while keeping it reasonable for humans.
=====
Rewrite the given instruction by replacing general concepts with more specific ones (concrete entities, numbers, settings, or constraints). Add at most 20 words and keep it answerable.
Output only the rewritten instruction.

#Given Instruction#:
{instruction})";

inline constexpr std::string_view kEvolveDeepening = R"(version: 1
You are an instruction rewriter. You make a given instruction harder for strong AI assistants while keeping it reasonable for humans.
=====
Rewrite the given instruction so that it probes the topic in more depth and breadth: ask about underlying principles, edge cases, or implications. Add at most 20 words and keep it answerable.
Output only the rewritten instruction.

#Given Instruction#:
{instruction})";

inline constexpr std::string_view kJudge = R"(version: 1
You review synthetic instructions for a training corpus.
=====
Decide whether the instruction below is a valid, self-contained, answerable request that an AI assistant could follow, free of contradictions and of leftover rewriting artifacts (such as "#Rewritten Prompt#" or "Given Instruction").
Answer with exactly one word: PASS or FAIL.

Instruction:
{instruction})";

inline constexpr std::string_view kRespond = R"(version: 1
You are a helpful, knowledgeable AI assistant. Answer accurately and completely.
=====
Continue the dialogue below by writing the assistant's next reply. Output only the reply.

{dialogue})";

inline constexpr std::string_view kFollowUp = R"(version: 1
You play the user in a conversation with an AI assistant. You ask natural follow-up questions.
=====
Given the dialogue so far, write the user's next message: a follow-up that builds on the assistant's last reply, digs deeper, or asks for a related variation. Output only the message.

{dialogue})";

inline constexpr std::string_view kDiagnose = R"(version: 1
You are an expert evaluator. You compare a model's answer with a reference answer and identify the knowledge or skill deficiencies that explain the gap.
=====
Query:
{query}

Reference response:
{reference}

Model response:
{response}

Compare the model response with the reference response. Identify what knowledge or skills the model is missing or misapplying.
If the model response has no meaningful deficiency, answer with the single word NONE.
Otherwise list each deficiency on its own line in exactly this form:
1. Deficiency: <category> | <description>)";

inline constexpr std::string_view kRemedial = R"(version: 1
You are an expert curriculum designer. You write training instructions that teach exactly the knowledge or skills a model is missing.
=====
A model answered the query below poorly. The diagnosed deficiencies are:
{deficiencies}

Original query:
{query}

Write {count} new, self-contained instructions that would train the model to overcome these deficiencies. They must differ from the original query.
List each on its own line in exactly this form:
1. Instruction: <instruction text>)";

inline constexpr std::string_view kDifficulty = R"(version: 1
You rate how difficult instructions are for a capable AI assistant.
=====
Rate the difficulty of the instruction below on this scale: very easy, easy, medium, hard, very hard.
Answer with the label only.

Instruction:
{instruction})";

}  // namespace builtin_prompts

/// Every template the pipeline uses, addressable by name.
class TemplateSet {
 public:
  static TemplateSet builtin() {
    TemplateSet set;
    const std::pair<const char*, std::string_view> items[] = {
        {"tagging", builtin_prompts::kTagging},
        {"tagging_retry", builtin_prompts::kTaggingRetry},
        {"domain_induction", builtin_prompts::kDomainInduction},
        {"domain_mapping", builtin_prompts::kDomainMapping},
        {"evolve_diversity", builtin_prompts::kEvolveDiversity},
        {"evolve_more_reasoning_steps", builtin_prompts::kEvolveReasoning},
        {"evolve_concretizing", builtin_prompts::kEvolveConcretizing},
        {"evolve_deepening", builtin_prompts::kEvolveDeepening},
        {"judge", builtin_prompts::kJudge},
        {"respond", builtin_prompts::kRespond},
        {"follow_up", builtin_prompts::kFollowUp},
        {"diagnose", builtin_prompts::kDiagnose},
        {"remedial", builtin_prompts::kRemedial},
        {"difficulty", builtin_prompts::kDifficulty},
    };
    for (const auto& [name, text] : items) set.put(PromptTemplate::parse(name, text));
    return set;
  }

  /// Built-ins, overridden by any <name>.txt found in `dir`.
  static TemplateSet with_overrides(const std::string& dir) {
    TemplateSet set = builtin();
    if (dir.empty()) return set;
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw ConfigError("template directory not found: " + dir);
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.path().extension() != ".txt") continue;
      const auto name = entry.path().stem().string();
      if (!set.templates_.count(name)) throw ConfigError("unknown template file: " + entry.path().string());
      set.put(PromptTemplate::parse(name, read_file(entry.path().string())));
    }
    return set;
  }

  void put(PromptTemplate t) {
    auto name = t.name();
    templates_[name] = std::move(t);
  }

  const PromptTemplate& get(const std::string& name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw ConfigError("no prompt template named '" + name + "'");
    return it->second;
  }

  const std::map<std::string, PromptTemplate>& all() const { return templates_; }

  /// name -> "v<version>:<hash>", for manifests.
  std::map<std::string, std::string> fingerprints() const {
    std::map<std::string, std::string> out;
    for (const auto& [name, t] : templates_) out[name] = "v" + std::to_string(t.version()) + ":" + t.hash();
    return out;
  }

 private:
  std::map<std::string, PromptTemplate> templates_;
};

}  // namespace icurate
