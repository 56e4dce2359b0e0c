// SPDX-License-Identifier: Apache-2.0
#pragma once

// Fine-grained tagging, domain-category induction, and fine -> domain mapping,
// with strict parsers for every model response format involved.

#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "icurate/corpus.hpp"
#include "icurate/gateway.hpp"
#include "icurate/parallel.hpp"
#include "icurate/prompts.hpp"
#include "icurate/util.hpp"
#include "icurate/vocabulary.hpp"

namespace icurate {

inline constexpr const char* kOtherCategory = "Other";

/// Roles used by this stage.
inline constexpr ModelRole kTaggingRole = ModelRole::tagger;
inline constexpr ModelRole kInductionRole = ModelRole::oracle;
inline constexpr ModelRole kMappingRole = ModelRole::tagger;

struct RawTagAssignment {
  std::string instruction_id;
  std::vector<std::string> tags;

  bool operator==(const RawTagAssignment&) const = default;
};

/// Appends `item` unless an equal string (ASCII case-insensitive) is already present.
inline void push_unique_icase(std::vector<std::string>& out, std::string item) {
  const auto key = to_lower(item);
  for (const auto& existing : out) {
    if (to_lower(existing) == key) return;
  }
  out.push_back(std::move(item));
}

/// Splits a tagger reply on commas and newlines. Strips list bullets, numbering and
/// quotes; drops empties; de-duplicates case-insensitively keeping first spelling.
inline std::vector<std::string> parse_tag_list(std::string_view response) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    std::string_view t = trim_view(cur);
    // "1." / "2)" numbering and "-" / "*" / "•" bullets
    std::size_t digits = 0;
    while (digits < t.size() && std::isdigit(static_cast<unsigned char>(t[digits]))) ++digits;
    if (digits > 0 && digits < t.size() && (t[digits] == '.' || t[digits] == ')')) t.remove_prefix(digits + 1);
    t = trim_view(t);
    if (t.starts_with("- ") || t.starts_with("* ")) t.remove_prefix(2);
    if (t.starts_with("\xE2\x80\xA2")) t.remove_prefix(3);
    t = trim_view(t);
    while (t.size() >= 2 && ((t.front() == '"' && t.back() == '"') || (t.front() == '\'' && t.back() == '\''))) {
      t = trim_view(t.substr(1, t.size() - 2));
    }
    if (!t.empty()) push_unique_icase(out, std::string(t));
    cur.clear();
  };
  for (char c : response) {
    if (c == ',' || c == '\n') {
      flush();
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return out;
}

/// Contents of each <...> group in order, trimmed; empties and exact duplicates removed.
inline std::vector<std::string> parse_angle_bracket_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto open = s.find('<', pos);
    if (open == std::string_view::npos) break;
    const auto close = s.find('>', open + 1);
    if (close == std::string_view::npos) break;
    // an inner '<' restarts the group: "<a <b>" yields "b"
    const auto inner_open = s.find('<', open + 1);
    if (inner_open != std::string_view::npos && inner_open < close) {
      pos = inner_open;
      continue;
    }
    auto item = trim(s.substr(open + 1, close - open - 1));
    if (!item.empty() && std::find(out.begin(), out.end(), item) == out.end()) out.push_back(std::move(item));
    pos = close + 1;
  }
  return out;
}

struct TaggingResult {
  std::vector<RawTagAssignment> assignments;  // aligned with corpus order
  std::size_t untagged = 0;
  std::vector<std::string> untagged_ids;
  std::string prompt_hash;
};

inline RawTagAssignment tag_record(const InstructionRecord& r, Gateway& gw, const TemplateSet& templates,
                                   bool* untagged = nullptr) {
  const Bindings b{{"dialogue", flatten_dialogue(r)}};
  RawTagAssignment a{r.id, {}};
  for (const char* name : {"tagging", "tagging_retry"}) {
    const auto& t = templates.get(name);
    ChatRequest req;
    req.system = t.render_system(b);
    req.user = t.render_user(b);
    req.model_role = kTaggingRole;
    req.max_tokens = 256;
    a.tags = parse_tag_list(gw.chat_complete(req));
    if (!a.tags.empty()) break;
  }
  if (untagged) *untagged = a.tags.empty();
  return a;
}

/// One assignment per record, in corpus order. Records whose replies stay
/// unparseable after one reprompt are kept with empty tags and counted.
inline TaggingResult generate_fine_tags(const Corpus& c, Gateway& gw, const TemplateSet& templates,
                                        std::size_t workers = 1) {
  TaggingResult result;
  result.assignments.resize(c.size());
  std::vector<char> failed(c.size(), 0);
  parallel_for(c.size(), workers, [&](std::size_t i) {
    bool untagged = false;
    result.assignments[i] = tag_record(c[i], gw, templates, &untagged);
    failed[i] = untagged;
  });
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (failed[i]) {
      ++result.untagged;
      result.untagged_ids.push_back(c[i].id);
    }
  }
  result.prompt_hash = templates.get("tagging").hash();
  return result;
}

inline std::string serialize_assignments(const std::vector<RawTagAssignment>& assignments) {
  std::string out;
  for (const auto& a : assignments) {
    out += nlohmann::json{{"id", a.instruction_id}, {"tags", a.tags}}.dump();
    out += '\n';
  }
  return out;
}

inline std::vector<RawTagAssignment> load_assignments(const std::string& path) {
  std::vector<RawTagAssignment> out;
  std::size_t lineno = 0;
  for (const auto& line : split_lines(read_file(path))) {
    ++lineno;
    if (trim_view(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("id").get<std::string>(), j.at("tags").get<std::vector<std::string>>()});
    } catch (const std::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

struct DomainCategory {
  std::string name;
  std::string description;

  bool operator==(const DomainCategory&) const = default;
};

struct DomainCategorySet {
  std::vector<DomainCategory> categories;

  std::size_t size() const { return categories.size(); }
  bool empty() const { return categories.empty(); }

  void validate() const {
    if (categories.empty()) throw DataError("empty domain category set");
    std::set<std::string> seen;
    for (const auto& c : categories) {
      if (trim_view(c.name).empty()) throw DataError("domain category with empty name");
      if (!seen.insert(to_lower(c.name)).second) throw DataError("duplicate domain category '" + c.name + "'");
    }
  }

  /// Canonical spelling of `name` if it names a category (ASCII case-insensitive).
  std::optional<std::string> canonical(std::string_view name) const {
    const auto key = to_lower(trim_view(name));
    for (const auto& c : categories) {
      if (to_lower(c.name) == key) return c.name;
    }
    return std::nullopt;
  }

  /// "<Name>: description" per line; this is the standard shown to the mapper.
  std::string render_standard() const {
    std::string out;
    for (const auto& c : categories) {
      if (!out.empty()) out += '\n';
      out += "<" + c.name + ">: " + c.description;
    }
    return out;
  }
};

inline nlohmann::json to_json(const DomainCategorySet& s) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : s.categories) arr.push_back({{"name", c.name}, {"description", c.description}});
  return {{"categories", arr}};
}

inline DomainCategorySet categories_from_json(const nlohmann::json& j) {
  DomainCategorySet s;
  for (const auto& c : j.at("categories")) {
    s.categories.push_back({c.at("name").get<std::string>(), c.value("description", std::string())});
  }
  s.validate();
  return s;
}

/// One category per line as "<Name>: description". Lines without a bracketed name
/// are ignored; repeated names (case-insensitive) keep their first occurrence.
inline DomainCategorySet parse_category_list(std::string_view response) {
  DomainCategorySet s;
  std::set<std::string> seen;
  for (const auto& line : split_lines(response)) {
    const auto open = line.find('<');
    const auto close = line.find('>', open == std::string::npos ? 0 : open);
    if (open == std::string::npos || close == std::string::npos) continue;
    auto name = trim(std::string_view(line).substr(open + 1, close - open - 1));
    if (name.empty() || !seen.insert(to_lower(name)).second) continue;
    std::string_view rest = trim_view(std::string_view(line).substr(close + 1));
    if (rest.starts_with(':') || rest.starts_with('-')) rest.remove_prefix(1);
    s.categories.push_back({std::move(name), trim(rest)});
  }
  return s;
}

struct InductionResult {
  DomainCategorySet categories;
  std::vector<std::string> summarized_tags;  // the top-k tags that were sent
};

/// Summarizes the k most frequent tags (k clamped to the vocabulary size) into
/// domain categories. Fewer than two parsed categories is a DataError.
inline InductionResult induce_domain_categories(const TagVocabulary& vocab, std::size_t k, Gateway& gw,
                                                const TemplateSet& templates) {
  InductionResult result;
  result.summarized_tags = vocab.top(std::min(k, vocab.size()));
  if (result.summarized_tags.empty()) throw DataError("cannot induce domain categories from an empty vocabulary");
  std::string listing;
  for (const auto& id : result.summarized_tags) {
    listing += id + " (" + std::to_string(*vocab.frequency(id)) + ")\n";
  }
  const auto& t = templates.get("domain_induction");
  const Bindings b{{"tags", listing}};
  ChatRequest req;
  req.system = t.render_system(b);
  req.user = t.render_user(b);
  req.model_role = kInductionRole;
  req.max_tokens = 2048;
  result.categories = parse_category_list(gw.chat_complete(req));
  if (result.categories.size() < 2) {
    throw DataError("domain induction produced " + std::to_string(result.categories.size()) +
                    " categories; at least 2 are required");
  }
  return result;
}

/// Categories for one fine-grained tag. Names outside `cats` are dropped; an empty
/// result is retried once and then falls back to {"Other"}.
inline std::set<std::string> map_tag_to_domain(const std::string& tag, const DomainCategorySet& cats, Gateway& gw,
                                               const TemplateSet& templates) {
  if (cats.empty()) throw ContractError("map_tag_to_domain needs a non-empty category set");
  const auto& t = templates.get("domain_mapping");
  const Bindings b{{"tag", tag}, {"standard", cats.render_standard()}};
  ChatRequest req;
  req.system = t.render_system(b);
  req.user = t.render_user(b);
  req.model_role = kMappingRole;
  req.max_tokens = 128;
  for (int attempt = 0; attempt < 2; ++attempt) {
    if (attempt == 1) req.temperature = 0.7;  // vary the second request so a cached reply is not repeated
    std::set<std::string> out;
    for (const auto& name : parse_angle_bracket_list(gw.chat_complete(req))) {
      if (auto canon = cats.canonical(name)) out.insert(*canon);
    }
    if (!out.empty()) return out;
  }
  return {kOtherCategory};
}

/// Fills every vocabulary entry's domain_tags.
inline void map_vocabulary_domains(TagVocabulary& vocab, const DomainCategorySet& cats, Gateway& gw,
                                   const TemplateSet& templates, std::size_t workers = 1) {
  std::vector<VocabEntry*> entries;
  for (auto& [id, e] : vocab.entries) entries.push_back(&e);
  parallel_for(entries.size(), workers, [&](std::size_t i) {
    entries[i]->domain_tags = map_tag_to_domain(entries[i]->surface, cats, gw, templates);
  });
}

/// Sets each record's domain_tags to the union over its fine tags.
inline void apply_domains(Corpus& c, const TagVocabulary& vocab) {
  for (std::size_t i = 0; i < c.size(); ++i) {
    auto& r = c.at_mutable(i);
    r.domain_tags.clear();
    for (const auto& tag : r.fine_tags) {
      if (auto it = vocab.entries.find(tag); it != vocab.entries.end()) {
        r.domain_tags.insert(it->second.domain_tags.begin(), it->second.domain_tags.end());
      }
    }
  }
}

}  // namespace icurate
