// SPDX-License-Identifier: Apache-2.0
#pragma once

// Offline transport. Chat requests are answered by the first matching rule in a
// table (role + prefix/contains/regex over "system\nuser"); a rule's response is
// either literal text or a generator name starting with '@'. Generators derive
// every choice from a hash of (seed, role, request text), so an answer depends
// only on the request, never on call order or thread timing.
//
// Embeddings are unit vectors built from hash-seeded Gaussian features: one for
// the whole text plus one per lower-cased word, so texts sharing words land
// closer together. Fixture tables may pin exact vectors for given texts.
//
// Rule file (JSON):
//   {"rules": [{"role": "judge", "match": "regex", "pattern": "...", "response": "PASS"}],
//    "embeddings": {"some text": [0.1, 0.2, ...]}}

#include <atomic>
#include <map>
#include <mutex>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "icurate/gateway.hpp"
#include "icurate/util.hpp"

namespace icurate {

struct MockRule {
  enum class Match { any, prefix, contains, regex };

  std::optional<ModelRole> role;
  Match match = Match::any;
  std::string pattern;
  std::string response;  // literal, or "@generator"

  bool matches(const ChatRequest& req, const std::string& haystack) const {
    if (role && *role != req.model_role) return false;
    switch (match) {
      case Match::any: return true;
      case Match::prefix: return haystack.starts_with(pattern) || req.user.starts_with(pattern);
      case Match::contains: return haystack.find(pattern) != std::string::npos;
      case Match::regex: return compiled && std::regex_search(haystack, *compiled);
    }
    return false;
  }

  /// Filled by MockTransport::add_rule.
  std::shared_ptr<const std::regex> compiled;
};

class MockTransport : public Transport {
 public:
  explicit MockTransport(std::uint64_t seed = 0, std::size_t dim = 64) : seed_(seed), dim_(dim) {
    if (dim_ < 2) throw ConfigError("mock embedding dimension must be >= 2");
  }

  /// Rules added here take precedence over the built-in defaults.
  void add_rule(MockRule rule) {
    if (rule.match == MockRule::Match::regex) {
      try {
        rule.compiled = std::make_shared<const std::regex>(rule.pattern, std::regex::ECMAScript | std::regex::icase);
      } catch (const std::regex_error& e) {
        throw ConfigError("mock rule has a bad regex '" + rule.pattern + "': " + e.what());
      }
    }
    rules_.push_back(std::move(rule));
  }

  void add_rule(std::optional<ModelRole> role, MockRule::Match match, std::string pattern, std::string response) {
    MockRule r;
    r.role = role;
    r.match = match;
    r.pattern = std::move(pattern);
    r.response = std::move(response);
    add_rule(std::move(r));
  }

  void pin_embedding(const std::string& text, EmbeddingVector v) {
    std::lock_guard lock(mu_);
    pinned_[text] = std::move(v);
  }

  void load_rules_file(const std::string& path) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("mock rules file " + path + ": " + e.what());
    }
    for (const auto& r : j.value("rules", nlohmann::json::array())) {
      MockRule rule;
      if (r.contains("role")) {
        rule.role = role_from_string(r.at("role").get<std::string>());
        if (!rule.role) throw ConfigError("mock rules: unknown role " + r.at("role").dump());
      }
      const auto match = r.value("match", std::string("any"));
      if (match == "any") {
        rule.match = MockRule::Match::any;
      } else if (match == "prefix") {
        rule.match = MockRule::Match::prefix;
      } else if (match == "contains") {
        rule.match = MockRule::Match::contains;
      } else if (match == "regex") {
        rule.match = MockRule::Match::regex;
      } else {
        throw ConfigError("mock rules: unknown match kind '" + match + "'");
      }
      rule.pattern = r.value("pattern", std::string());
      rule.response = r.at("response").get<std::string>();
      add_rule(std::move(rule));
    }
    if (j.contains("embeddings")) {
      for (const auto& [text, vec] : j.at("embeddings").items()) {
        pin_embedding(text, EmbeddingVector(vec.get<std::vector<double>>()));
      }
    }
  }

  std::string chat(const ChatRequest& req) override {
    chat_calls_.fetch_add(1);
    const std::string haystack = req.system + "\n" + req.user;
    for (const auto& rule : rules_) {
      if (rule.matches(req, haystack)) return respond(rule.response, req);
    }
    for (const auto& rule : default_rules()) {
      if (rule.matches(req, haystack)) return respond(rule.response, req);
    }
    return respond("@text", req);
  }

  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override {
    embed_calls_.fetch_add(1);
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
  }

  EmbeddingVector embed_one(const std::string& text) const {
    {
      std::lock_guard lock(mu_);
      if (auto it = pinned_.find(text); it != pinned_.end()) return it->second;
    }
    std::vector<double> v(dim_, 0.0);
    add_feature(v, "text\x1f" + text, 1.0);
    std::vector<std::string> words;
    std::string cur;
    for (unsigned char c : text) {
      if (std::isalnum(c)) {
        cur.push_back(static_cast<char>(std::tolower(c)));
      } else if (!cur.empty()) {
        words.push_back(std::move(cur));
        cur.clear();
      }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    if (!words.empty()) {
      const double w = 1.0 / std::sqrt(static_cast<double>(words.size()));
      for (const auto& word : words) add_feature(v, "word\x1f" + word, w);
    }
    const double n = norm(v);
    for (auto& x : v) x /= n;
    return EmbeddingVector(std::move(v));
  }

  std::size_t chat_calls() const { return chat_calls_.load(); }
  std::size_t embed_calls() const { return embed_calls_.load(); }

 private:
  void add_feature(std::vector<double>& v, const std::string& key, double weight) const {
    Rng rng(seed_, key);
    for (auto& x : v) x += weight * rng.normal();
  }

  static const std::vector<MockRule>& default_rules() {
    static const std::vector<MockRule> rules = [] {
      std::vector<MockRule> r;
      auto add = [&](ModelRole role, MockRule::Match m, const char* pattern, const char* response) {
        MockRule rule;
        rule.role = role;
        rule.match = m;
        rule.pattern = pattern;
        rule.response = response;
        if (m == MockRule::Match::regex) rule.compiled = std::make_shared<const std::regex>(rule.pattern);
        r.push_back(std::move(rule));
      };
      add(ModelRole::oracle, MockRule::Match::contains, "domain-level categories", "@categories");
      add(ModelRole::tagger, MockRule::Match::contains, "domain-level categories", "@categories");
      add(ModelRole::tagger, MockRule::Match::contains, "Classification standard:", "@domains");
      add(ModelRole::tagger, MockRule::Match::any, "", "@tags");
      add(ModelRole::judge, MockRule::Match::any, "", "@verdict");
      add(ModelRole::scorer, MockRule::Match::any, "", "@difficulty");
      add(ModelRole::oracle, MockRule::Match::contains, "Deficiency:", "@deficiencies");
      add(ModelRole::oracle, MockRule::Match::contains, "Instruction:", "@instructions");
      return r;
    }();
    return rules;
  }

  Rng request_rng(const ChatRequest& req) const {
    return Rng(seed_, std::string(to_string(req.model_role)) + '\x1f' + req.system + '\x1f' + req.user);
  }

  static std::string hex8(std::uint64_t x) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string s(8, '0');
    for (int i = 7; i >= 0; --i) {
      s[static_cast<std::size_t>(i)] = kHex[x & 0xf];
      x >>= 4;
    }
    return s;
  }

  /// Text following the last occurrence of `marker`, or empty.
  static std::string after(const std::string& s, const std::string& marker) {
    const auto pos = s.rfind(marker);
    if (pos == std::string::npos) return {};
    return trim(std::string_view(s).substr(pos + marker.size()));
  }

  std::string respond(const std::string& response, const ChatRequest& req) const {
    if (response.empty() || response.front() != '@') return response;
    Rng rng = request_rng(req);
    const std::string& g = response;
    if (g == "@tags") return gen_tags(req.user, rng);
    if (g == "@verdict") return rng.uniform() < 0.85 ? "PASS" : "FAIL";
    if (g == "@difficulty") {
      static const char* kLabels[] = {"very easy", "easy", "medium", "hard", "very hard"};
      return kLabels[rng.below(5)];
    }
    if (g == "@categories") return gen_categories();
    if (g == "@domains") return gen_domains(req.user, rng);
    if (g == "@deficiencies") return gen_deficiencies(rng);
    if (g == "@instructions") return gen_instructions(req.user, rng);
    if (g == "@text") return gen_text(req, rng);
    if (g == "@empty") return "";
    throw TransportError("mock: unknown generator '" + g + "'", false);
  }

  static const std::vector<std::string>& tag_pool() {
    static const std::vector<std::string> pool = {
        "mathematical reasoning", "python programming", "logical reasoning", "text generation",
        "knowledge q&a", "creative writing", "problem solving", "code debugging",
        "algebra", "data analysis", "translation", "summarization",
        "historical knowledge", "common sense reasoning", "physics knowledge", "algorithm design",
        "math calculation", "mathematical calculation", "grammar correction", "sentiment analysis",
        "sql query writing", "geometry", "probability", "chemistry knowledge",
        "legal knowledge", "medical knowledge", "financial analysis", "poetry writing",
        "dialogue role play", "information extraction", "javascript programming", "unit testing",
        "statistics", "biology knowledge", "geography knowledge", "economic analysis",
        "instruction following", "formal writing", "emotional support", "career advice",
        "data structures", "system design", "regular expressions", "c++ programming",
        "literature analysis", "philosophy", "music theory", "cooking knowledge"};
    return pool;
  }

  /// Tags cued by words in the dialogue, in table order.
  static std::vector<std::string> cued_tags(const std::string& dialogue) {
    static const std::pair<const char*, const char*> kCues[] = {
        {"python", "python programming"},     {"sql", "sql query writing"},
        {"c++", "c++ programming"},           {"linked list", "data structures"},
        {"fibonacci", "algorithm design"},    {"refactor", "code debugging"},
        {"solve", "algebra"},                 {"derivative", "mathematical calculation"},
        {"sum of", "math calculation"},       {"speed", "mathematical reasoning"},
        {"prove", "logical reasoning"},       {"poem", "poetry writing"},
        {"email", "formal writing"},          {"formal", "formal writing"},
        {"story", "creative writing"},        {"summarize", "summarization"},
        {"product description", "text generation"}, {"sky", "physics knowledge"},
        {"water", "physics knowledge"},       {"photosynthesis", "biology knowledge"},
        {"vaccine", "medical knowledge"},     {"mitosis", "biology knowledge"},
        {"table", "information extraction"},  {"sleep", "medical knowledge"},
        {"interview", "career advice"},       {"trip", "geography knowledge"},
        {"energy", "economic analysis"},      {"workout", "instruction following"},
        {"revenue", "data analysis"},         {"budget", "financial analysis"}};
    const std::string text = to_lower(dialogue);
    std::vector<std::string> out;
    for (const auto& [cue, tag] : kCues) {
      if (text.find(cue) != std::string::npos && std::find(out.begin(), out.end(), tag) == out.end()) {
        out.emplace_back(tag);
      }
    }
    return out;
  }

  static std::string gen_tags(const std::string& user, Rng& rng) {
    const auto& pool = tag_pool();
    std::vector<std::string> picked = cued_tags(after(user, "Dialogue:"));
    if (picked.size() > 4) picked.resize(4);
    const std::size_t extra = (picked.empty() ? 1 : 0) + rng.below(5);
    const std::size_t target = std::min<std::size_t>(8, picked.size() + extra);
    while (picked.size() < target) {
      // skewed toward the head of the pool so frequencies are long-tailed
      const double u = rng.uniform();
      const auto idx = static_cast<std::size_t>(static_cast<double>(pool.size()) * u * u * u);
      const auto& tag = pool[std::min(idx, pool.size() - 1)];
      if (std::find(picked.begin(), picked.end(), tag) == picked.end()) picked.push_back(tag);
    }
    std::string out;
    for (std::size_t i = 0; i < picked.size(); ++i) out += (i ? ", " : "") + picked[i];
    return out;
  }

  static std::string gen_categories() {
    return "<Mathematics>: arithmetic, algebra, geometry, probability, statistics and mathematical calculation\n"
           "<Programming>: writing, explaining and debugging code, queries and algorithms\n"
           "<Language>: translation, grammar, summarization and text transformation\n"
           "<Creative Writing>: stories, poetry and other imaginative or formal writing\n"
           "<Knowledge>: factual questions across science, history, law and medicine\n"
           "<Reasoning>: logic, common sense and multi-step problem solving\n"
           "<Analysis>: data, financial, economic and sentiment analysis\n"
           "<Assistance>: advice, role play, support and instruction following";
  }

  /// The category sharing the most words with the tag; random when none does.
  static std::string gen_domains(const std::string& user, Rng& rng) {
    std::vector<std::pair<std::string, std::string>> cats;  // name, lower-cased name + description
    static const std::regex kLine(R"(^\s*<([^<>]+)>(.*)$)");
    for (const auto& line : split_lines(after(user, "Classification standard:"))) {
      std::smatch m;
      if (std::regex_search(line, m, kLine)) cats.emplace_back(trim(m[1].str()), to_lower(m[1].str() + m[2].str()));
    }
    if (cats.empty()) return "<Other>";
    std::string tag = split_lines(after(user, "Tag:")).front();
    std::vector<std::string> words;
    std::istringstream ws(to_lower(tag));
    for (std::string w; ws >> w;) {
      if (w.size() >= 3) words.push_back(w);
    }
    std::size_t best = 0, best_score = 0;
    for (std::size_t i = 0; i < cats.size(); ++i) {
      std::size_t score = 0;
      for (const auto& w : words) score += cats[i].second.find(w) != std::string::npos;
      if (score > best_score) {
        best = i;
        best_score = score;
      }
    }
    if (best_score == 0) best = rng.below(cats.size());
    std::string out = "<" + cats[best].first + ">";
    if (cats.size() > 1 && rng.uniform() < 0.2) {
      const std::size_t second = rng.below(cats.size());
      if (second != best) out += "<" + cats[second].first + ">";
    }
    return out;
  }

  static std::string gen_deficiencies(Rng& rng) {
    if (rng.uniform() < 0.3) return "NONE";
    static const std::pair<const char*, const char*> kPool[] = {
        {"knowledge gap", "misses key facts present in the reference"},
        {"reasoning error", "skips an intermediate step and reaches a wrong conclusion"},
        {"instruction following", "ignores a formatting constraint of the query"},
        {"calculation error", "makes an arithmetic mistake"},
        {"incompleteness", "covers only part of what the query asks"}};
    const std::size_t n = 1 + rng.below(2);
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& [cat, desc] = kPool[rng.below(std::size(kPool))];
      out += std::to_string(i + 1) + ". Deficiency: " + cat + " | " + desc + "\n";
    }
    return out;
  }

  static std::string gen_instructions(const std::string& user, Rng& rng) {
    static const std::regex kCount(R"(Write (\d+) new)");
    std::smatch m;
    std::size_t count = 2;
    if (std::regex_search(user, m, kCount)) count = std::stoul(m[1].str());
    const std::string topic = after(user, "Original query:").substr(0, 60);
    std::string out;
    for (std::size_t i = 0; i < count; ++i) {
      out += std::to_string(i + 1) + ". Instruction: Practice task " + hex8(rng.next()) +
             ": explain step by step how to handle a variant of \"" + split_lines(topic).front() + "\"\n";
    }
    return out;
  }

  static std::string gen_text(const ChatRequest& req, Rng& rng) {
    const std::string tag = hex8(rng.next());
    std::string given = split_lines(after(req.user, "#Given Instruction#:")).front();
    if (given.starts_with("user: ")) given.erase(0, 6);
    if (!given.empty()) {
      static const char* kLeads[] = {"In detail, ", "Step by step, ", "For a concrete case, ",
                                     "Considering edge cases, "};
      return std::string(kLeads[rng.below(4)]) + given + " (variant " + tag + ")";
    }
    if (req.system.find("play the user") != std::string::npos) {
      return "Could you expand on that and give another example? (follow-up " + tag + ")";
    }
    return "Here is a careful answer addressing the request (response " + tag + ").";
  }

  std::uint64_t seed_;
  std::size_t dim_;
  std::vector<MockRule> rules_;
  mutable std::mutex mu_;
  std::map<std::string, EmbeddingVector> pinned_;
  std::atomic<std::size_t> chat_calls_{0};
  std::atomic<std::size_t> embed_calls_{0};
};

}  // namespace icurate
