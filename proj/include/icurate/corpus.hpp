// SPDX-License-Identifier: Apache-2.0
#pragma once

// Canonical instruction record model plus JSONL load/save.
//
// One record per line:
//   {"id": "...", "turns": [{"role": "user", "text": "..."}, ...],
//    "fine_tags": [...], "domain_tags": [...], "base_loss": 1.2, "ft_loss": 0.9,
//    "difficulty": 3, "provenance": {"kind": "seed", "parent_chain": []},
//    "source_dataset": "..."}
// Optional fields are omitted when absent. Tag arrays are written sorted.

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "icurate/error.hpp"
#include "icurate/util.hpp"

namespace icurate {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

enum class Role { user, assistant };

inline const char* to_string(Role r) { return r == Role::user ? "user" : "assistant"; }

struct Turn {
  Role role = Role::user;
  std::string text;

  bool operator==(const Turn&) const = default;
};

enum class ProvenanceKind { seed, evolved, remedial };

inline const char* to_string(ProvenanceKind k) {
  switch (k) {
    case ProvenanceKind::seed: return "seed";
    case ProvenanceKind::evolved: return "evolved";
    case ProvenanceKind::remedial: return "remedial";
  }
  return "seed";
}

struct Provenance {
  ProvenanceKind kind = ProvenanceKind::seed;
  std::vector<std::string> parent_chain;  // oldest ancestor first

  bool operator==(const Provenance&) const = default;
};

struct InstructionRecord {
  std::string id;
  std::vector<Turn> turns;
  std::set<std::string> fine_tags;
  std::set<std::string> domain_tags;
  std::optional<double> base_loss;
  std::optional<double> ft_loss;
  std::optional<int> difficulty;
  Provenance provenance;
  std::string source_dataset;

  bool operator==(const InstructionRecord&) const = default;
};

/// Throws DataError describing the first violated record invariant.
inline void validate_record(const InstructionRecord& r) {
  if (r.id.empty()) throw DataError("record has empty id");
  if (r.turns.empty()) throw DataError("record '" + r.id + "' has no turns");
  for (std::size_t i = 0; i < r.turns.size(); ++i) {
    const Role expected = (i % 2 == 0) ? Role::user : Role::assistant;
    if (r.turns[i].role != expected) {
      throw DataError("record '" + r.id + "': turn " + std::to_string(i) + " should be " + to_string(expected));
    }
    if (trim_view(r.turns[i].text).empty()) {
      throw DataError("record '" + r.id + "': turn " + std::to_string(i) + " is blank");
    }
  }
  if (r.base_loss && !(*r.base_loss >= 0.0)) throw DataError("record '" + r.id + "': negative base_loss");
  if (r.ft_loss) {
    if (!r.base_loss) throw DataError("record '" + r.id + "': ft_loss without base_loss");
    if (!(*r.ft_loss >= 0.0)) throw DataError("record '" + r.id + "': negative ft_loss");
  }
  if (r.difficulty && (*r.difficulty < 0 || *r.difficulty > 4)) {
    throw DataError("record '" + r.id + "': difficulty outside 0..4");
  }
  if (r.provenance.kind != ProvenanceKind::seed && r.provenance.parent_chain.empty()) {
    throw DataError("record '" + r.id + "': derived record without parent chain");
  }
}

inline json to_json(const InstructionRecord& r) {
  json j;
  j["id"] = r.id;
  json turns = json::array();
  for (const auto& t : r.turns) turns.push_back({{"role", to_string(t.role)}, {"text", t.text}});
  j["turns"] = std::move(turns);
  j["fine_tags"] = r.fine_tags;
  j["domain_tags"] = r.domain_tags;
  if (r.base_loss) j["base_loss"] = *r.base_loss;
  if (r.ft_loss) j["ft_loss"] = *r.ft_loss;
  if (r.difficulty) j["difficulty"] = *r.difficulty;
  j["provenance"] = {{"kind", to_string(r.provenance.kind)}, {"parent_chain", r.provenance.parent_chain}};
  j["source_dataset"] = r.source_dataset;
  return j;
}

inline InstructionRecord record_from_json(const json& j) {
  if (!j.is_object()) throw DataError("record is not a JSON object");
  InstructionRecord r;
  r.id = j.at("id").get<std::string>();
  for (const auto& t : j.at("turns")) {
    const auto role = t.at("role").get<std::string>();
    Turn turn;
    if (role == "user") {
      turn.role = Role::user;
    } else if (role == "assistant") {
      turn.role = Role::assistant;
    } else {
      throw DataError("unknown role '" + role + "'");
    }
    turn.text = t.at("text").get<std::string>();
    r.turns.push_back(std::move(turn));
  }
  if (auto it = j.find("fine_tags"); it != j.end()) r.fine_tags = it->get<std::set<std::string>>();
  if (auto it = j.find("domain_tags"); it != j.end()) r.domain_tags = it->get<std::set<std::string>>();
  if (auto it = j.find("base_loss"); it != j.end() && !it->is_null()) r.base_loss = it->get<double>();
  if (auto it = j.find("ft_loss"); it != j.end() && !it->is_null()) r.ft_loss = it->get<double>();
  if (auto it = j.find("difficulty"); it != j.end() && !it->is_null()) r.difficulty = it->get<int>();
  if (auto it = j.find("provenance"); it != j.end()) {
    const auto kind = it->at("kind").get<std::string>();
    if (kind == "seed") {
      r.provenance.kind = ProvenanceKind::seed;
    } else if (kind == "evolved") {
      r.provenance.kind = ProvenanceKind::evolved;
    } else if (kind == "remedial") {
      r.provenance.kind = ProvenanceKind::remedial;
    } else {
      throw DataError("unknown provenance kind '" + kind + "'");
    }
    if (auto pc = it->find("parent_chain"); pc != it->end()) {
      r.provenance.parent_chain = pc->get<std::vector<std::string>>();
    }
  }
  if (auto it = j.find("source_dataset"); it != j.end()) r.source_dataset = it->get<std::string>();
  validate_record(r);
  return r;
}

/// Ordered, id-unique record collection. Iteration order is file order.
class Corpus {
 public:
  int schema_version = kSchemaVersion;

  Corpus() = default;
  explicit Corpus(std::vector<InstructionRecord> records) {
    for (auto& r : records) add(std::move(r));
  }

  /// Appends a record; duplicate ids are a DataError.
  void add(InstructionRecord r) {
    validate_record(r);
    if (!index_.emplace(r.id, records_.size()).second) throw DataError("duplicate id '" + r.id + "'");
    records_.push_back(std::move(r));
  }

  const std::vector<InstructionRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  auto begin() const { return records_.begin(); }
  auto end() const { return records_.end(); }
  const InstructionRecord& operator[](std::size_t i) const { return records_[i]; }

  const InstructionRecord* find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &records_[it->second];
  }
  bool contains(const std::string& id) const { return index_.count(id) != 0; }

  /// Mutable access for stages that annotate records in place (losses, tags).
  InstructionRecord* find_mutable(const std::string& id) {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &records_[it->second];
  }
  InstructionRecord& at_mutable(std::size_t i) { return records_[i]; }

 private:
  std::vector<InstructionRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct LoadResult {
  Corpus corpus;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
};

/// Parses JSONL text. `origin` names the source in messages.
inline LoadResult parse_corpus(std::istream& in, bool strict, const std::string& origin = "<stream>") {
  LoadResult result;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim_view(line).empty()) continue;
    InstructionRecord rec;
    try {
      rec = record_from_json(json::parse(line));
    } catch (const std::exception& e) {
      const std::string msg = origin + ":" + std::to_string(lineno) + ": " + e.what();
      if (strict) throw DataError(msg);
      ++result.skipped;
      result.warnings.push_back("skipped " + msg);
      continue;
    }
    // duplicate ids are fatal in both modes
    result.corpus.add(std::move(rec));
  }
  return result;
}

inline LoadResult load_corpus(const std::string& path, bool strict) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read corpus: " + path);
  return parse_corpus(in, strict, path);
}

inline std::string serialize_corpus(const Corpus& c) {
  std::string out;
  for (const auto& r : c) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

inline void save_corpus(const Corpus& c, const std::string& path) { write_file(path, serialize_corpus(c)); }

/// "user: <text>\nassistant: <text>..." in turn order, no trailing newline.
inline std::string flatten_dialogue(const InstructionRecord& r) {
  std::string out;
  for (std::size_t i = 0; i < r.turns.size(); ++i) {
    if (i) out += '\n';
    out += to_string(r.turns[i].role);
    out += ": ";
    out += r.turns[i].text;
  }
  return out;
}

/// Concatenated user turns only; this is what leakage screening compares.
inline std::string user_text(const InstructionRecord& r) {
  std::string out;
  for (const auto& t : r.turns) {
    if (t.role != Role::user) continue;
    if (!out.empty()) out += '\n';
    out += t.text;
  }
  return out;
}

struct AttachResult {
  std::size_t attached = 0;
  std::size_t unknown_ids = 0;
  std::vector<std::string> warnings;
};

/// Joins a loss sidecar (JSONL of {"id","base_loss","ft_loss"?}) onto the corpus.
/// Unknown ids warn unless `unknown_fatal`; negative losses are always fatal.
inline AttachResult attach_loss_metadata(Corpus& c, const std::string& sidecar, bool unknown_fatal = false) {
  std::ifstream in(sidecar, std::ios::binary);
  if (!in) throw DataError("cannot read loss sidecar: " + sidecar);
  AttachResult result;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim_view(line).empty()) continue;
    const std::string where = sidecar + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      throw DataError(where + ": " + e.what());
    }
    const auto id = j.at("id").get<std::string>();
    const double base = j.at("base_loss").get<double>();
    std::optional<double> ft;
    if (auto it = j.find("ft_loss"); it != j.end() && !it->is_null()) ft = it->get<double>();
    if (base < 0.0 || (ft && *ft < 0.0)) throw DataError(where + ": negative loss for '" + id + "'");
    InstructionRecord* rec = c.find_mutable(id);
    if (!rec) {
      if (unknown_fatal) throw DataError(where + ": id '" + id + "' not in corpus");
      ++result.unknown_ids;
      result.warnings.push_back(where + ": id '" + id + "' not in corpus");
      continue;
    }
    rec->base_loss = base;
    rec->ft_loss = ft;
    ++result.attached;
  }
  return result;
}

/// Merges several sources, namespacing ids as "<prefix>:<id>" so sources cannot collide.
/// An empty prefix keeps the original ids.
inline Corpus merge_sources(const std::vector<std::pair<std::string, Corpus>>& sources) {
  Corpus merged;
  for (const auto& [prefix, corpus] : sources) {
    for (auto r : corpus) {
      if (!prefix.empty()) {
        r.id = prefix + ":" + r.id;
        for (auto& p : r.provenance.parent_chain) p = prefix + ":" + p;
        if (r.source_dataset.empty()) r.source_dataset = prefix;
      }
      merged.add(std::move(r));
    }
  }
  return merged;
}

}  // namespace icurate
