#include "probekit/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "json.hpp"

#include "probekit/csv.hpp"
#include "probekit/error.hpp"

namespace probekit {

using nlohmann::json;

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos; pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

// Upper-cases the first code point for ASCII and Latin-1 letters; other
// scripts (CJK, ...) have no case and pass through.
std::string capitalize_first(std::string s) {
  if (s.empty()) return s;
  const auto b0 = static_cast<unsigned char>(s[0]);
  if (b0 < 0x80) {
    s[0] = static_cast<char>(std::toupper(b0));
  } else if (b0 == 0xC3 && s.size() > 1) {
    const auto b1 = static_cast<unsigned char>(s[1]);
    // U+00E0..U+00FE except U+00F7 (division sign) map to U+00C0..U+00DE.
    if (b1 >= 0xA0 && b1 <= 0xBE && b1 != 0xB7) s[1] = static_cast<char>(b1 - 0x20);
  }
  return s;
}

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) throw DataError(where + ": missing field '" + key + "'");
  return *it;
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_string()) throw DataError(where + ": field '" + std::string(key) + "' must be a string");
  return v.get<std::string>();
}

MinimalPair pair_from_fields(auto&& get, const std::string& where) {
  MinimalPair p;
  p.pair_id = get("pair_id");
  p.task_id = get("task_id");
  p.sentence_good = get("sentence_good");
  p.sentence_bad = get("sentence_bad");
  p.language = get("language");
  try {
    p.duality = parse_duality(get("duality"));
    p.level = parse_level(get("level"));
  } catch (const DataError& e) {
    throw DataError(where + ": " + e.what());
  }
  p.phenomenon = get("phenomenon");
  return p;
}

constexpr const char* kPairFields[] = {"pair_id", "task_id",  "sentence_good", "sentence_bad",
                                       "language", "duality", "phenomenon",    "level"};

}  // namespace

std::string_view to_string(Duality d) { return d == Duality::Form ? "form" : "meaning"; }

std::string_view to_string(Level l) {
  switch (l) {
    case Level::Morphology: return "morphology";
    case Level::SemanticsSyntaxInterface: return "semantics_syntax_interface";
    case Level::Syntax: return "syntax";
    case Level::Conceptual: return "conceptual";
    case Level::Unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

std::string_view to_string(RelationKind r) {
  switch (r) {
    case RelationKind::Taxonomy: return "taxonomy";
    case RelationKind::PropertyNorms: return "property_norms";
    case RelationKind::CoOccurrence: return "co_occurrence";
    case RelationKind::Random: return "random";
  }
  return "random";
}

Duality parse_duality(std::string_view s) {
  const auto v = lower(s);
  if (v == "form") return Duality::Form;
  if (v == "meaning") return Duality::Meaning;
  throw DataError("unknown duality '" + std::string(s) + "'");
}

Level parse_level(std::string_view s) {
  const auto v = lower(s);
  if (v == "morphology") return Level::Morphology;
  if (v == "semantics_syntax_interface" || v == "semanticssyntaxinterface") return Level::SemanticsSyntaxInterface;
  if (v == "syntax") return Level::Syntax;
  if (v == "conceptual") return Level::Conceptual;
  if (v == "unlabeled" || v.empty()) return Level::Unlabeled;
  throw DataError("unknown level '" + std::string(s) + "'");
}

RelationKind parse_relation(std::string_view s) {
  const auto v = lower(s);
  if (v == "taxonomy") return RelationKind::Taxonomy;
  if (v == "property_norms" || v == "propertynorms") return RelationKind::PropertyNorms;
  if (v == "co_occurrence" || v == "cooccurrence") return RelationKind::CoOccurrence;
  if (v == "random") return RelationKind::Random;
  throw DataError("unknown relation '" + std::string(s) + "'");
}

PairFormat format_from_path(const std::filesystem::path& path) {
  const auto ext = lower(path.extension().string());
  if (ext == ".csv") return PairFormat::Csv;
  if (ext == ".jsonl" || ext == ".json") return PairFormat::Jsonl;
  throw UsageError("cannot infer pair format from extension of " + path.string());
}

std::vector<std::string> check_pair(const MinimalPair& p) {
  std::vector<std::string> out;
  if (p.pair_id.empty()) out.emplace_back("empty pair_id");
  if (p.sentence_good.empty() || p.sentence_bad.empty()) out.emplace_back("empty sentence");
  if (!p.sentence_good.empty() && p.sentence_good == p.sentence_bad) out.emplace_back("sentence_good equals sentence_bad");
  if (p.duality == Duality::Meaning && p.level != Level::Conceptual) out.emplace_back("meaning pair must have level conceptual");
  if (p.duality == Duality::Form && p.level == Level::Conceptual) out.emplace_back("form pair cannot have level conceptual");
  return out;
}

Dataset parse_pairs(std::string_view text, PairFormat format, std::string_view source) {
  Dataset out;
  std::set<std::string, std::less<>> seen;
  const std::string src(source);

  auto accept = [&](MinimalPair p, std::size_t line) {
    const std::string where = src + ":" + std::to_string(line);
    if (!seen.insert(p.pair_id).second) throw DataError(where + ": duplicate pair_id '" + p.pair_id + "'");
    out.push_back(std::move(p));
  };

  if (format == PairFormat::Jsonl) {
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
      auto end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      std::string_view line = text.substr(start, end - start);
      ++line_no;
      start = end + 1;
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (line.find_first_not_of(" \t") == std::string_view::npos) {
        if (end == text.size()) break;
        continue;
      }
      const std::string where = src + ":" + std::to_string(line_no);
      json obj;
      try {
        obj = json::parse(line);
      } catch (const json::parse_error& e) {
        throw DataError(where + ": parse error: " + e.what());
      }
      if (!obj.is_object()) throw DataError(where + ": expected a JSON object");
      auto get = [&](const char* key) { return require_string(obj, key, where); };
      accept(pair_from_fields(get, where), line_no);
      if (end == text.size()) break;
    }
    return out;
  }

  const auto table = csv::Table::parse(text, source);
  if (table.header().empty()) return out;
  std::vector<std::size_t> cols;
  for (const char* f : kPairFields) cols.push_back(table.column(f));
  for (const auto& row : table.rows()) {
    const std::string where = src + ":" + std::to_string(row.line);
    auto get = [&](const char* key) {
      for (std::size_t i = 0; i < std::size(kPairFields); ++i) {
        if (std::string_view(kPairFields[i]) == key) return row.fields[cols[i]];
      }
      return std::string();
    };
    accept(pair_from_fields(get, where), row.line);
  }
  return out;
}

Dataset load_pairs(const std::filesystem::path& path, PairFormat format) {
  return parse_pairs(read_file(path), format, path.string());
}

void save_pairs(const Dataset& dataset, std::ostream& out, PairFormat format) {
  if (format == PairFormat::Jsonl) {
    for (const auto& p : dataset) {
      nlohmann::ordered_json j;
      j["pair_id"] = p.pair_id;
      j["task_id"] = p.task_id;
      j["sentence_good"] = p.sentence_good;
      j["sentence_bad"] = p.sentence_bad;
      j["language"] = p.language;
      j["duality"] = to_string(p.duality);
      j["phenomenon"] = p.phenomenon;
      j["level"] = to_string(p.level);
      out << j.dump() << '\n';
    }
    return;
  }
  std::vector<std::string> header(std::begin(kPairFields), std::end(kPairFields));
  csv::write_row(out, header);
  for (const auto& p : dataset) {
    std::vector<std::string> row{p.pair_id,  p.task_id,   p.sentence_good, p.sentence_bad, p.language,
                                 std::string(to_string(p.duality)), p.phenomenon, std::string(to_string(p.level))};
    csv::write_row(out, row);
  }
}

void save_pairs(const Dataset& dataset, const std::filesystem::path& path, PairFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  save_pairs(dataset, out, format);
}

std::vector<std::string> task_ids(const Dataset& dataset) {
  std::vector<std::string> ids;
  std::set<std::string, std::less<>> seen;
  for (const auto& p : dataset) {
    if (seen.insert(p.task_id).second) ids.push_back(p.task_id);
  }
  return ids;
}

std::vector<TaskSpec> load_task_specs(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (doc.is_object() && doc.contains("tasks")) doc = doc["tasks"];
  if (!doc.is_array()) throw DataError(path.string() + ": expected an array of task specs");
  std::vector<TaskSpec> specs;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto where = path.string() + "[" + std::to_string(i) + "]";
    const auto& o = doc[i];
    TaskSpec s;
    s.task_id = require_string(o, "task_id", where);
    s.name = o.value("name", s.task_id);
    s.duality = parse_duality(require_string(o, "duality", where));
    s.level = parse_level(o.value("level", std::string("unlabeled")));
    s.language = o.value("language", std::string());
    const auto& n = require(o, "expected_pair_count", where);
    if (!n.is_number_integer()) throw DataError(where + ": expected_pair_count must be an integer");
    const auto count = n.get<long long>();
    s.expected_pair_count = count > 0 ? static_cast<std::size_t>(count) : 0;
    specs.push_back(std::move(s));
  }
  return specs;
}

std::string_view to_string(ValidationIssue::Kind kind) {
  switch (kind) {
    case ValidationIssue::Kind::CountMismatch: return "count_mismatch";
    case ValidationIssue::Kind::InvariantViolation: return "invariant_violation";
    case ValidationIssue::Kind::DuplicatePairId: return "duplicate_pair_id";
    case ValidationIssue::Kind::UnknownTask: return "unknown_task";
    case ValidationIssue::Kind::MetadataMismatch: return "metadata_mismatch";
    case ValidationIssue::Kind::BadSpec: return "bad_spec";
  }
  return "unknown";
}

ValidationReport validate_dataset(const Dataset& dataset, std::span<const TaskSpec> specs) {
  using Kind = ValidationIssue::Kind;
  ValidationReport report;
  report.total_pairs = dataset.size();

  std::map<std::string, const TaskSpec*, std::less<>> by_id;
  for (const auto& s : specs) {
    if (s.expected_pair_count == 0) {
      report.issues.push_back({Kind::BadSpec, s.task_id, "", "expected_pair_count must be positive"});
    }
    if (!by_id.emplace(s.task_id, &s).second) {
      report.issues.push_back({Kind::BadSpec, s.task_id, "", "duplicate task_id in specs"});
    }
  }

  std::set<std::string, std::less<>> seen;
  for (const auto& p : dataset) {
    ++report.task_counts[p.task_id];
    if (!seen.insert(p.pair_id).second) {
      report.issues.push_back({Kind::DuplicatePairId, p.task_id, p.pair_id, "duplicate pair_id"});
    }
    for (auto& msg : check_pair(p)) report.issues.push_back({Kind::InvariantViolation, p.task_id, p.pair_id, msg});
    if (!specs.empty()) {
      auto it = by_id.find(p.task_id);
      if (it == by_id.end()) continue;
      const TaskSpec& s = *it->second;
      if (p.duality != s.duality) {
        report.issues.push_back({Kind::MetadataMismatch, p.task_id, p.pair_id, "duality differs from task spec"});
      } else if (!s.language.empty() && p.language != s.language) {
        report.issues.push_back({Kind::MetadataMismatch, p.task_id, p.pair_id, "language differs from task spec"});
      }
    }
  }

  if (!specs.empty()) {
    for (const auto& [task, count] : report.task_counts) {
      if (!by_id.contains(task)) {
        report.issues.push_back({Kind::UnknownTask, task, "", "task not declared in specs"});
      }
    }
    for (const auto& s : specs) {
      auto it = report.task_counts.find(s.task_id);
      const std::size_t have = it == report.task_counts.end() ? 0 : it->second;
      if (have != s.expected_pair_count) {
        report.issues.push_back({Kind::CountMismatch, s.task_id, "",
                                 "expected " + std::to_string(s.expected_pair_count) + " pairs, found " +
                                     std::to_string(have)});
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------

const Concept* ConceptPropertyTable::find_concept(std::string_view id) const {
  for (const auto& c : concepts) {
    if (c.concept_id == id) return &c;
  }
  return nullptr;
}

const Property* ConceptPropertyTable::find_property(std::string_view id) const {
  for (const auto& p : properties) {
    if (p.property_id == id) return &p;
  }
  return nullptr;
}

bool ConceptPropertyTable::operator==(const ConceptPropertyTable& o) const {
  auto concept_tie = [](const Concept& c) { return std::tie(c.concept_id, c.surface); };
  auto prop_tie = [](const Property& p) { return std::tie(p.property_id, p.templates, p.notes); };
  auto rel_tie = [](const Relation& r) { return std::tie(r.concept_pos, r.concept_neg, r.relation, r.property_id); };
  return std::equal(concepts.begin(), concepts.end(), o.concepts.begin(), o.concepts.end(),
                    [&](auto& a, auto& b) { return concept_tie(a) == concept_tie(b); }) &&
         std::equal(properties.begin(), properties.end(), o.properties.begin(), o.properties.end(),
                    [&](auto& a, auto& b) { return prop_tie(a) == prop_tie(b); }) &&
         std::equal(relations.begin(), relations.end(), o.relations.begin(), o.relations.end(),
                    [&](auto& a, auto& b) { return rel_tie(a) == rel_tie(b); });
}

std::vector<std::string> check_table(const ConceptPropertyTable& table) {
  std::vector<std::string> out;
  std::set<std::string, std::less<>> ids;
  for (const auto& c : table.concepts) {
    if (!ids.insert(c.concept_id).second) out.push_back("duplicate concept_id '" + c.concept_id + "'");
  }
  ids.clear();
  for (const auto& p : table.properties) {
    if (!ids.insert(p.property_id).second) out.push_back("duplicate property_id '" + p.property_id + "'");
    for (const auto& [lang, tmpl] : p.templates) {
      if (count_occurrences(tmpl, kSlotMarker) != 1) {
        out.push_back("property '" + p.property_id + "' (" + lang + "): template must contain exactly one <C>");
      }
    }
  }
  for (std::size_t i = 0; i < table.relations.size(); ++i) {
    const auto& r = table.relations[i];
    const auto where = "relation " + std::to_string(i);
    if (!table.find_concept(r.concept_pos)) out.push_back(where + ": unknown concept '" + r.concept_pos + "'");
    if (!table.find_concept(r.concept_neg)) out.push_back(where + ": unknown concept '" + r.concept_neg + "'");
    if (!table.find_property(r.property_id)) out.push_back(where + ": unknown property '" + r.property_id + "'");
    if (r.concept_pos == r.concept_neg) out.push_back(where + ": concept_pos equals concept_neg");
  }
  return out;
}

ConceptPropertyTable parse_table(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("concept table: ") + e.what());
  }
  ConceptPropertyTable t;
  try {
    for (const auto& c : doc.at("concepts")) {
      t.concepts.push_back({c.at("concept_id").get<std::string>(),
                            c.at("surface").get<std::map<std::string, std::string>>()});
    }
    for (const auto& p : doc.at("properties")) {
      Property prop;
      prop.property_id = p.at("property_id").get<std::string>();
      prop.templates = p.at("template").get<std::map<std::string, std::string>>();
      if (p.contains("notes")) prop.notes = p.at("notes").get<std::map<std::string, std::string>>();
      t.properties.push_back(std::move(prop));
    }
    for (const auto& r : doc.at("relations")) {
      t.relations.push_back({r.at("concept_pos").get<std::string>(), r.at("concept_neg").get<std::string>(),
                             parse_relation(r.at("relation").get<std::string>()),
                             r.at("property_id").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("concept table: ") + e.what());
  }
  if (auto problems = check_table(t); !problems.empty()) throw DataError("concept table: " + problems.front());
  return t;
}

ConceptPropertyTable load_table(const std::filesystem::path& path) {
  try {
    return parse_table(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string dump_table(const ConceptPropertyTable& table) {
  nlohmann::ordered_json doc;
  doc["concepts"] = nlohmann::ordered_json::array();
  for (const auto& c : table.concepts) {
    doc["concepts"].push_back({{"concept_id", c.concept_id}, {"surface", c.surface}});
  }
  doc["properties"] = nlohmann::ordered_json::array();
  for (const auto& p : table.properties) {
    nlohmann::ordered_json o{{"property_id", p.property_id}, {"template", p.templates}};
    if (!p.notes.empty()) o["notes"] = p.notes;
    doc["properties"].push_back(std::move(o));
  }
  doc["relations"] = nlohmann::ordered_json::array();
  for (const auto& r : table.relations) {
    doc["relations"].push_back({{"concept_pos", r.concept_pos},
                                {"concept_neg", r.concept_neg},
                                {"relation", to_string(r.relation)},
                                {"property_id", r.property_id}});
  }
  return doc.dump(2) + "\n";
}

CorrectionOverlay parse_overlay(std::string_view text, PairFormat format) {
  CorrectionOverlay overlay;
  auto kind_of = [](std::string_view s) {
    const auto v = lower(s);
    if (v == "concept") return EntityKind::Concept;
    if (v == "property") return EntityKind::Property;
    throw DataError("overlay: unknown entity_kind '" + std::string(s) + "'");
  };
  if (format == PairFormat::Csv) {
    const auto table = csv::Table::parse(text, "overlay");
    if (table.header().empty()) return overlay;
    const auto kind = table.column("entity_kind"), id = table.column("entity_id"),
               lang = table.column("language"), txt = table.column("corrected_text");
    const bool has_note = table.has_column("note");
    const auto note = has_note ? table.column("note") : 0;
    for (const auto& row : table.rows()) {
      overlay.entries.push_back({kind_of(row.fields[kind]), row.fields[id], row.fields[lang], row.fields[txt],
                                 has_note ? row.fields[note] : std::string()});
    }
    return overlay;
  }
  try {
    const auto doc = json::parse(text);
    for (const auto& e : doc.at("entries")) {
      overlay.entries.push_back({kind_of(e.at("entity_kind").get<std::string>()), e.at("entity_id").get<std::string>(),
                                 e.at("language").get<std::string>(), e.at("corrected_text").get<std::string>(),
                                 e.value("note", std::string())});
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("overlay: ") + e.what());
  }
  return overlay;
}

CorrectionOverlay load_overlay(const std::filesystem::path& path) {
  const auto format = lower(path.extension().string()) == ".csv" ? PairFormat::Csv : PairFormat::Jsonl;
  try {
    return parse_overlay(read_file(path), format);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

ConceptPropertyTable apply_overlay(const ConceptPropertyTable& table, const CorrectionOverlay& overlay) {
  ConceptPropertyTable out = table;
  std::set<std::tuple<EntityKind, std::string, std::string>> keys;
  for (const auto& e : overlay.entries) {
    const bool is_concept = e.entity_kind == EntityKind::Concept;
    const std::string label = std::string(is_concept ? "concept" : "property") + " '" + e.entity_id + "'";
    if (!keys.emplace(e.entity_kind, e.entity_id, e.language).second) {
      throw DataError("overlay: duplicate entry for " + label + " (" + e.language + ")");
    }
    if (e.corrected_text.empty()) throw DataError("overlay: empty corrected_text for " + label);
    if (is_concept) {
      auto it = std::find_if(out.concepts.begin(), out.concepts.end(),
                             [&](const Concept& c) { return c.concept_id == e.entity_id; });
      if (it == out.concepts.end()) throw DataError("overlay: dangling " + label);
      it->surface[e.language] = e.corrected_text;
    } else {
      auto it = std::find_if(out.properties.begin(), out.properties.end(),
                             [&](const Property& p) { return p.property_id == e.entity_id; });
      if (it == out.properties.end()) throw DataError("overlay: dangling " + label);
      if (count_occurrences(e.corrected_text, kSlotMarker) != 1) {
        throw DataError("overlay: corrected template for " + label + " must contain exactly one <C>");
      }
      it->templates[e.language] = e.corrected_text;
    }
  }
  return out;
}

std::string instantiate_template(std::string_view tmpl, std::string_view concept_text) {
  if (count_occurrences(tmpl, kSlotMarker) != 1) {
    throw DataError("malformed template '" + std::string(tmpl) + "': expected exactly one <C>");
  }
  const auto pos = tmpl.find(kSlotMarker);
  std::string s;
  s.reserve(tmpl.size() + concept_text.size());
  s.append(tmpl.substr(0, pos)).append(concept_text).append(tmpl.substr(pos + kSlotMarker.size()));
  return capitalize_first(std::move(s));
}

CompsBuild build_comps_annotated(const ConceptPropertyTable& table, std::string_view language) {
  if (auto problems = check_table(table); !problems.empty()) throw DataError("concept table: " + problems.front());
  const std::string lang(language);
  auto surface = [&](const std::string& id) -> const std::string& {
    const Concept* c = table.find_concept(id);
    auto it = c->surface.find(lang);
    if (it == c->surface.end() || it->second.empty()) {
      throw DataError("concept '" + id + "' has no surface form for language '" + lang + "'");
    }
    return it->second;
  };

  CompsBuild build;
  build.pairs.reserve(table.relations.size());
  build.annotations.reserve(table.relations.size());
  std::size_t n = 0;
  for (const auto& r : table.relations) {
    const Property* prop = table.find_property(r.property_id);
    auto it = prop->templates.find(lang);
    if (it == prop->templates.end()) {
      throw DataError("property '" + r.property_id + "' has no template for language '" + lang + "'");
    }
    const auto& good = surface(r.concept_pos);
    const auto& bad = surface(r.concept_neg);

    MinimalPair p;
    p.pair_id = "comps_" + lang + "_" + std::to_string(++n);
    p.task_id = "comps_" + lang + "_" + std::string(to_string(r.relation));
    p.sentence_good = instantiate_template(it->second, good);
    p.sentence_bad = instantiate_template(it->second, bad);
    p.language = lang;
    p.duality = Duality::Meaning;
    p.phenomenon = std::string(to_string(r.relation));
    p.level = Level::Conceptual;
    build.annotations.push_back({p.pair_id, good, bad, it->second});
    build.pairs.push_back(std::move(p));
  }
  return build;
}

Dataset build_comps(const ConceptPropertyTable& table, std::string_view language) {
  return build_comps_annotated(table, language).pairs;
}

std::vector<ConceptAnnotation> load_annotations(const std::filesystem::path& path) {
  std::vector<ConceptAnnotation> out;
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = path.string() + ":" + std::to_string(line_no);
    try {
      const auto o = json::parse(line);
      out.push_back({require_string(o, "pair_id", where), require_string(o, "concept_good", where),
                     require_string(o, "concept_bad", where), require_string(o, "property_template", where)});
    } catch (const json::parse_error& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return out;
}

void save_annotations(const std::vector<ConceptAnnotation>& annotations, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& a : annotations) {
    nlohmann::ordered_json j;
    j["pair_id"] = a.pair_id;
    j["concept_good"] = a.concept_good;
    j["concept_bad"] = a.concept_bad;
    j["property_template"] = a.property_template;
    out << j.dump() << '\n';
  }
}

}  // namespace probekit
