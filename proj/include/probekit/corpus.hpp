#pragma once

// Minimal-pair datasets: data model, loaders, validation and the
// concept/property builder used for the conceptual (meaning) datasets.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace probekit {

enum class Duality { Form, Meaning };
enum class Level { Morphology, SemanticsSyntaxInterface, Syntax, Conceptual, Unlabeled };
enum class RelationKind { Taxonomy, PropertyNorms, CoOccurrence, Random };
enum class PairFormat { Jsonl, Csv };

std::string_view to_string(Duality d);
std::string_view to_string(Level l);
std::string_view to_string(RelationKind r);
Duality parse_duality(std::string_view s);
Level parse_level(std::string_view s);
RelationKind parse_relation(std::string_view s);
PairFormat format_from_path(const std::filesystem::path& path);

struct MinimalPair {
  std::string pair_id;
  std::string task_id;
  std::string sentence_good;
  std::string sentence_bad;
  std::string language;  // ISO-639-1
  Duality duality = Duality::Form;
  std::string phenomenon;
  Level level = Level::Unlabeled;

  bool operator==(const MinimalPair&) const = default;
};

using Dataset = std::vector<MinimalPair>;

/// Invariant violations of a single pair (empty when the pair is well formed).
std::vector<std::string> check_pair(const MinimalPair& pair);

/// Loads a pair file. Records keep file order. Throws DataError with the
/// line number on parse errors, missing fields, bad enum values and
/// duplicate pair ids. Invariant checks are left to validate_dataset.
Dataset load_pairs(const std::filesystem::path& path, PairFormat format);
Dataset parse_pairs(std::string_view text, PairFormat format, std::string_view source = "<pairs>");
void save_pairs(const Dataset& dataset, std::ostream& out, PairFormat format);
void save_pairs(const Dataset& dataset, const std::filesystem::path& path, PairFormat format);

/// Task ids in order of first appearance.
std::vector<std::string> task_ids(const Dataset& dataset);

struct TaskSpec {
  std::string task_id;
  std::string name;
  Duality duality = Duality::Form;
  Level level = Level::Unlabeled;
  std::string language;
  std::size_t expected_pair_count = 0;
};

/// JSON array of TaskSpec objects.
std::vector<TaskSpec> load_task_specs(const std::filesystem::path& path);

struct ValidationIssue {
  enum class Kind { CountMismatch, InvariantViolation, DuplicatePairId, UnknownTask, MetadataMismatch, BadSpec };
  Kind kind;
  std::string task_id;
  std::string pair_id;
  std::string message;
};

std::string_view to_string(ValidationIssue::Kind kind);

struct ValidationReport {
  std::map<std::string, std::size_t> task_counts;
  std::size_t total_pairs = 0;
  std::vector<ValidationIssue> issues;

  bool valid() const { return issues.empty(); }
};

/// Never throws on bad data; every problem becomes an issue in the report.
/// With an empty spec list only per-pair invariants and id uniqueness are checked.
ValidationReport validate_dataset(const Dataset& dataset, std::span<const TaskSpec> specs);

// ---------------------------------------------------------------------------
// Concept/property tables

inline constexpr std::string_view kSlotMarker = "<C>";

struct Concept {
  std::string concept_id;
  std::map<std::string, std::string> surface;  // language -> surface form
};

struct Property {
  std::string property_id;
  std::map<std::string, std::string> templates;  // language -> template with one <C>
  std::map<std::string, std::string> notes;      // language -> agreement notes
};

struct Relation {
  std::string concept_pos;
  std::string concept_neg;
  RelationKind relation = RelationKind::Taxonomy;
  std::string property_id;
};

struct ConceptPropertyTable {
  std::vector<Concept> concepts;
  std::vector<Property> properties;
  std::vector<Relation> relations;

  const Concept* find_concept(std::string_view id) const;
  const Property* find_property(std::string_view id) const;
  bool operator==(const ConceptPropertyTable&) const;
};

/// Structural problems (dangling references, pos == neg, bad templates, duplicate ids).
std::vector<std::string> check_table(const ConceptPropertyTable& table);

ConceptPropertyTable load_table(const std::filesystem::path& path);
ConceptPropertyTable parse_table(std::string_view json_text);
std::string dump_table(const ConceptPropertyTable& table);

enum class EntityKind { Concept, Property };

struct Correction {
  EntityKind entity_kind = EntityKind::Concept;
  std::string entity_id;
  std::string language;
  std::string corrected_text;
  std::string note;
};

struct CorrectionOverlay {
  std::vector<Correction> entries;
};

/// Overlays are JSON ({"entries": [...]}) or CSV with the same column names.
CorrectionOverlay load_overlay(const std::filesystem::path& path);
CorrectionOverlay parse_overlay(std::string_view text, PairFormat format);

/// Replaces surface forms/templates for the entry's language only.
/// Throws DataError for dangling entity ids, duplicate keys, empty text
/// or a corrected template without exactly one slot marker.
ConceptPropertyTable apply_overlay(const ConceptPropertyTable& table, const CorrectionOverlay& overlay);

/// Per-pair concept metadata needed by the meaning metalinguistic prompt.
struct ConceptAnnotation {
  std::string pair_id;
  std::string concept_good;
  std::string concept_bad;
  std::string property_template;  // template text for the pair's language

  bool operator==(const ConceptAnnotation&) const = default;
};

struct CompsBuild {
  Dataset pairs;
  std::vector<ConceptAnnotation> annotations;
};

/// One pair per relation, in relation order. task_id is "comps_<lang>_<relation>",
/// pair_id "comps_<lang>_<n>" (1-based).
Dataset build_comps(const ConceptPropertyTable& table, std::string_view language);
CompsBuild build_comps_annotated(const ConceptPropertyTable& table, std::string_view language);

/// Replaces the single slot marker and upper-cases the first character.
std::string instantiate_template(std::string_view tmpl, std::string_view concept_text);

std::vector<ConceptAnnotation> load_annotations(const std::filesystem::path& path);
void save_annotations(const std::vector<ConceptAnnotation>& annotations, const std::filesystem::path& path);

}  // namespace probekit
