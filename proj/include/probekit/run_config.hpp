#pragma once

// Run configuration (TOML). Relative paths resolve against the directory of
// the config file. Scalar settings can be overridden with environment
// variables named PROBEKIT_<SECTION>_<KEY>, e.g. PROBEKIT_RUN_SEED=7 or
// PROBEKIT_PROBE_L2_LAMBDA=0.5.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "probekit/corpus.hpp"
#include "probekit/probe.hpp"
#include "probekit/psycholing.hpp"

namespace probekit {

struct DatasetEntry {
  std::filesystem::path path;
  std::optional<std::filesystem::path> concepts;  // ConceptAnnotation JSONL for meaning prompts
  std::optional<std::filesystem::path> specs;     // TaskSpec JSON for `validate`
};

struct ModelEntry {
  std::string name;
  std::filesystem::path store;
  std::optional<std::filesystem::path> token_scores;
  std::optional<std::filesystem::path> continuation_scores;
  std::string prompt_wrapper = "{prompt}";
};

struct TaskGroup {
  Duality duality = Duality::Form;
  Level level = Level::Unlabeled;
  std::string group;
  std::string language;
};

enum class TTestKind { Welch, Paired };
enum class ScatterStatistic { LayerMean, LastLayer, Peak };

std::string_view to_string(TTestKind k);
std::string_view to_string(ScatterStatistic s);

struct ModelComparison {
  std::string a;  // e.g. base
  std::string b;  // e.g. chat; difference curves are b - a
};

struct AnalysisConfig {
  double threshold_ratio = 0.95;
  TTestKind ttest = TTestKind::Welch;
  ScatterStatistic scatter_statistic = ScatterStatistic::LayerMean;
  std::vector<ModelComparison> compare;
};

struct PsycholingConfig {
  bool order_balancing = true;
  bool direct = true;
  bool meta = true;
};

struct RunConfig {
  std::filesystem::path config_path;
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::vector<DatasetEntry> datasets;
  std::vector<ModelEntry> models;
  ProbeConfig probe;
  AnalysisConfig analysis;
  PsycholingConfig psycholing;
  std::map<std::string, TaskGroup> grouping;  // task_id -> grouping

  const ModelEntry& model(std::string_view name) const;  // throws UsageError

  /// Canonical text of every setting that changes probe results.
  std::string probe_settings() const;
};

/// Throws UsageError on syntax errors, unknown enum values, bad overrides,
/// unknown keys in known sections and missing required keys. Does not check
/// that paths exist.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(std::string_view toml_text, const std::filesystem::path& base_dir,
                           const std::map<std::string, std::string>& env = {});

/// Grouping file: one [tasks.<task_id>] table per task with duality, level,
/// group and language keys.
std::map<std::string, TaskGroup> load_grouping(const std::filesystem::path& path);
std::map<std::string, TaskGroup> parse_grouping(std::string_view toml_text);

/// The PROBEKIT_* variables of the current process.
std::map<std::string, std::string> probekit_environment();

/// 64-bit FNV-1a, printed as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view text);

}  // namespace probekit
