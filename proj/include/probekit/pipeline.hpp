#pragma once

// Subcommand implementations. Each command reads a RunConfig, writes under
// config.output_dir and records the files it produced in
// <output_dir>/manifest.json. Errors are thrown as UsageError (bad config),
// DataError (bad or missing inputs) or NumericError.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "probekit/run_config.hpp"

namespace probekit {

inline constexpr const char* kToolVersion = PROBEKIT_VERSION;

/// Loads every configured dataset, rejecting pair ids repeated across files
/// and pairs that break the MinimalPair invariants.
Dataset load_run_datasets(const RunConfig& config);

/// Grouping for each task of the dataset, in task order: the configured
/// entry when present, otherwise duality/level/language of the task's first
/// pair with the level name as group.
std::vector<std::pair<std::string, TaskGroup>> resolve_grouping(const RunConfig& config, const Dataset& dataset);

/// Hash of every setting that affects outputs (no paths, no worker count).
std::string run_config_hash(const RunConfig& config);

/// Checks datasets against their specs and every store/sidecar against the
/// datasets. Writes validation/report.json and returns true when clean.
bool cmd_validate(const RunConfig& config, std::ostream& log);

struct BuildCompsOptions {
  std::filesystem::path table;
  std::optional<std::filesystem::path> overlay;
  std::string language = "en";
  std::filesystem::path out_pairs;
  std::optional<std::filesystem::path> out_annotations;
};

/// Returns the number of pairs written.
std::size_t cmd_build_comps(const BuildCompsOptions& options, std::ostream& log);

struct FixtureOptions {
  std::filesystem::path out_dir;
  std::uint64_t seed = 20240917;
  std::size_t n_pairs = 500;  // per task
  std::size_t n_form_tasks = 4;
  std::size_t n_meaning_tasks = 2;
  std::uint32_t n_layers = 12;
  std::uint32_t hidden_dim = 64;
  std::uint32_t signal_layer = 4;
  double separation = 3.0;
  double direct_accuracy = 0.8;
  double meta_accuracy = 0.6;
  std::vector<std::string> models = {"base", "chat"};
  unsigned workers = 1;  // written into run.toml
};

/// Writes a self-contained miniature world: pairs, concept table and
/// annotations, task specs, grouping, one store per model with a planted
/// signal, token and continuation dumps with the requested accuracies, and
/// run.toml pointing at all of it. Tasks alternate between "en" and "de".
void cmd_fixtures(const FixtureOptions& options, std::ostream& log);

/// Probes every (task, layer) for every model. Skips rows already present
/// with the same config hash. Inputs are validated before any job starts.
void cmd_probe(const RunConfig& config, std::ostream& log);

void cmd_analyze(const RunConfig& config, std::ostream& log);

void cmd_psycholing(const RunConfig& config, std::ostream& log, bool emit_prompts);

/// Collects existing tables into report.json and report.md.
void cmd_report(const RunConfig& config, std::ostream& log);

}  // namespace probekit
