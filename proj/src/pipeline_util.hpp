#pragma once

// Helpers shared by the command implementations. Not installed.

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include "probekit/probe.hpp"
#include "probekit/run_config.hpp"

namespace probekit::detail {

/// Shortest text that reads back to the same double ("%.17g", -0 printed as 0).
std::string fmt(double v);

std::string read_text(const std::filesystem::path& path);

/// Creates parent directories and replaces the file via a temporary + rename.
void write_file(const std::filesystem::path& path, std::string_view content);

class CsvBuilder {
 public:
  explicit CsvBuilder(std::vector<std::string> header);
  void add(std::vector<std::string> row);
  std::string str() const;
  std::size_t size() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Records CRC-32 and size of each written file (paths relative to the output
/// directory) in <output_dir>/manifest.json, keeping entries of other commands.
void update_manifest(const RunConfig& config, const std::vector<std::filesystem::path>& written);

struct ProbeTableRow {
  ProbeScore score;
  std::string config_hash;
};

std::filesystem::path probe_table_path(const RunConfig& config, const std::string& model, std::string_view ext);

std::vector<ProbeTableRow> read_probe_table(const std::filesystem::path& path);

/// Fold F1 lists are stored as ';'-separated numbers.
std::string join_numbers(const std::vector<double>& xs);
std::vector<double> split_numbers(std::string_view s, std::string_view where);

double parse_double(std::string_view s, std::string_view where);
long long parse_int(std::string_view s, std::string_view where);

/// Per-fold normalized scores against the mean baseline; zeros when degenerate.
std::vector<double> fold_normalized(const ProbeScore& s);

}  // namespace probekit::detail
