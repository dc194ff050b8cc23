#include "pipeline_util.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <zlib.h>

#include "json.hpp"
#include "probekit/csv.hpp"
#include "probekit/error.hpp"
#include "probekit/pipeline.hpp"

namespace probekit::detail {

std::string fmt(double v) {
  if (v == 0.0) return "0";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Prefer the shortest of %.15g/%.16g/%.17g that survives the round trip.
  for (int prec : {15, 16}) {
    char shorter[40];
    std::snprintf(shorter, sizeof shorter, "%.*g", prec, v);
    if (std::strtod(shorter, nullptr) == v) return shorter;
  }
  return buf;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

CsvBuilder::CsvBuilder(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvBuilder::add(std::vector<std::string> row) {
  if (row.size() != header_.size()) throw std::logic_error("csv row width does not match header");
  rows_.push_back(std::move(row));
}

std::string CsvBuilder::str() const {
  std::ostringstream out;
  csv::write_row(out, header_);
  for (const auto& r : rows_) csv::write_row(out, r);
  return out.str();
}

void update_manifest(const RunConfig& config, const std::vector<std::filesystem::path>& written) {
  const auto path = config.output_dir / "manifest.json";
  nlohmann::ordered_json files = nlohmann::ordered_json::object();
  if (std::filesystem::exists(path)) {
    try {
      auto old = nlohmann::json::parse(read_text(path));
      if (old.contains("files") && old["files"].is_object())
        for (auto& [k, v] : old["files"].items()) files[k] = v;
    } catch (const nlohmann::json::exception&) {
      // unreadable manifest: start over
    }
  }
  for (const auto& p : written) {
    const auto content = read_text(p);
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(content.data()), static_cast<uInt>(content.size()));
    char hex[9];
    std::snprintf(hex, sizeof hex, "%08lx", static_cast<unsigned long>(crc));
    const auto rel = std::filesystem::relative(p, config.output_dir).generic_string();
    files[rel] = {{"crc32", hex}, {"bytes", content.size()}};
  }
  // Sorted keys so the manifest does not depend on command order.
  nlohmann::json sorted_files = files;
  nlohmann::ordered_json doc;
  doc["tool"] = "probekit";
  doc["version"] = kToolVersion;
  doc["config_hash"] = run_config_hash(config);
  doc["seed"] = config.seed;
  doc["files"] = sorted_files;
  write_file(path, doc.dump(2) + "\n");
}

std::filesystem::path probe_table_path(const RunConfig& config, const std::string& model, std::string_view ext) {
  return config.output_dir / "probe" / (model + std::string(ext));
}

std::string join_numbers(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ';';
    out += fmt(xs[i]);
  }
  return out;
}

double parse_double(std::string_view s, std::string_view where) {
  const std::string text(s);
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size())
    throw DataError(std::string(where) + ": not a number: '" + text + "'");
  return v;
}

long long parse_int(std::string_view s, std::string_view where) {
  const std::string text(s);
  char* end = nullptr;
  const long long v = std::strtoll(text.c_str(), &end, 10);
  if (text.empty() || end != text.c_str() + text.size())
    throw DataError(std::string(where) + ": not an integer: '" + text + "'");
  return v;
}

std::vector<double> split_numbers(std::string_view s, std::string_view where) {
  std::vector<double> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto end = s.find(';', start);
    out.push_back(parse_double(s.substr(start, end - start), where));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

std::vector<ProbeTableRow> read_probe_table(const std::filesystem::path& path) {
  const auto table = csv::Table::parse(read_text(path), path.string());
  const auto c_task = table.column("task_id"), c_layer = table.column("layer"), c_raw = table.column("raw_f1_mean"),
             c_raw_std = table.column("raw_f1_std"), c_base = table.column("baseline_f1"),
             c_base_std = table.column("baseline_f1_std"), c_norm = table.column("normalized_perf"),
             c_deg = table.column("degenerate"), c_n = table.column("n_pairs"), c_seed = table.column("seed"),
             c_hash = table.column("config_hash"), c_raw_folds = table.column("raw_f1_folds"),
             c_base_folds = table.column("baseline_f1_folds");
  std::vector<ProbeTableRow> rows;
  for (const auto& r : table.rows()) {
    if (r.fields.size() != table.header().size())
      throw DataError(path.string() + ":" + std::to_string(r.line) + ": wrong number of fields");
    const auto where = path.string() + ":" + std::to_string(r.line);
    ProbeTableRow row;
    auto& s = row.score;
    s.task_id = r.fields[c_task];
    const auto layer = parse_int(r.fields[c_layer], where);
    if (layer < 0) throw DataError(where + ": negative layer");
    s.layer = static_cast<std::uint32_t>(layer);
    s.raw_f1_mean = parse_double(r.fields[c_raw], where);
    s.raw_f1_std = parse_double(r.fields[c_raw_std], where);
    s.baseline_f1 = parse_double(r.fields[c_base], where);
    s.baseline_f1_std = parse_double(r.fields[c_base_std], where);
    s.normalized_perf = parse_double(r.fields[c_norm], where);
    s.degenerate = r.fields[c_deg] == "true";
    s.n_pairs = static_cast<std::size_t>(parse_int(r.fields[c_n], where));
    {
      const auto& text = r.fields[c_seed];
      char* end = nullptr;
      s.seed = std::strtoull(text.c_str(), &end, 10);
      if (text.empty() || end != text.c_str() + text.size()) throw DataError(where + ": bad seed '" + text + "'");
    }
    row.config_hash = r.fields[c_hash];
    s.raw_fold_f1 = split_numbers(r.fields[c_raw_folds], where);
    s.baseline_fold_f1 = split_numbers(r.fields[c_base_folds], where);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<double> fold_normalized(const ProbeScore& s) {
  std::vector<double> out;
  out.reserve(s.raw_fold_f1.size());
  for (double raw : s.raw_fold_f1) out.push_back(normalized_perf(raw, s.baseline_f1).value);
  return out;
}

}  // namespace probekit::detail
