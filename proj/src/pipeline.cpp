#include "probekit/pipeline.hpp"

#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pipeline_util.hpp"
#include "probekit/activation_store.hpp"
#include "probekit/csv.hpp"
#include "probekit/error.hpp"

namespace probekit {

using detail::fmt;

namespace {

std::string display_path(const RunConfig& config, const std::filesystem::path& p) {
  if (config.config_path.empty()) return p.generic_string();
  const auto base = config.config_path.parent_path().empty() ? std::filesystem::path(".") : config.config_path.parent_path();
  return p.lexically_relative(base.lexically_normal()).generic_string();
}

nlohmann::ordered_json issue_json(const ValidationIssue& i) {
  return {{"kind", to_string(i.kind)}, {"task_id", i.task_id}, {"pair_id", i.pair_id}, {"message", i.message}};
}

}  // namespace

Dataset load_run_datasets(const RunConfig& config) {
  if (config.datasets.empty()) throw UsageError("the config lists no datasets");
  Dataset all;
  std::map<std::string, std::string> origin;
  for (const auto& d : config.datasets) {
    if (!std::filesystem::exists(d.path)) throw DataError("dataset not found: " + d.path.string());
    auto pairs = load_pairs(d.path, format_from_path(d.path));
    for (auto& p : pairs) {
      auto [it, fresh] = origin.emplace(p.pair_id, d.path.string());
      if (!fresh) throw DataError("pair_id '" + p.pair_id + "' appears in both " + it->second + " and " + d.path.string());
      all.push_back(std::move(p));
    }
  }
  const auto report = validate_dataset(all, {});
  if (!report.valid()) {
    const auto& i = report.issues.front();
    throw DataError("invalid dataset (" + std::to_string(report.issues.size()) + " issues), first: " + i.pair_id + ": " +
                    i.message);
  }
  return all;
}

std::vector<std::pair<std::string, TaskGroup>> resolve_grouping(const RunConfig& config, const Dataset& dataset) {
  std::vector<std::pair<std::string, TaskGroup>> out;
  std::set<std::string> seen;
  for (const auto& p : dataset) {
    if (!seen.insert(p.task_id).second) continue;
    if (auto it = config.grouping.find(p.task_id); it != config.grouping.end()) {
      out.emplace_back(p.task_id, it->second);
    } else {
      out.emplace_back(p.task_id, TaskGroup{p.duality, p.level, std::string(to_string(p.level)), p.language});
    }
  }
  return out;
}

std::string run_config_hash(const RunConfig& config) {
  std::ostringstream s;
  s << config.probe_settings();
  s << ";threshold_ratio=" << fmt(config.analysis.threshold_ratio) << ";ttest=" << to_string(config.analysis.ttest)
    << ";scatter=" << to_string(config.analysis.scatter_statistic);
  for (const auto& c : config.analysis.compare) s << ";compare=" << c.a << '>' << c.b;
  s << ";order_balancing=" << config.psycholing.order_balancing << ";direct=" << config.psycholing.direct
    << ";meta=" << config.psycholing.meta;
  for (const auto& m : config.models) s << ";model=" << m.name << '|' << m.prompt_wrapper;
  for (const auto& d : config.datasets) s << ";dataset=" << d.path.filename().generic_string();
  for (const auto& [task, g] : config.grouping)
    s << ";task=" << task << '|' << to_string(g.duality) << '|' << to_string(g.level) << '|' << g.group << '|'
      << g.language;
  return fnv1a_hex(s.str());
}

bool cmd_validate(const RunConfig& config, std::ostream& log) {
  if (config.datasets.empty()) throw UsageError("the config lists no datasets");
  bool valid = true;
  nlohmann::ordered_json doc;
  doc["config_hash"] = run_config_hash(config);
  doc["datasets"] = nlohmann::ordered_json::array();

  Dataset all;
  std::set<std::string> ids;
  for (const auto& d : config.datasets) {
    nlohmann::ordered_json entry;
    entry["path"] = display_path(config, d.path);
    if (!std::filesystem::exists(d.path)) throw DataError("dataset not found: " + d.path.string());
    auto pairs = load_pairs(d.path, format_from_path(d.path));
    std::vector<TaskSpec> specs;
    if (d.specs) specs = load_task_specs(*d.specs);
    const auto report = validate_dataset(pairs, specs);
    entry["total_pairs"] = report.total_pairs;
    entry["task_counts"] = report.task_counts;
    entry["issues"] = nlohmann::ordered_json::array();
    for (const auto& i : report.issues) entry["issues"].push_back(issue_json(i));
    for (const auto& p : pairs) {
      if (!ids.insert(p.pair_id).second) {
        entry["issues"].push_back(issue_json({ValidationIssue::Kind::DuplicatePairId, p.task_id, p.pair_id,
                                              "pair_id also appears in another dataset"}));
      }
    }
    const bool ok = entry["issues"].empty();
    valid = valid && ok;
    log << (ok ? "ok   " : "FAIL ") << entry["path"].get<std::string>() << ": " << report.total_pairs << " pairs, "
        << report.task_counts.size() << " tasks, " << entry["issues"].size() << " issues\n";
    for (const auto& i : entry["issues"]) log << "     " << i["kind"].get<std::string>() << " " << i["message"].get<std::string>() << "\n";
    all.insert(all.end(), pairs.begin(), pairs.end());
    doc["datasets"].push_back(std::move(entry));
  }

  doc["models"] = nlohmann::ordered_json::array();
  for (const auto& m : config.models) {
    nlohmann::ordered_json entry;
    entry["name"] = m.name;
    const auto integrity = integrity_check(m.store);
    nlohmann::ordered_json store{{"path", display_path(config, m.store)}, {"ok", integrity.ok}, {"message", integrity.message}};
    std::size_t missing = 0;
    if (integrity.ok) {
      const auto s = ActivationStore::open(m.store);
      for (const auto& p : all)
        for (Role r : {Role::Good, Role::Bad})
          if (!s.find({p.pair_id, r})) ++missing;
      store["n_layers"] = integrity.n_layers;
      store["hidden_dim"] = integrity.hidden_dim;
      store["n_sentences"] = integrity.n_sentences;
      store["missing_sentences"] = missing;
    }
    const bool store_ok = integrity.ok && missing == 0;
    valid = valid && store_ok;
    log << (store_ok ? "ok   " : "FAIL ") << m.name << " store: "
        << (integrity.ok ? std::to_string(missing) + " dataset sentences missing" : integrity.message) << "\n";
    entry["store"] = std::move(store);

    if (m.token_scores) {
      nlohmann::ordered_json ts{{"path", display_path(config, *m.token_scores)}};
      try {
        const auto file = load_token_scores(*m.token_scores);
        std::set<SentenceId> have;
        for (const auto& r : file.records) have.insert(r.sentence);
        std::size_t absent = 0;
        for (const auto& p : all)
          for (Role r : {Role::Good, Role::Bad}) absent += have.count({p.pair_id, r}) == 0;
        ts["ok"] = absent == 0;
        ts["missing_sentences"] = absent;
        ts["bos_convention"] = file.bos_convention;
      } catch (const DataError& e) {
        ts["ok"] = false;
        ts["message"] = e.what();
      }
      valid = valid && ts["ok"].get<bool>();
      log << (ts["ok"].get<bool>() ? "ok   " : "FAIL ") << m.name << " token scores\n";
      entry["token_scores"] = std::move(ts);
    }
    if (m.continuation_scores) {
      nlohmann::ordered_json cs{{"path", display_path(config, *m.continuation_scores)}};
      try {
        cs["records"] = load_continuation_scores(*m.continuation_scores).records.size();
        cs["ok"] = true;
      } catch (const DataError& e) {
        cs["ok"] = false;
        cs["message"] = e.what();
      }
      valid = valid && cs["ok"].get<bool>();
      log << (cs["ok"].get<bool>() ? "ok   " : "FAIL ") << m.name << " continuation scores\n";
      entry["continuation_scores"] = std::move(cs);
    }
    doc["models"].push_back(std::move(entry));
  }
  doc["valid"] = valid;
  const auto path = config.output_dir / "validation" / "report.json";
  detail::write_file(path, doc.dump(2) + "\n");
  detail::update_manifest(config, {path});
  return valid;
}

std::size_t cmd_build_comps(const BuildCompsOptions& options, std::ostream& log) {
  auto table = load_table(options.table);
  if (options.overlay) {
    const auto overlay = load_overlay(*options.overlay);
    table = apply_overlay(table, overlay);
    log << "applied " << overlay.entries.size() << " corrections\n";
  }
  const auto build = build_comps_annotated(table, options.language);
  if (options.out_pairs.has_parent_path()) std::filesystem::create_directories(options.out_pairs.parent_path());
  save_pairs(build.pairs, options.out_pairs, format_from_path(options.out_pairs));
  if (options.out_annotations) save_annotations(build.annotations, *options.out_annotations);
  log << "wrote " << build.pairs.size() << " pairs to " << options.out_pairs.string() << "\n";
  return build.pairs.size();
}

void cmd_report(const RunConfig& config, std::ostream& log) {
  const auto out = config.output_dir;
  nlohmann::ordered_json doc;
  doc["provenance"] = {{"tool", "probekit"},
                       {"version", kToolVersion},
                       {"config_hash", run_config_hash(config)},
                       {"seed", config.seed},
                       {"probe_settings", config.probe_settings()}};

  // Every table the other commands may have produced, embedded row by row.
  const std::vector<std::string> tables = {
      "analysis/curves.csv",          "analysis/saturation.csv",       "analysis/saturation_by_duality.csv",
      "analysis/differences.csv",     "analysis/ttests_layer.csv",     "analysis/stouffer.csv",
      "analysis/ttests_saturation.csv", "analysis/scatter.csv",        "analysis/fit.csv",
      "psycholing/accuracy.csv",      "psycholing/accuracy_by_duality.csv", "psycholing/comparison.csv"};
  std::vector<std::string> probe_tables;
  for (const auto& m : config.models) probe_tables.push_back("probe/" + m.name + ".csv");

  std::ostringstream md;
  md << "# probekit report\n\n";
  md << "- version: " << kToolVersion << "\n- config hash: " << run_config_hash(config) << "\n- seed: " << config.seed
     << "\n- probe: " << config.probe_settings() << "\n\n";

  doc["tables"] = nlohmann::ordered_json::object();
  std::size_t found = 0;
  auto embed = [&](const std::string& rel) {
    const auto path = out / rel;
    if (!std::filesystem::exists(path)) return;
    ++found;
    const auto t = csv::Table::parse(detail::read_text(path), path.string());
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& r : t.rows()) {
      nlohmann::ordered_json row;
      for (std::size_t i = 0; i < t.header().size() && i < r.fields.size(); ++i) row[t.header()[i]] = r.fields[i];
      rows.push_back(std::move(row));
    }
    md << "- `" << rel << "`: " << t.rows().size() << " rows\n";
    doc["tables"][rel] = std::move(rows);
  };
  md << "## Tables\n\n";
  for (const auto& rel : probe_tables) embed(rel);
  for (const auto& rel : tables) embed(rel);
  if (found == 0) throw DataError("no tables under " + out.string() + "; run probe/analyze/psycholing first");

  // Short human summary from the saturation table, when present.
  if (doc["tables"].contains("analysis/saturation.csv")) {
    md << "\n## Saturation and maximum layers\n\n| model | curve | saturation | maximum | peak |\n|---|---|---|---|---|\n";
    for (const auto& r : doc["tables"]["analysis/saturation.csv"]) {
      if (r.value("kind", "") != "duality") continue;
      md << "| " << r.value("model", "") << " | " << r.value("curve_id", "") << " | " << r.value("saturation_layer", "")
         << " | " << r.value("maximum_layer", "") << " | " << r.value("peak_value", "") << " |\n";
    }
  }
  if (doc["tables"].contains("psycholing/comparison.csv")) {
    md << "\n## Direct / meta / neuro\n\n| model | task | direct | meta | neuro |\n|---|---|---|---|---|\n";
    for (const auto& r : doc["tables"]["psycholing/comparison.csv"])
      md << "| " << r.value("model", "") << " | " << r.value("task_id", "") << " | " << r.value("direct", "") << " | "
         << r.value("meta", "") << " | " << r.value("neuro", "") << " |\n";
  }

  const auto json_path = out / "report.json", md_path = out / "report.md";
  detail::write_file(json_path, doc.dump(2) + "\n");
  detail::write_file(md_path, md.str());
  detail::update_manifest(config, {json_path, md_path});
  log << "report: " << found << " tables -> " << json_path.string() << "\n";
}

}  // namespace probekit
