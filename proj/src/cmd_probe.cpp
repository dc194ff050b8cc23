#include <atomic>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <thread>

#include "json.hpp"
#include "pipeline_util.hpp"
#include "probekit/activation_store.hpp"
#include "probekit/error.hpp"
#include "probekit/pipeline.hpp"

namespace probekit {

using detail::fmt;

namespace {

struct PreparedModel {
  const ModelEntry* entry = nullptr;
  ActivationStore store;
  std::string config_hash;
};

std::string dataset_digest(const Dataset& dataset) {
  std::string s;
  for (const auto& p : dataset) s.append(p.task_id).append(1, '\x1f').append(p.pair_id).append(1, '\x1e');
  return fnv1a_hex(s);
}

std::string probe_csv(const std::vector<detail::ProbeTableRow>& rows) {
  detail::CsvBuilder csv({"task_id", "layer", "raw_f1_mean", "raw_f1_std", "baseline_f1", "baseline_f1_std",
                          "normalized_perf", "degenerate", "n_pairs", "seed", "config_hash", "raw_f1_folds",
                          "baseline_f1_folds"});
  for (const auto& [s, hash] : rows) {
    csv.add({s.task_id, std::to_string(s.layer), fmt(s.raw_f1_mean), fmt(s.raw_f1_std), fmt(s.baseline_f1),
             fmt(s.baseline_f1_std), fmt(s.normalized_perf), s.degenerate ? "true" : "false", std::to_string(s.n_pairs),
             std::to_string(s.seed), hash, detail::join_numbers(s.raw_fold_f1), detail::join_numbers(s.baseline_fold_f1)});
  }
  return csv.str();
}

std::string probe_json(const RunConfig& config, const std::string& model, const std::string& hash,
                       const std::vector<detail::ProbeTableRow>& rows) {
  nlohmann::ordered_json doc;
  doc["model"] = model;
  doc["config_hash"] = hash;
  doc["seed"] = config.seed;
  doc["tool_version"] = kToolVersion;
  doc["probe"] = {{"l2_lambda", config.probe.logreg.l2_lambda},
                  {"tolerance", config.probe.logreg.tolerance},
                  {"max_iter", config.probe.logreg.max_iter},
                  {"standardize", config.probe.standardize},
                  {"n_folds", config.probe.n_folds},
                  {"f1", to_string(config.probe.f1_mode)}};
  doc["rows"] = nlohmann::ordered_json::array();
  for (const auto& [s, h] : rows) {
    doc["rows"].push_back({{"task_id", s.task_id},
                           {"layer", s.layer},
                           {"raw_f1_mean", s.raw_f1_mean},
                           {"raw_f1_std", s.raw_f1_std},
                           {"baseline_f1", s.baseline_f1},
                           {"baseline_f1_std", s.baseline_f1_std},
                           {"normalized_perf", s.normalized_perf},
                           {"degenerate", s.degenerate},
                           {"n_pairs", s.n_pairs},
                           {"seed", s.seed},
                           {"config_hash", h},
                           {"raw_f1_folds", s.raw_fold_f1},
                           {"baseline_f1_folds", s.baseline_fold_f1}});
  }
  return doc.dump(2) + "\n";
}

struct Job {
  std::string task_id;
  std::uint32_t layer = 0;
};

// Jobs are independent and seeded from (seed, task, layer), so results do not
// depend on the worker count or scheduling.
std::vector<ProbeScore> run_jobs(const RunConfig& config, const Dataset& dataset, const ActivationStore& store,
                                 const std::vector<Job>& jobs) {
  std::vector<std::optional<ProbeScore>> results(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      const auto i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      {
        std::lock_guard lock(error_mutex);
        if (error) return;
      }
      try {
        const auto layer = store.read_layer(jobs[i].layer);
        const auto rows = task_rows(dataset, store, jobs[i].task_id, layer);
        results[i] = probe_rows(rows, jobs[i].task_id, jobs[i].layer, config.seed, config.probe);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(config.workers, static_cast<unsigned>(jobs.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  std::vector<ProbeScore> out;
  out.reserve(jobs.size());
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

}  // namespace

void cmd_probe(const RunConfig& config, std::ostream& log) {
  if (config.models.empty()) throw UsageError("the config lists no models");
  const auto dataset = load_run_datasets(config);
  const auto tasks = task_ids(dataset);
  if (tasks.empty()) throw DataError("the datasets contain no pairs");
  const auto digest = dataset_digest(dataset);

  // Everything is opened and cross-checked before the first job runs, so a
  // bad input never leaves partial tables behind.
  std::vector<PreparedModel> models;
  for (const auto& m : config.models) {
    if (!std::filesystem::exists(m.store)) throw DataError("store not found for model '" + m.name + "': " + m.store.string());
    PreparedModel pm{&m, ActivationStore::open(m.store), {}};
    for (const auto& p : dataset)
      for (Role r : {Role::Good, Role::Bad})
        if (!pm.store.find({p.pair_id, r}))
          throw DataError("store of model '" + m.name + "' lacks sentence " + SentenceId{p.pair_id, r}.str());
    char crc[9];
    std::snprintf(crc, sizeof crc, "%08x", pm.store.checksum());
    pm.config_hash = fnv1a_hex(config.probe_settings() + ";model=" + m.name + ";store=" + crc + ";pairs=" + digest);
    models.push_back(std::move(pm));
  }

  std::vector<std::filesystem::path> written;
  for (const auto& pm : models) {
    const auto& name = pm.entry->name;
    const auto n_layers = pm.store.header().n_layers;
    const auto csv_path = detail::probe_table_path(config, name, ".csv");

    std::map<std::pair<std::string, std::uint32_t>, ProbeScore> done;
    if (std::filesystem::exists(csv_path)) {
      try {
        for (auto& row : detail::read_probe_table(csv_path))
          if (row.config_hash == pm.config_hash) done[{row.score.task_id, row.score.layer}] = std::move(row.score);
      } catch (const DataError& e) {
        log << "warning: ignoring unreadable " << csv_path.string() << ": " << e.what() << "\n";
        done.clear();
      }
    }

    std::vector<Job> jobs;
    for (const auto& t : tasks)
      for (std::uint32_t l = 0; l < n_layers; ++l)
        if (!done.count({t, l})) jobs.push_back({t, l});
    const auto reused = tasks.size() * n_layers - jobs.size();
    log << name << ": " << jobs.size() << " probe jobs, " << reused << " reused\n";
    auto fresh = run_jobs(config, dataset, pm.store, jobs);
    for (auto& s : fresh) done[{s.task_id, s.layer}] = std::move(s);

    std::vector<detail::ProbeTableRow> rows;
    for (const auto& t : tasks)
      for (std::uint32_t l = 0; l < n_layers; ++l) rows.push_back({done.at({t, l}), pm.config_hash});
    const auto json_path = detail::probe_table_path(config, name, ".json");
    detail::write_file(csv_path, probe_csv(rows));
    detail::write_file(json_path, probe_json(config, name, pm.config_hash, rows));
    written.push_back(csv_path);
    written.push_back(json_path);
  }
  detail::update_manifest(config, written);
}

}  // namespace probekit
