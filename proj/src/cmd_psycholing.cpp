#include <map>
#include <ostream>
#include <set>

#include "pipeline_util.hpp"
#include "probekit/error.hpp"
#include "probekit/pipeline.hpp"
#include "probekit/psycholing.hpp"

namespace probekit {

using detail::fmt;

namespace {

std::vector<ConceptAnnotation> load_run_annotations(const RunConfig& config) {
  std::vector<ConceptAnnotation> out;
  for (const auto& d : config.datasets) {
    if (!d.concepts) continue;
    if (!std::filesystem::exists(*d.concepts)) throw DataError("concept annotations not found: " + d.concepts->string());
    auto a = load_annotations(*d.concepts);
    out.insert(out.end(), a.begin(), a.end());
  }
  return out;
}

void check_token_dump(const TokenScoreFile& file, const Dataset& dataset, const std::string& model) {
  std::set<std::string> ids;
  for (const auto& p : dataset) ids.insert(p.pair_id);
  for (const auto& r : file.records)
    if (!ids.count(r.sentence.pair_id))
      throw DataError("token scores of model '" + model + "' mention unknown pair " + r.sentence.pair_id);
}

// Last-layer normalized performance per task, when the probe table exists.
std::map<std::string, double> last_layer_scores(const RunConfig& config, const std::string& model) {
  std::map<std::string, double> out;
  const auto path = detail::probe_table_path(config, model, ".csv");
  if (!std::filesystem::exists(path)) return out;
  std::map<std::string, std::uint32_t> last;
  for (const auto& row : detail::read_probe_table(path)) {
    const auto& s = row.score;
    auto it = last.find(s.task_id);
    if (it == last.end() || s.layer > it->second) {
      last[s.task_id] = s.layer;
      out[s.task_id] = s.normalized_perf;
    }
  }
  return out;
}

}  // namespace

void cmd_psycholing(const RunConfig& config, std::ostream& log, bool emit_prompts) {
  if (config.models.empty()) throw UsageError("the config lists no models");
  if (!config.psycholing.direct && !config.psycholing.meta) throw UsageError("psycholing.paradigms is empty");
  const auto dataset = load_run_datasets(config);
  const auto grouping = resolve_grouping(config, dataset);
  const auto out = config.output_dir / "psycholing";
  std::vector<std::filesystem::path> written;

  std::vector<MetaPrompt> prompts;
  bool any_meta_dump = false;
  for (const auto& m : config.models)
    any_meta_dump = any_meta_dump || (m.continuation_scores && std::filesystem::exists(*m.continuation_scores));
  if (emit_prompts || (config.psycholing.meta && any_meta_dump)) {
    const auto annotations = load_run_annotations(config);
    prompts = build_meta_prompts(dataset, annotations, config.psycholing.order_balancing);
  }
  if (emit_prompts) {
    for (const auto& m : config.models) {
      const auto path = out / ("prompts_" + m.name + ".jsonl");
      std::filesystem::create_directories(out);
      save_prompts(prompts, m.prompt_wrapper, path);
      written.push_back(path);
    }
    log << "wrote " << prompts.size() << " prompts per model\n";
  }

  detail::CsvBuilder accuracy({"model", "task_id", "duality", "paradigm", "accuracy", "tie_rate", "n"});
  detail::CsvBuilder by_duality({"model", "duality", "paradigm", "accuracy", "n_tasks"});
  detail::CsvBuilder comparison({"model", "task_id", "duality", "direct", "meta", "neuro"});

  for (const auto& m : config.models) {
    std::vector<DirectResult> direct;
    std::vector<MetaResult> meta;
    bool have_direct = false, have_meta = false;
    if (config.psycholing.direct) {
      if (m.token_scores && std::filesystem::exists(*m.token_scores)) {
        const auto file = load_token_scores(*m.token_scores);
        check_token_dump(file, dataset, m.name);
        direct = direct_scores(dataset, file);
        have_direct = true;
      } else {
        log << "warning: no token scores for model '" << m.name << "', direct paradigm skipped\n";
      }
    }
    if (config.psycholing.meta) {
      if (m.continuation_scores && std::filesystem::exists(*m.continuation_scores)) {
        meta = meta_scores(prompts, load_continuation_scores(*m.continuation_scores));
        have_meta = true;
      } else {
        log << "warning: no continuation scores for model '" << m.name << "', falling back to direct only\n";
      }
    }

    const auto neuro = last_layer_scores(config, m.name);
    std::map<std::string, std::map<std::string, std::vector<double>>> duality_acc;  // paradigm -> duality -> accs
    for (const auto& [task, g] : grouping) {
      const auto duality = std::string(to_string(g.duality));
      std::string direct_cell, meta_cell, neuro_cell;
      if (have_direct) {
        const auto a = paradigm_accuracy(direct, task);
        accuracy.add({m.name, task, duality, "direct", fmt(a.accuracy), fmt(a.tie_rate), std::to_string(a.n)});
        duality_acc["direct"][duality].push_back(a.accuracy);
        direct_cell = fmt(a.accuracy);
      }
      if (have_meta) {
        const auto a = meta_accuracy(meta, task);
        accuracy.add({m.name, task, duality, "meta", fmt(a.pooled.accuracy), fmt(a.pooled.tie_rate),
                      std::to_string(a.pooled.n)});
        for (const auto& [order, s] : a.per_order)
          accuracy.add({m.name, task, duality, "meta_" + std::string(to_string(order)), fmt(s.accuracy),
                        fmt(s.tie_rate), std::to_string(s.n)});
        duality_acc["meta"][duality].push_back(a.pooled.accuracy);
        meta_cell = fmt(a.pooled.accuracy);
      }
      if (auto it = neuro.find(task); it != neuro.end()) neuro_cell = fmt(it->second);
      comparison.add({m.name, task, duality, direct_cell, meta_cell, neuro_cell});
    }
    for (const auto& [paradigm, per] : duality_acc)
      for (const auto& [duality, accs] : per) {
        double sum = 0.0;
        for (double a : accs) sum += a;
        by_duality.add({m.name, duality, paradigm, fmt(sum / static_cast<double>(accs.size())), std::to_string(accs.size())});
      }
    if (neuro.empty()) log << "note: no probe table for model '" << m.name << "', neuro column left empty\n";
  }

  for (const auto& [name, csv] : {std::pair{"accuracy.csv", &accuracy}, std::pair{"accuracy_by_duality.csv", &by_duality},
                                   std::pair{"comparison.csv", &comparison}}) {
    const auto path = out / name;
    detail::write_file(path, csv->str());
    written.push_back(path);
  }
  detail::update_manifest(config, written);
  log << "psycholing: " << accuracy.size() << " accuracy rows\n";
}

}  // namespace probekit
