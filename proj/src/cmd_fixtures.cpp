#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "pipeline_util.hpp"
#include "probekit/activation_store.hpp"
#include "probekit/error.hpp"
#include "probekit/pipeline.hpp"
#include "probekit/psycholing.hpp"

namespace probekit {

namespace {

constexpr const char* kLanguages[] = {"en", "de"};
constexpr RelationKind kRelations[] = {RelationKind::Taxonomy, RelationKind::PropertyNorms, RelationKind::CoOccurrence,
                                       RelationKind::Random};
constexpr Level kFormLevels[] = {Level::Morphology, Level::Syntax, Level::SemanticsSyntaxInterface};
constexpr std::size_t kConcepts = 60;

// Exactly round(accuracy * n) of n items are marked correct, spread evenly.
bool spread_correct(std::size_t i, std::size_t n, double accuracy) {
  const auto count = static_cast<std::size_t>(std::llround(accuracy * static_cast<double>(n)));
  return (i + 1) * count / n > i * count / n;
}

MinimalPair form_pair(std::size_t task, std::size_t i, const std::string& lang) {
  MinimalPair p;
  p.task_id = "synthetic_form_" + std::to_string(task + 1);
  p.pair_id = p.task_id + "_" + std::to_string(i + 1);
  const auto tag = std::to_string(task + 1) + "." + std::to_string(i + 1);
  if (lang == "de") {
    p.sentence_good = "Synthetischer Satz " + tag + " ist korrekt.";
    p.sentence_bad = "Synthetischer Satz " + tag + " sind korrekt.";
  } else {
    p.sentence_good = "Synthetic sentence " + tag + " is acceptable.";
    p.sentence_bad = "Synthetic sentence " + tag + " are acceptable.";
  }
  p.language = lang;
  p.duality = Duality::Form;
  p.phenomenon = "planted signal";
  p.level = kFormLevels[task % std::size(kFormLevels)];
  return p;
}

ConceptPropertyTable concept_table(const std::vector<RelationKind>& kinds, std::size_t n_pairs) {
  ConceptPropertyTable t;
  for (std::size_t k = 0; k < kConcepts; ++k) {
    const auto id = "c" + std::to_string(k + 1);
    t.concepts.push_back({id, {{"en", "wug" + std::to_string(k + 1)}, {"de", "Wug" + std::to_string(k + 1)}}});
  }
  std::size_t j = 0;
  for (auto kind : kinds) {
    for (std::size_t i = 0; i < n_pairs; ++i, ++j) {
      const auto pid = "p" + std::to_string(j + 1);
      t.properties.push_back({pid,
                              {{"en", "<C> can carry item " + std::to_string(j + 1) + "."},
                               {"de", "<C> kann Ding " + std::to_string(j + 1) + " tragen."}},
                              {}});
      // 6j + 1 is odd, so pos and neg never coincide.
      t.relations.push_back({"c" + std::to_string(j % kConcepts + 1), "c" + std::to_string((7 * j + 1) % kConcepts + 1),
                             kind, pid});
    }
  }
  return t;
}

std::vector<TokenScore> token_scores_for(const std::string& sentence, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> lp(-8.0, -0.5);
  std::vector<TokenScore> out;
  std::istringstream words(sentence);
  std::string w;
  bool first = true;
  while (words >> w) {
    out.push_back({first ? w : " " + w, lp(rng)});
    first = false;
  }
  return out;
}

double total(const std::vector<TokenScore>& tokens) {
  double s = 0.0;
  for (const auto& t : tokens) s += t.logprob;
  return s;
}

// Lowers the last token of `loser` until its sentence total is below `winner`'s.
void make_lower(std::vector<TokenScore>& loser, const std::vector<TokenScore>& winner, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> margin(0.25, 2.0);
  const double gap = total(loser) - total(winner);
  if (gap >= 0.0) loser.back().logprob -= gap + margin(rng);
}

std::string grouping_toml(const std::vector<std::pair<std::string, TaskGroup>>& tasks) {
  std::ostringstream out;
  out << "# Task grouping for the synthetic fixture.\n";
  for (const auto& [id, g] : tasks) {
    out << "\n[tasks." << id << "]\n";
    out << "duality = \"" << to_string(g.duality) << "\"\n";
    out << "level = \"" << to_string(g.level) << "\"\n";
    out << "group = \"" << g.group << "\"\n";
    out << "language = \"" << g.language << "\"\n";
  }
  return out.str();
}

std::string run_toml(const FixtureOptions& o) {
  std::ostringstream out;
  out << "# Generated by `probekit fixtures`. Paths are relative to this file.\n\n";
  out << "[run]\noutput_dir = \"run\"\nseed = " << o.seed << "\nworkers = " << o.workers << "\n\n";
  out << "[[datasets]]\npath = \"pairs.jsonl\"\nconcepts = \"concepts.jsonl\"\nspecs = \"tasks.json\"\n\n";
  for (const auto& m : o.models) {
    out << "[[models]]\nname = \"" << m << "\"\nstore = \"stores/" << m << ".mps\"\n";
    out << "token_scores = \"scores/" << m << ".tokens.jsonl\"\n";
    out << "continuation_scores = \"scores/" << m << ".continuations.jsonl\"\n\n";
  }
  out << "[probe]\nl2_lambda = 1.0\ntolerance = 1e-6\nmax_iter = 1000\nstandardize = true\nn_folds = 5\nf1 = \"binary\"\n\n";
  out << "[analysis]\nthreshold_ratio = 0.95\nttest = \"welch\"\nscatter_statistic = \"layer_mean\"\n\n";
  if (o.models.size() >= 2) out << "[[analysis.compare]]\na = \"" << o.models[0] << "\"\nb = \"" << o.models[1] << "\"\n\n";
  out << "[psycholing]\norder_balancing = true\nparadigms = [\"direct\", \"meta\"]\n\n";
  out << "[grouping]\nfile = \"grouping.toml\"\n";
  return out.str();
}

}  // namespace

void cmd_fixtures(const FixtureOptions& o, std::ostream& log) {
  if (o.n_pairs < 5) throw UsageError("fixtures need at least 5 pairs per task");
  if (o.n_meaning_tasks > 2 * std::size(kRelations)) throw UsageError("at most 8 meaning tasks");
  if (o.n_form_tasks + o.n_meaning_tasks == 0) throw UsageError("fixtures need at least one task");
  if (o.n_layers == 0 || o.hidden_dim == 0) throw UsageError("n_layers and hidden_dim must be positive");
  if (o.signal_layer >= o.n_layers) throw UsageError("signal_layer must be below n_layers");
  if (!(o.separation > 0.0)) throw UsageError("separation must be positive");
  if (!(o.direct_accuracy >= 0.0 && o.direct_accuracy <= 1.0) || !(o.meta_accuracy >= 0.0 && o.meta_accuracy <= 1.0))
    throw UsageError("target accuracies must lie in [0, 1]");
  if (o.models.empty()) throw UsageError("fixtures need at least one model");

  const auto& dir = o.out_dir;
  std::filesystem::create_directories(dir / "stores");
  std::filesystem::create_directories(dir / "scores");

  Dataset dataset;
  std::vector<std::pair<std::string, TaskGroup>> tasks;
  for (std::size_t t = 0; t < o.n_form_tasks; ++t) {
    const std::string lang = kLanguages[t % 2];
    for (std::size_t i = 0; i < o.n_pairs; ++i) dataset.push_back(form_pair(t, i, lang));
    const auto& p = dataset.back();
    tasks.emplace_back(p.task_id, TaskGroup{Duality::Form, p.level, std::string(to_string(p.level)), lang});
  }

  std::vector<ConceptAnnotation> annotations;
  for (const char* lang : kLanguages) {
    std::vector<RelationKind> kinds;
    for (std::size_t k = 0; k < o.n_meaning_tasks; ++k)
      if (std::string(kLanguages[k % 2]) == lang) kinds.push_back(kRelations[k / 2]);
    if (kinds.empty()) continue;
    const auto table = concept_table(kinds, o.n_pairs);
    detail::write_file(dir / ("concept_table_" + std::string(lang) + ".json"), dump_table(table) + "\n");
    auto build = build_comps_annotated(table, lang);
    for (auto kind : kinds)
      tasks.emplace_back("comps_" + std::string(lang) + "_" + std::string(to_string(kind)),
                         TaskGroup{Duality::Meaning, Level::Conceptual, "conceptual", lang});
    dataset.insert(dataset.end(), build.pairs.begin(), build.pairs.end());
    annotations.insert(annotations.end(), build.annotations.begin(), build.annotations.end());
  }

  save_pairs(dataset, dir / "pairs.jsonl", PairFormat::Jsonl);
  save_annotations(annotations, dir / "concepts.jsonl");
  {
    nlohmann::ordered_json specs = nlohmann::ordered_json::array();
    for (const auto& [id, g] : tasks)
      specs.push_back({{"task_id", id},
                       {"name", id},
                       {"duality", to_string(g.duality)},
                       {"level", to_string(g.level)},
                       {"language", g.language},
                       {"expected_pair_count", o.n_pairs}});
    detail::write_file(dir / "tasks.json", specs.dump(2) + "\n");
  }
  detail::write_file(dir / "grouping.toml", grouping_toml(tasks));

  const auto prompts = build_meta_prompts(dataset, annotations, true);
  save_prompts(prompts, "{prompt}", dir / "prompts.jsonl");

  std::map<std::string, std::vector<std::size_t>> pairs_of_task, prompts_of_task;
  for (std::size_t i = 0; i < dataset.size(); ++i) pairs_of_task[dataset[i].task_id].push_back(i);
  for (std::size_t i = 0; i < prompts.size(); ++i) prompts_of_task[prompts[i].task_id].push_back(i);

  for (const auto& model : o.models) {
    auto store = synthesize_activations(dataset, o.n_layers, o.hidden_dim, o.signal_layer, o.separation,
                                        derive_seed(o.seed, model, -1, "store"), model);
    write_store(dir / "stores" / (model + ".mps"), store);

    std::mt19937_64 rng(derive_seed(o.seed, model, -1, "token_scores"));
    TokenScoreFile tokens;
    tokens.model_name = model;
    tokens.bos_convention = "synthetic";
    std::vector<TokenScoreRecord> records(2 * dataset.size());
    for (const auto& [task, idx] : pairs_of_task) {
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const auto& p = dataset[idx[k]];
        auto good = token_scores_for(p.sentence_good, rng);
        auto bad = token_scores_for(p.sentence_bad, rng);
        if (spread_correct(k, idx.size(), o.direct_accuracy)) make_lower(bad, good, rng);
        else make_lower(good, bad, rng);
        records[2 * idx[k]] = {{p.pair_id, Role::Good}, std::move(good)};
        records[2 * idx[k] + 1] = {{p.pair_id, Role::Bad}, std::move(bad)};
      }
    }
    tokens.records = std::move(records);
    save_token_scores(tokens, dir / "scores" / (model + ".tokens.jsonl"));

    std::mt19937_64 crng(derive_seed(o.seed, model, -1, "continuations"));
    std::uniform_real_distribution<double> high(-2.0, -0.1), margin(0.5, 3.0);
    ContinuationScoreFile cont;
    cont.model_name = model;
    cont.prompt_mode = "raw";
    std::vector<std::array<double, 2>> lps(prompts.size());
    for (const auto& [task, idx] : prompts_of_task) {
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const auto& p = prompts[idx[k]];
        const int right = p.option_labels[0] == p.correct_option_label ? 0 : 1;
        const double win = high(crng), lose = win - margin(crng);
        const bool correct = spread_correct(k, idx.size(), o.meta_accuracy);
        lps[idx[k]][right] = correct ? win : lose;
        lps[idx[k]][1 - right] = correct ? lose : win;
      }
    }
    for (std::size_t i = 0; i < prompts.size(); ++i)
      for (int j = 0; j < 2; ++j) cont.records.push_back({prompts[i].prompt_id, prompts[i].option_labels[j], lps[i][j]});
    save_continuation_scores(cont, dir / "scores" / (model + ".continuations.jsonl"));
    log << "fixture model '" << model << "': " << store.header.n_sentences() << " sentences, " << o.n_layers
        << " layers\n";
  }

  detail::write_file(dir / "run.toml", run_toml(o));
  log << "fixtures: " << tasks.size() << " tasks, " << dataset.size() << " pairs -> " << dir.string() << "\n";
}

}  // namespace probekit
