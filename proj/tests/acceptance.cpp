// Acceptance suite. Prints one PASS/FAIL line per criterion, followed by
// indented detail lines, and exits non-zero when any criterion fails.
//
//   acceptance [work_dir]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "probekit/activation_store.hpp"
#include "probekit/corpus.hpp"
#include "probekit/csv.hpp"
#include "probekit/layer_analysis.hpp"
#include "probekit/logreg.hpp"
#include "probekit/pipeline.hpp"
#include "probekit/probe.hpp"
#include "probekit/run_config.hpp"
#include "probekit/stats.hpp"

using namespace probekit;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> details;

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      details.push_back("failed: " + what);
    }
  }
  void note(const std::string& s) { details.push_back(s); }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return out;
}

double reference_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// ---------------------------------------------------------------------------

struct PlantedRun {
  fs::path dir;
  double seconds = 0.0;
  bool ok = false;
  std::string error;
};

PlantedRun run_planted(const fs::path& work) {
  PlantedRun r;
  r.dir = work / "planted";
  fs::remove_all(r.dir);
  std::ostringstream log;
  try {
    FixtureOptions fx;
    fx.out_dir = r.dir;
    cmd_fixtures(fx, log);
    const auto config = load_run_config(r.dir / "run.toml");
    const auto t0 = std::chrono::steady_clock::now();
    cmd_probe(config, log);
    cmd_analyze(config, log);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    cmd_psycholing(config, log, true);
    cmd_report(config, log);
    r.ok = true;
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  return r;
}

Outcome planted_signal(const PlantedRun& run) {
  Outcome o;
  if (!run.ok) {
    o.expect(false, "pipeline threw: " + run.error);
    return o;
  }
  const auto config = load_run_config(run.dir / "run.toml");
  int noise_bad = 0, signal_bad = 0, cells = 0;
  for (const auto& m : config.models) {
    const auto table = csv::Table::parse(slurp(config.output_dir / "probe" / (m.name + ".csv")));
    const auto c_task = table.column("task_id"), c_layer = table.column("layer"),
               c_norm = table.column("normalized_perf");
    for (const auto& row : table.rows()) {
      const int layer = std::stoi(row.fields[c_layer]);
      const double v = std::stod(row.fields[c_norm]);
      ++cells;
      const auto where = m.name + "/" + row.fields[c_task] + " layer " + std::to_string(layer) + " = " + fmt("%.4f", v);
      if (layer < 4 && !(v <= 0.1)) {
        ++noise_bad;
        o.expect(false, "noise layer above 0.1: " + where);
      }
      if (layer >= 4 && !(v >= 0.95)) {
        ++signal_bad;
        o.expect(false, "signal layer below 0.95: " + where);
      }
    }
  }
  o.note(std::to_string(cells) + " cells, " + std::to_string(noise_bad) + " noise-layer and " +
         std::to_string(signal_bad) + " signal-layer violations");

  const auto sat = csv::Table::parse(slurp(config.output_dir / "analysis/saturation.csv"));
  int n_task_curves = 0;
  for (const auto& row : sat.rows()) {
    if (row.fields[sat.column("kind")] != "task") continue;
    ++n_task_curves;
    const auto& s = row.fields[sat.column("saturation_layer")];
    o.expect(s == "4", "saturation layer of " + row.fields[sat.column("model")] + "/" +
                           row.fields[sat.column("curve_id")] + " is " + s);
  }
  o.expect(n_task_curves == 12, "expected 12 task curves, saw " + std::to_string(n_task_curves));
  o.note("probe + analyze took " + fmt("%.1f", run.seconds) + " s for two models");
  o.expect(run.seconds < 120.0, "runtime " + fmt("%.1f", run.seconds) + " s exceeds 2 minutes");
  return o;
}

Outcome null_calibration() {
  Outcome o;
  SyntheticConfig cfg;
  cfg.n_pairs = 2000;
  cfg.n_layers = 2;
  cfg.signal_layer = 1;
  cfg.hidden_dim = 64;
  cfg.task_id = "null";
  const auto dataset = generate_synthetic(cfg).dataset;
  double sum = 0.0;
  double lo_raw = 1, hi_raw = 0, lo_base = 1, hi_base = 0, worst = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto data = synthesize_activations(dataset, 1, 64, std::nullopt, 0.0, seed * 7919, "null");
    const auto store = ActivationStore::decode(encode_store(data));
    const auto s = probe_task(dataset, store, "null", 0, seed);
    lo_raw = std::min(lo_raw, s.raw_f1_mean), hi_raw = std::max(hi_raw, s.raw_f1_mean);
    lo_base = std::min(lo_base, s.baseline_f1), hi_base = std::max(hi_base, s.baseline_f1);
    worst = std::max(worst, std::fabs(s.normalized_perf));
    sum += s.normalized_perf;
    o.expect(s.raw_f1_mean >= 0.45 && s.raw_f1_mean <= 0.55, "seed " + std::to_string(seed) + " raw F1 " + fmt("%.4f", s.raw_f1_mean));
    o.expect(s.baseline_f1 >= 0.45 && s.baseline_f1 <= 0.55, "seed " + std::to_string(seed) + " baseline F1 " + fmt("%.4f", s.baseline_f1));
    o.expect(std::fabs(s.normalized_perf) <= 0.1, "seed " + std::to_string(seed) + " |normalized| " + fmt("%.4f", s.normalized_perf));
  }
  const double mean = sum / 20;
  o.note("raw F1 in [" + fmt("%.4f", lo_raw) + ", " + fmt("%.4f", hi_raw) + "], baseline in [" + fmt("%.4f", lo_base) +
         ", " + fmt("%.4f", hi_base) + "], max |normalized| " + fmt("%.4f", worst) + ", mean " + fmt("%.4f", mean));
  o.expect(std::fabs(mean) <= 0.05, "mean normalized " + fmt("%.4f", mean));
  return o;
}

Outcome normalized_identities() {
  Outcome o;
  o.expect(normalized_perf(0.9, 0.5).value == 0.8, "normalized_perf(0.9, 0.5) == 0.8");
  for (double b : {0.0, 0.3, 0.7}) {
    o.expect(normalized_perf(b, b).value == 0.0, "normalized_perf(b, b) == 0 at b = " + fmt("%g", b));
    o.expect(normalized_perf(1.0, b).value == 1.0, "normalized_perf(1, b) == 1 at b = " + fmt("%g", b));
    o.expect(!normalized_perf(1.0, b).degenerate, "no degenerate flag at b = " + fmt("%g", b));
  }
  for (double b : {1.0 - 1e-9, 1.0 - 1e-10, 1.0}) {
    const auto r = normalized_perf(0.95, b);
    o.expect(r.degenerate && r.value == 0.0, "degenerate flag at b = " + fmt("%.12f", b));
  }
  o.expect(!normalized_perf(0.95, 0.999).degenerate, "no degenerate flag at b = 0.999");
  return o;
}

Outcome logreg_oracle() {
  Outcome o;
  int agree = 0, total = 0, monotone = 0;
  for (int s = 0; s < 30; ++s) {
    const auto d = oracle::random_blobs(1000 + s, 50);
    Eigen::MatrixXd X(50, 2);
    for (int i = 0; i < 50; ++i) X.row(i) << d.x[i][0], d.x[i][1];
    const auto clf = train_logreg(X, d.y);
    const auto ref = oracle::grid_search_logreg(d, 1.0);
    for (int i = 0; i < 50; ++i) {
      const double theirs = ref[0] * d.x[i][0] + ref[1] * d.x[i][1] + ref[2];
      agree += (clf.decision(X.row(i).transpose()) > 0) == (theirs > 0);
      ++total;
    }
    bool ok = true;
    for (std::size_t k = 1; k < clf.loss_history.size(); ++k) ok = ok && clf.loss_history[k] <= clf.loss_history[k - 1];
    monotone += ok;
  }
  const double rate = double(agree) / total;
  o.note("agreement " + fmt("%.4f", rate) + " over " + std::to_string(total) + " points; " + std::to_string(monotone) +
         "/30 loss histories non-increasing");
  o.expect(rate >= 0.98, "agreement below 98%");
  o.expect(monotone == 30, "loss increased during training");
  return o;
}

Outcome stats_oracles() {
  Outcome o;
  const std::vector<double> two{0.05, 0.05};
  const auto st = stouffer_combine(two);
  const double z_ref = 2.0 * normal_cdf_inverse(0.95) / std::sqrt(2.0);
  const double p_ref = 1.0 - reference_cdf(z_ref);
  o.note("stouffer p " + fmt("%.6f", st.p) + " (reference " + fmt("%.6f", p_ref) + ")");
  o.expect(std::fabs(st.p - 0.0100) <= 1e-4, "stouffer p not 0.0100 +- 1e-4");
  o.expect(std::fabs(st.p - p_ref) <= 1e-9, "stouffer p differs from the reference CDF");

  const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 3, 4, 5, 6};
  const auto w = welch_t_test(a, b);
  o.note("welch t " + fmt("%.6f", w.t_statistic) + ", p " + fmt("%.6f", w.p_two_sided));
  o.expect(w.t_statistic == -1.0, "welch t != -1");
  o.expect(std::fabs(w.p_two_sided - 0.3466) <= 1e-3, "welch p not 0.3466 +- 1e-3");
  o.expect(std::fabs(w.p_two_sided - 0.34659350708733416) <= 1e-9, "welch p differs from the frozen reference");

  double worst = 0.0;
  for (int i = 1; i <= 999; ++i) {
    const double p = i / 1000.0;
    worst = std::max(worst, std::fabs(reference_cdf(normal_cdf_inverse(p)) - p));
  }
  o.note("inverse-normal round-trip max error " + fmt("%.3e", worst));
  o.expect(worst <= 1e-9, "round-trip error above 1e-9");
  return o;
}

Outcome layer_analytics() {
  Outcome o;
  const auto s = saturation_layer(LayerCurve{"crafted", {0.2, 0.5, 0.93, 0.95, 0.96, 1.0}, {}});
  o.expect(s.saturation_layer == std::optional<std::size_t>(3) && s.maximum_layer == 5, "saturation/maximum != (3, 5)");
  const auto d = difference_curve(LayerCurve{"a", {0.0}, {0.3}}, LayerCurve{"b", {0.0}, {0.4}});
  o.expect(d.std_diff[0] == 0.5, "std_diff(0.3, 0.4) = " + fmt("%.17g", d.std_diff[0]));

  SyntheticConfig cfg;
  cfg.n_pairs = 200;
  cfg.n_layers = 4;
  cfg.hidden_dim = 16;
  cfg.signal_layer = 2;
  cfg.seed = 5;
  cfg.task_id = "t";
  const auto world = generate_synthetic(cfg);
  const auto store = ActivationStore::decode(encode_store(world.store));
  auto curve = [&] {
    std::vector<ProbeScore> scores;
    for (std::uint32_t l = 0; l < 4; ++l) scores.push_back(probe_task(world.dataset, store, "t", l, 99));
    return curve_from_scores(scores, "t");
  };
  const auto diff = difference_curve(curve(), curve());
  bool zero = true;
  for (double v : diff.values) zero = zero && v == 0.0;
  o.expect(zero, "difference curve of same-seed runs is not identically zero");
  return o;
}

Outcome comps_golden() {
  Outcome o;
  const fs::path data = fs::path(PROBEKIT_TEST_DATA_DIR) / "comps_mini";
  const auto table = load_table(data / "table.json");
  o.expect(table.concepts.size() == 5 && table.properties.size() == 4, "miniature table is not 5 concepts / 4 properties");
  std::ostringstream en;
  save_pairs(build_comps(table, "en"), en, PairFormat::Jsonl);
  const auto expected = slurp(data / "expected_en.jsonl");
  o.expect(en.str() == expected, "English JSONL differs from the golden file");
  o.expect(en.str().find("\"sentence_good\":\"Helmet can absorb shocks\",\"sentence_bad\":\"Cap can absorb shocks\"") !=
               std::string::npos,
           "Helmet/Cap pair missing");

  const auto overlay = load_overlay(data / "overlay.json");
  const auto once = apply_overlay(table, overlay);
  o.expect(apply_overlay(once, overlay) == once, "overlay is not idempotent");
  std::ostringstream de;
  save_pairs(build_comps(once, "de"), de, PairFormat::Jsonl);
  o.expect(de.str() == slurp(data / "expected_de_corrected.jsonl"), "corrected German JSONL differs from the golden file");
  return o;
}

Outcome determinism(const PlantedRun& run) {
  Outcome o;
  if (!run.ok) {
    o.expect(false, "first run failed: " + run.error);
    return o;
  }
  auto config = load_run_config(run.dir / "run.toml");
  const auto first_dir = config.output_dir;
  config.output_dir = run.dir / "rerun";
  config.workers = 2;
  fs::remove_all(config.output_dir);
  std::ostringstream log;
  try {
    cmd_probe(config, log);
    cmd_analyze(config, log);
    cmd_psycholing(config, log, true);
    cmd_report(config, log);
  } catch (const std::exception& e) {
    o.expect(false, std::string("rerun threw: ") + e.what());
    return o;
  }
  const auto a = snapshot(first_dir), b = snapshot(config.output_dir);
  std::size_t compared = 0;
  for (const auto& [name, bytes] : a) {
    const auto ext = fs::path(name).extension();
    if (ext != ".csv" && ext != ".json" && ext != ".svg" && ext != ".jsonl" && ext != ".md") continue;
    auto it = b.find(name);
    o.expect(it != b.end(), name + " missing from the rerun");
    if (it != b.end()) o.expect(it->second == bytes, name + " differs");
    ++compared;
  }
  o.expect(a.size() == b.size(), "different file sets");
  o.note(std::to_string(compared) + " files compared");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "probekit_acceptance";
  fs::create_directories(work);

  int failures = 0;
  auto report = [&](const char* name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.expect(false, std::string("threw: ") + e.what());
    }
    std::printf("%s %s\n", o.pass ? "PASS" : "FAIL", name);
    for (const auto& d : o.details) std::printf("    %s\n", d.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  };

  const auto planted = run_planted(work);
  report("planted_signal_end_to_end", [&] { return planted_signal(planted); });
  report("null_calibration", null_calibration);
  report("normalized_perf_identities", normalized_identities);
  report("logreg_grid_search_oracle", logreg_oracle);
  report("statistics_oracles", stats_oracles);
  report("layer_analytics", layer_analytics);
  report("concept_builder_golden_files", comps_golden);
  report("pipeline_determinism", [&] { return determinism(planted); });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
