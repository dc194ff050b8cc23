#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <set>

#include "pipeline_util.hpp"
#include "probekit/error.hpp"
#include "probekit/layer_analysis.hpp"
#include "probekit/pipeline.hpp"
#include "probekit/stats.hpp"
#include "probekit/svg.hpp"

namespace probekit {

using detail::fmt;

namespace {

struct ModelCurves {
  std::string model;
  std::vector<ProbeScore> scores;
  std::map<std::string, LayerCurve> tasks;  // by task id
  std::map<std::string, LayerCurve> duality;  // "form" / "meaning"
  std::map<std::string, LayerCurve> groups;
  std::map<std::pair<std::string, std::uint32_t>, const ProbeScore*> by_cell;
  std::size_t n_layers = 0;
};

using Grouping = std::vector<std::pair<std::string, TaskGroup>>;

ModelCurves build_curves(const RunConfig& config, const std::string& model, const Grouping& grouping) {
  const auto path = detail::probe_table_path(config, model, ".csv");
  if (!std::filesystem::exists(path)) throw DataError("probe table missing for model '" + model + "': " + path.string() + " (run probe first)");
  ModelCurves mc;
  mc.model = model;
  for (auto& row : detail::read_probe_table(path)) mc.scores.push_back(std::move(row.score));
  for (const auto& s : mc.scores) mc.by_cell[{s.task_id, s.layer}] = &s;

  std::map<std::string, std::vector<LayerCurve>> by_duality, by_group;
  for (const auto& [task, g] : grouping) {
    auto curve = curve_from_scores(mc.scores, task);  // throws when the task or a layer is missing
    if (mc.n_layers == 0) mc.n_layers = curve.n_layers();
    if (curve.n_layers() != mc.n_layers)
      throw DataError("model '" + model + "': task " + task + " has " + std::to_string(curve.n_layers()) +
                      " layers, expected " + std::to_string(mc.n_layers));
    by_duality[std::string(to_string(g.duality))].push_back(curve);
    by_group[g.group].push_back(curve);
    mc.tasks.emplace(task, std::move(curve));
  }
  for (auto& [name, curves] : by_duality) mc.duality.emplace(name, aggregate_curves(curves, name));
  for (auto& [name, curves] : by_group) mc.groups.emplace(name, aggregate_curves(curves, name));
  return mc;
}

double curve_statistic(const LayerCurve& c, ScatterStatistic s) {
  switch (s) {
    case ScatterStatistic::LastLayer: return c.values.back();
    case ScatterStatistic::Peak: return *std::max_element(c.values.begin(), c.values.end());
    case ScatterStatistic::LayerMean: break;
  }
  return std::accumulate(c.values.begin(), c.values.end(), 0.0) / static_cast<double>(c.values.size());
}

std::vector<double> layer_axis(std::size_t n) {
  std::vector<double> x(n);
  std::iota(x.begin(), x.end(), 0.0);
  return x;
}

svg::LineSeries series_of(const LayerCurve& c, bool band) {
  return {c.curve_id, layer_axis(c.n_layers()), c.values, band ? c.stds : std::vector<double>{}};
}

svg::LineSeries series_of(const DifferenceCurve& d) {
  return {d.curve_id, layer_axis(d.values.size()), d.values, d.std_diff};
}

TTestResult run_ttest(TTestKind kind, std::span<const double> b, std::span<const double> a) {
  return kind == TTestKind::Welch ? welch_t_test(b, a) : paired_t_test(b, a);
}

}  // namespace

void cmd_analyze(const RunConfig& config, std::ostream& log) {
  if (config.models.empty()) throw UsageError("the config lists no models");
  const auto dataset = load_run_datasets(config);
  const auto grouping = resolve_grouping(config, dataset);
  const double ratio = config.analysis.threshold_ratio;

  std::map<std::string, ModelCurves> models;
  for (const auto& m : config.models) models.emplace(m.name, build_curves(config, m.name, grouping));

  const auto out = config.output_dir / "analysis";
  const auto plots = out / "plots";
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::filesystem::path& path, const std::string& content) {
    detail::write_file(path, content);
    written.push_back(path);
  };

  // Curves and saturation.
  detail::CsvBuilder curves({"model", "kind", "curve_id", "layer", "value", "std"});
  detail::CsvBuilder saturation({"model", "kind", "curve_id", "saturation_layer", "maximum_layer", "peak_value",
                                 "threshold_ratio", "degenerate"});
  detail::CsvBuilder sat_duality({"model", "duality", "n_tasks", "n_degenerate", "mean_saturation_layer",
                                  "std_saturation_layer", "mean_maximum_layer", "std_maximum_layer"});
  std::map<std::string, std::map<std::string, std::vector<double>>> task_saturation;  // model -> duality -> layers

  for (const auto& m : config.models) {
    const auto& mc = models.at(m.name);
    auto add_curve = [&](std::string_view kind, const LayerCurve& c) {
      for (std::size_t l = 0; l < c.n_layers(); ++l)
        curves.add({m.name, std::string(kind), c.curve_id, std::to_string(l), fmt(c.values[l]), fmt(c.stds[l])});
      const auto sat = saturation_layer(c, ratio);
      saturation.add({m.name, std::string(kind), c.curve_id,
                      sat.saturation_layer ? std::to_string(*sat.saturation_layer) : "", std::to_string(sat.maximum_layer),
                      fmt(sat.peak_value), fmt(ratio), sat.degenerate ? "true" : "false"});
      return sat;
    };
    for (const auto& [task, g] : grouping) {
      const auto sat = add_curve("task", mc.tasks.at(task));
      auto& bucket = task_saturation[m.name][std::string(to_string(g.duality))];
      if (sat.saturation_layer) bucket.push_back(static_cast<double>(*sat.saturation_layer));
    }
    for (const auto& [name, c] : mc.duality) add_curve("duality", c);
    for (const auto& [name, c] : mc.groups) add_curve("group", c);

    for (const auto& [duality, c] : mc.duality) {
      std::vector<double> sat_layers, max_layers;
      std::size_t n = 0, degenerate = 0;
      for (const auto& [task, g] : grouping) {
        if (to_string(g.duality) != duality) continue;
        ++n;
        const auto sat = saturation_layer(mc.tasks.at(task), ratio);
        if (!sat.saturation_layer) {
          ++degenerate;
          continue;
        }
        sat_layers.push_back(static_cast<double>(*sat.saturation_layer));
        max_layers.push_back(static_cast<double>(sat.maximum_layer));
      }
      auto mean_std = [](const std::vector<double>& xs) -> std::pair<std::string, std::string> {
        if (xs.empty()) return {"", ""};
        const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
        double ss = 0.0;
        for (double x : xs) ss += (x - mean) * (x - mean);
        return {fmt(mean), fmt(std::sqrt(ss / static_cast<double>(xs.size())))};
      };
      const auto [ms, ss] = mean_std(sat_layers);
      const auto [mm, sm] = mean_std(max_layers);
      sat_duality.add({m.name, duality, std::to_string(n), std::to_string(degenerate), ms, ss, mm, sm});
    }

    svg::LineChart task_chart{"Per-task normalized performance (" + m.name + ")", "layer", "normalized performance", {}, {}};
    for (const auto& [task, g] : grouping) task_chart.series.push_back(series_of(mc.tasks.at(task), false));
    emit(plots / ("tasks_" + m.name + ".svg"), svg::render(task_chart));

    svg::LineChart duality_chart{"Form vs meaning (" + m.name + ")", "layer", "normalized performance", {}, {}};
    for (const auto& [name, c] : mc.duality) duality_chart.series.push_back(series_of(c, true));
    emit(plots / ("duality_" + m.name + ".svg"), svg::render(duality_chart));
  }
  emit(out / "curves.csv", curves.str());
  emit(out / "saturation.csv", saturation.str());
  emit(out / "saturation_by_duality.csv", sat_duality.str());

  {
    svg::BarChart bars{"Saturation and maximum layers", "layer", {}, {"saturation", "maximum"}, {{}, {}}, {}};
    for (const auto& m : config.models)
      for (const auto& [name, c] : models.at(m.name).duality) {
        const auto sat = saturation_layer(c, ratio);
        bars.categories.push_back(m.name + " " + name);
        bars.values[0].push_back(sat.saturation_layer ? static_cast<double>(*sat.saturation_layer) : 0.0);
        bars.values[1].push_back(static_cast<double>(sat.maximum_layer));
      }
    emit(plots / "saturation.svg", svg::render(bars));
  }

  // Model comparisons: difference curves and significance tests, b vs a.
  detail::CsvBuilder differences({"comparison", "kind", "curve_id", "layer", "value", "std_diff"});
  detail::CsvBuilder ttests({"comparison", "task_id", "duality", "layer", "test", "mean_a", "mean_b", "t", "df",
                             "p_two_sided", "p_one_sided", "stars"});
  detail::CsvBuilder stouffer({"comparison", "duality", "layer", "k", "z", "p", "stars", "clamped"});
  detail::CsvBuilder sat_tests({"comparison", "duality", "test", "n_a", "n_b", "mean_a", "mean_b", "t", "df",
                                "p_two_sided", "p_one_sided", "stars"});
  for (const auto& cmp : config.analysis.compare) {
    const auto& A = models.at(cmp.a);
    const auto& B = models.at(cmp.b);
    if (A.n_layers != B.n_layers)
      throw DataError("cannot compare '" + cmp.a + "' and '" + cmp.b + "': different layer counts");
    const auto label = cmp.b + "-" + cmp.a;

    svg::LineChart diff_chart{"Difference " + label, "layer", "normalized performance difference", {}, 0.0};
    for (const auto& [name, ca] : A.duality) {
      auto d = difference_curve(B.duality.at(name), ca, name);
      for (std::size_t l = 0; l < d.values.size(); ++l)
        differences.add({label, "duality", name, std::to_string(l), fmt(d.values[l]), fmt(d.std_diff[l])});
      diff_chart.series.push_back(series_of(d));
    }
    for (const auto& [task, g] : grouping) {
      const auto d = difference_curve(B.tasks.at(task), A.tasks.at(task), task);
      for (std::size_t l = 0; l < d.values.size(); ++l)
        differences.add({label, "task", task, std::to_string(l), fmt(d.values[l]), fmt(d.std_diff[l])});
    }
    emit(plots / ("difference_" + cmp.b + "_vs_" + cmp.a + ".svg"), svg::render(diff_chart));

    // Task-level tests on per-fold normalized scores, then Stouffer per duality and layer.
    std::map<std::pair<std::string, std::size_t>, std::vector<double>> one_sided;
    for (const auto& [task, g] : grouping) {
      const auto duality = std::string(to_string(g.duality));
      for (std::uint32_t l = 0; l < A.n_layers; ++l) {
        const auto fa = detail::fold_normalized(*A.by_cell.at({task, l}));
        const auto fb = detail::fold_normalized(*B.by_cell.at({task, l}));
        const auto t = run_ttest(config.analysis.ttest, fb, fa);
        ttests.add({label, task, duality, std::to_string(l), std::string(to_string(config.analysis.ttest)), fmt(t.mean_b),
                    fmt(t.mean_a), fmt(t.t_statistic), fmt(t.degrees_of_freedom), fmt(t.p_two_sided), fmt(t.p_greater),
                    significance_stars(t.p_greater)});
        one_sided[{duality, l}].push_back(t.p_greater);
      }
    }
    for (const auto& [key, ps] : one_sided) {
      const auto c = stouffer_combine(ps);
      if (c.clamped) log << "warning: " << label << " " << key.first << " layer " << key.second << ": p-values clamped\n";
      stouffer.add({label, key.first, std::to_string(key.second), std::to_string(ps.size()), fmt(c.z), fmt(c.p),
                    significance_stars(c.p), c.clamped ? "true" : "false"});
    }

    // Saturation layers of the tasks in each duality, model b vs model a.
    for (const auto& [duality, sa] : task_saturation.at(cmp.a)) {
      const auto& sb = task_saturation.at(cmp.b)[duality];
      if (sa.size() < 2 || sb.size() < 2 || (config.analysis.ttest == TTestKind::Paired && sa.size() != sb.size())) {
        log << "warning: " << label << " " << duality << ": too few non-degenerate tasks for a saturation t-test\n";
        continue;
      }
      const auto t = run_ttest(config.analysis.ttest, sb, sa);
      sat_tests.add({label, duality, std::string(to_string(config.analysis.ttest)), std::to_string(sa.size()),
                     std::to_string(sb.size()), fmt(t.mean_b), fmt(t.mean_a), fmt(t.t_statistic),
                     fmt(t.degrees_of_freedom), fmt(t.p_two_sided), fmt(t.p_greater), significance_stars(t.p_greater)});
    }
  }
  if (!config.analysis.compare.empty()) {
    emit(out / "differences.csv", differences.str());
    emit(out / "ttests_layer.csv", ttests.str());
    emit(out / "stouffer.csv", stouffer.str());
    emit(out / "ttests_saturation.csv", sat_tests.str());
  }

  // Form vs meaning per (model, language).
  detail::CsvBuilder scatter({"model", "language", "statistic", "form", "meaning", "n_form_tasks", "n_meaning_tasks"});
  svg::ScatterChart scatter_chart{"Form vs meaning competence", "form", "meaning", {}, {}};
  std::vector<double> xs, ys;
  for (const auto& m : config.models) {
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_language;
    for (const auto& [task, g] : grouping) {
      const double v = curve_statistic(models.at(m.name).tasks.at(task), config.analysis.scatter_statistic);
      auto& [form, meaning] = by_language[g.language];
      (g.duality == Duality::Form ? form : meaning).push_back(v);
    }
    for (const auto& [lang, fm] : by_language) {
      const auto& [form, meaning] = fm;
      if (form.empty() || meaning.empty()) continue;
      const double x = std::accumulate(form.begin(), form.end(), 0.0) / static_cast<double>(form.size());
      const double y = std::accumulate(meaning.begin(), meaning.end(), 0.0) / static_cast<double>(meaning.size());
      scatter.add({m.name, lang, std::string(to_string(config.analysis.scatter_statistic)), fmt(x), fmt(y),
                   std::to_string(form.size()), std::to_string(meaning.size())});
      scatter_chart.points.push_back({m.name + "/" + lang, x, y});
      xs.push_back(x);
      ys.push_back(y);
    }
  }
  emit(out / "scatter.csv", scatter.str());
  const bool x_varies = !xs.empty() && std::any_of(xs.begin(), xs.end(), [&](double v) { return v != xs.front(); });
  if (xs.size() >= 3 && x_varies) {
    const auto fit = linear_fit(xs, ys);
    detail::CsvBuilder fit_csv({"statistic", "slope", "intercept", "r", "r_squared", "n_points"});
    fit_csv.add({std::string(to_string(config.analysis.scatter_statistic)), fmt(fit.slope), fmt(fit.intercept), fmt(fit.r),
                 fmt(fit.r_squared), std::to_string(fit.n_points)});
    emit(out / "fit.csv", fit_csv.str());
    scatter_chart.fit = svg::FitLine{fit.slope, fit.intercept, fit.r_squared};
  } else {
    log << "scatter: " << xs.size() << " (model, language) points, no fit\n";
  }
  emit(plots / "scatter.svg", svg::render(scatter_chart));

  detail::update_manifest(config, written);
  log << "analysis: " << written.size() << " files under " << out.string() << "\n";
}

}  // namespace probekit
