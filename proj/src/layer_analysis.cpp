#include "probekit/layer_analysis.hpp"

#include <algorithm>
#include <cmath>

#include "probekit/error.hpp"

namespace probekit {

SaturationResult saturation_layer(const LayerCurve& curve, double threshold_ratio) {
  if (curve.values.empty()) throw DataError("saturation_layer: empty curve '" + curve.curve_id + "'");
  SaturationResult r;
  r.threshold_ratio = threshold_ratio;
  const auto peak_it = std::max_element(curve.values.begin(), curve.values.end());  // first max
  r.maximum_layer = static_cast<std::size_t>(peak_it - curve.values.begin());
  r.peak_value = *peak_it;
  if (!(r.peak_value > 0.0)) {
    r.degenerate = true;
    return r;
  }
  const double threshold = threshold_ratio * r.peak_value;
  for (std::size_t l = 0; l < curve.values.size(); ++l) {
    if (curve.values[l] >= threshold) {
      r.saturation_layer = l;
      break;
    }
  }
  return r;
}

LayerCurve aggregate_curves(std::span<const LayerCurve> curves, std::string curve_id) {
  if (curves.empty()) throw DataError("aggregate_curves: no curves");
  const std::size_t L = curves.front().n_layers();
  for (const auto& c : curves) {
    if (c.n_layers() != L) {
      throw DataError("aggregate_curves: curve '" + c.curve_id + "' has " + std::to_string(c.n_layers()) +
                      " layers, expected " + std::to_string(L));
    }
  }
  LayerCurve out;
  out.curve_id = std::move(curve_id);
  out.values.assign(L, 0.0);
  out.stds.assign(L, 0.0);
  const double k = static_cast<double>(curves.size());
  for (std::size_t l = 0; l < L; ++l) {
    double sum = 0.0;
    for (const auto& c : curves) sum += c.values[l];
    const double mean = sum / k;
    double ss = 0.0;
    for (const auto& c : curves) ss += (c.values[l] - mean) * (c.values[l] - mean);
    out.values[l] = mean;
    out.stds[l] = std::sqrt(ss / k);
  }
  return out;
}

DifferenceCurve difference_curve(const LayerCurve& a, const LayerCurve& b, std::string curve_id) {
  if (a.n_layers() != b.n_layers() || a.stds.size() != a.n_layers() || b.stds.size() != b.n_layers()) {
    throw DataError("difference_curve: '" + a.curve_id + "' and '" + b.curve_id + "' differ in length");
  }
  DifferenceCurve d;
  d.curve_id = std::move(curve_id);
  d.values.resize(a.n_layers());
  d.std_diff.resize(a.n_layers());
  for (std::size_t l = 0; l < a.n_layers(); ++l) {
    d.values[l] = a.values[l] - b.values[l];
    d.std_diff[l] = std::hypot(a.stds[l], b.stds[l]);
  }
  return d;
}

LayerCurve curve_from_scores(std::span<const ProbeScore> scores, const std::string& task_id) {
  std::vector<const ProbeScore*> by_layer;
  for (const auto& s : scores) {
    if (s.task_id != task_id) continue;
    if (s.layer >= by_layer.size()) by_layer.resize(s.layer + 1, nullptr);
    if (by_layer[s.layer]) throw DataError("task " + task_id + " has two scores for layer " + std::to_string(s.layer));
    by_layer[s.layer] = &s;
  }
  if (by_layer.empty()) throw DataError("no scores for task " + task_id);
  LayerCurve c;
  c.curve_id = task_id;
  for (std::size_t l = 0; l < by_layer.size(); ++l) {
    if (!by_layer[l]) throw DataError("task " + task_id + " is missing layer " + std::to_string(l));
    const auto& s = *by_layer[l];
    c.values.push_back(s.normalized_perf);
    c.stds.push_back(s.degenerate ? 0.0 : s.raw_f1_std / (1.0 - s.baseline_f1));
  }
  return c;
}

}  // namespace probekit
