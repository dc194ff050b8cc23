#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "probekit/probe.hpp"

namespace probekit {

struct LayerCurve {
  std::string curve_id;
  std::vector<double> values;  // normalized performance per layer
  std::vector<double> stds;

  std::size_t n_layers() const { return values.size(); }
  bool operator==(const LayerCurve&) const = default;
};

struct SaturationResult {
  std::optional<std::size_t> saturation_layer;  // empty when degenerate
  std::size_t maximum_layer = 0;                // first argmax
  double peak_value = 0.0;
  double threshold_ratio = 0.95;
  bool degenerate = false;                      // peak <= 0
};

/// First layer reaching threshold_ratio * peak, and the earliest argmax.
/// No smoothing. Throws DataError on an empty curve.
SaturationResult saturation_layer(const LayerCurve& curve, double threshold_ratio = 0.95);

/// Per-layer unweighted mean across curves; stds are the population std of
/// the member values at each layer. Throws DataError on empty input or
/// unequal lengths.
LayerCurve aggregate_curves(std::span<const LayerCurve> curves, std::string curve_id = "aggregate");

struct DifferenceCurve {
  std::string curve_id;
  std::vector<double> values;    // A - B
  std::vector<double> std_diff;  // sqrt(std_A^2 + std_B^2)
};

DifferenceCurve difference_curve(const LayerCurve& a, const LayerCurve& b, std::string curve_id = "difference");

/// Normalized-performance curve for one task from its per-layer scores
/// (any order; every layer 0..L-1 must appear once). The per-layer std is the
/// fold std of raw F1 rescaled by 1 / (1 - baseline).
LayerCurve curve_from_scores(std::span<const ProbeScore> scores, const std::string& task_id);

}  // namespace probekit
