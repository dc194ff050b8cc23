#pragma once

// Per-(task, layer) minimal-pair probing: pair-aware cross-validation of a
// logistic-regression probe, the random-vector baseline, and the
// baseline-normalized score (raw - baseline) / (1 - baseline).

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "probekit/activation_store.hpp"
#include "probekit/corpus.hpp"
#include "probekit/logreg.hpp"

namespace probekit {

enum class F1Mode { Binary, Macro };

std::string_view to_string(F1Mode m);
F1Mode parse_f1_mode(std::string_view s);

/// F1 of the positive class (label 1 = acceptable sentence). Returns 0 when
/// precision + recall is 0. Macro mode averages the F1 of both classes.
double f1_score(std::span<const int> predictions, std::span<const int> labels, F1Mode mode = F1Mode::Binary);

/// Rows to probe. `groups` holds the fold unit of each row (the pair id), so
/// both members of a minimal pair always land in the same fold.
struct ProbeRows {
  Eigen::MatrixXd X;
  std::vector<int> y;
  std::vector<std::string> groups;
};

struct FoldPlan {
  int n_folds = 5;
  std::uint64_t seed = 0;
  std::map<std::string, int> assignment;  // group (pair_id) -> fold

  int fold_of(const std::string& group) const;
};

/// Groups are sorted, shuffled under `seed`, then dealt round-robin, so the
/// plan does not depend on the order the ids arrive in and fold sizes differ
/// by at most one group.
FoldPlan make_fold_plan(std::span<const std::string> groups, int n_folds, std::uint64_t seed);

/// Problems with a plan against a set of row groups: unassigned groups,
/// unbalanced folds. Empty when the plan is usable.
std::vector<std::string> check_fold_plan(const FoldPlan& plan, std::span<const std::string> row_groups);

struct ProbeConfig {
  LogRegConfig logreg;
  bool standardize = true;  // mean/variance from the training split only
  int n_folds = 5;
  F1Mode f1_mode = F1Mode::Binary;
};

struct CrossValResult {
  double mean = 0.0;
  double std = 0.0;  // population std over folds
  std::vector<double> fold_scores;
};

/// Train on the out-of-fold rows, score F1 on the fold. Rows are processed
/// in (group, label) order, so the result is invariant to row permutation.
/// Throws DataError when a training split holds a single class.
CrossValResult crossval_f1(const ProbeRows& rows, const FoldPlan& plan, const ProbeConfig& config);

struct RandomBaselineConfig {
  std::uint32_t dim = 0;  // must equal the hidden size of the store being compared
  std::uint64_t seed = 0;
};

/// Replaces every sentence vector with an i.i.d. N(0, I) draw and runs the
/// identical cross-validation. Its mean is the probe's own chance level.
CrossValResult random_baseline(std::span<const int> y, std::span<const std::string> groups,
                               const RandomBaselineConfig& baseline, const FoldPlan& plan,
                               const ProbeConfig& config);

struct NormalizedPerf {
  double value = 0.0;
  bool degenerate = false;  // baseline >= 1 - 1e-9; value forced to 0
};

inline constexpr double kBaselineEpsilon = 1e-9;

NormalizedPerf normalized_perf(double raw, double baseline);

/// Stable 64-bit seed for one purpose of one (task, layer) job.
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view task_id, std::int64_t layer,
                          std::string_view purpose);

struct ProbeScore {
  std::string task_id;
  std::uint32_t layer = 0;
  double raw_f1_mean = 0.0;
  double raw_f1_std = 0.0;
  double baseline_f1 = 0.0;
  double baseline_f1_std = 0.0;
  double normalized_perf = 0.0;
  bool degenerate = false;
  std::size_t n_pairs = 0;
  std::uint64_t seed = 0;  // global seed the job seeds were derived from
  std::vector<double> raw_fold_f1;
  std::vector<double> baseline_fold_f1;

  bool operator==(const ProbeScore&) const = default;
};

/// Rows of one task at one layer: pair order from the dataset, good then bad.
/// Throws DataError when a sentence is missing from the store.
ProbeRows task_rows(const Dataset& dataset, const ActivationStore& store, std::string_view task_id,
                    const LayerMatrix& layer);

/// One FoldPlan (seeded per task) is shared by the raw and baseline runs; the
/// baseline draw is seeded per (task, layer).
ProbeScore probe_task(const Dataset& dataset, const ActivationStore& store, std::string_view task_id,
                      std::uint32_t layer, std::uint64_t global_seed, const ProbeConfig& config = {});

/// Same as probe_task on rows already assembled from a layer matrix.
ProbeScore probe_rows(const ProbeRows& rows, std::string_view task_id, std::uint32_t layer,
                      std::uint64_t global_seed, const ProbeConfig& config = {});

}  // namespace probekit
