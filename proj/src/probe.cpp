#include "probekit/probe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "probekit/error.hpp"

namespace probekit {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xCBF29CE484222325ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

// Row order used for training and random draws: (group, label, original index).
std::vector<std::size_t> canonical_order(std::span<const int> y, std::span<const std::string> groups) {
  std::vector<std::size_t> order(y.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (groups[a] != groups[b]) return groups[a] < groups[b];
    return y[a] > y[b];
  });
  return order;
}

double population_std(std::span<const double> xs, double mean) {
  double acc = 0.0;
  for (double x : xs) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(xs.size()));
}

CrossValResult crossval_impl(const Eigen::MatrixXd& X, std::span<const int> y, std::span<const std::string> groups,
                             const FoldPlan& plan, const ProbeConfig& config) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (y.size() != n || groups.size() != n) throw DataError("crossval_f1: rows, labels and groups differ in length");
  if (n == 0) throw DataError("crossval_f1: no rows");
  const Eigen::Index d = X.cols();

  const auto order = canonical_order(y, groups);
  std::vector<int> fold(n);
  for (std::size_t i = 0; i < n; ++i) fold[i] = plan.fold_of(groups[i]);

  CrossValResult result;
  for (int k = 0; k < plan.n_folds; ++k) {
    std::vector<std::size_t> train, test;
    for (std::size_t i : order) (fold[i] == k ? test : train).push_back(i);
    if (test.empty()) throw DataError("crossval_f1: fold " + std::to_string(k) + " is empty");

    Eigen::MatrixXd Xtr(static_cast<Eigen::Index>(train.size()), d);
    std::vector<int> ytr(train.size());
    for (std::size_t r = 0; r < train.size(); ++r) {
      Xtr.row(static_cast<Eigen::Index>(r)) = X.row(static_cast<Eigen::Index>(train[r]));
      ytr[r] = y[train[r]];
    }
    const bool has_pos = std::find(ytr.begin(), ytr.end(), 1) != ytr.end();
    const bool has_neg = std::find(ytr.begin(), ytr.end(), 0) != ytr.end();
    if (!has_pos || !has_neg) {
      throw DataError("crossval_f1: training split for fold " + std::to_string(k) + " contains a single class");
    }

    Eigen::MatrixXd Xte(static_cast<Eigen::Index>(test.size()), d);
    std::vector<int> yte(test.size());
    for (std::size_t r = 0; r < test.size(); ++r) {
      Xte.row(static_cast<Eigen::Index>(r)) = X.row(static_cast<Eigen::Index>(test[r]));
      yte[r] = y[test[r]];
    }

    if (config.standardize) {
      const Eigen::RowVectorXd mean = Xtr.colwise().mean();
      Xtr.rowwise() -= mean;
      Eigen::RowVectorXd scale = (Xtr.colwise().squaredNorm() / static_cast<double>(Xtr.rows())).cwiseSqrt();
      for (Eigen::Index j = 0; j < d; ++j) {
        if (!(scale[j] > 1e-12)) scale[j] = 1.0;
      }
      Xtr.array().rowwise() /= scale.array();
      Xte.rowwise() -= mean;
      Xte.array().rowwise() /= scale.array();
    }

    const auto clf = train_logreg(Xtr, ytr, config.logreg);
    const auto pred = clf.predict(Xte);
    result.fold_scores.push_back(f1_score(pred, yte, config.f1_mode));
  }

  result.mean = std::accumulate(result.fold_scores.begin(), result.fold_scores.end(), 0.0) /
                static_cast<double>(result.fold_scores.size());
  result.std = population_std(result.fold_scores, result.mean);
  return result;
}

}  // namespace

std::string_view to_string(F1Mode m) { return m == F1Mode::Binary ? "binary" : "macro"; }

F1Mode parse_f1_mode(std::string_view s) {
  if (s == "binary") return F1Mode::Binary;
  if (s == "macro") return F1Mode::Macro;
  throw UsageError("unknown f1 mode '" + std::string(s) + "' (expected binary or macro)");
}

double f1_score(std::span<const int> predictions, std::span<const int> labels, F1Mode mode) {
  if (predictions.size() != labels.size()) throw DataError("f1_score: predictions and labels differ in length");
  if (predictions.empty()) throw DataError("f1_score: empty input");
  auto f1_for = [&](int positive) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const bool pred = predictions[i] == positive;
      const bool truth = labels[i] == positive;
      tp += pred && truth;
      fp += pred && !truth;
      fn += !pred && truth;
    }
    // 2PR/(P+R) == 2TP/(2TP+FP+FN); zero when nothing was predicted or present.
    const std::size_t denom = 2 * tp + fp + fn;
    return denom == 0 || tp == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  };
  if (mode == F1Mode::Binary) return f1_for(1);
  return 0.5 * (f1_for(1) + f1_for(0));
}

int FoldPlan::fold_of(const std::string& group) const {
  auto it = assignment.find(group);
  if (it == assignment.end()) throw DataError("fold plan has no assignment for '" + group + "'");
  return it->second;
}

FoldPlan make_fold_plan(std::span<const std::string> groups, int n_folds, std::uint64_t seed) {
  if (n_folds < 2) throw UsageError("fold plan: n_folds must be >= 2");
  std::vector<std::string> unique(groups.begin(), groups.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  if (unique.size() < static_cast<std::size_t>(n_folds)) {
    throw DataError("fold plan: " + std::to_string(unique.size()) + " pairs cannot fill " + std::to_string(n_folds) +
                    " folds");
  }
  std::mt19937_64 rng(seed);
  std::shuffle(unique.begin(), unique.end(), rng);

  FoldPlan plan;
  plan.n_folds = n_folds;
  plan.seed = seed;
  for (std::size_t i = 0; i < unique.size(); ++i) {
    plan.assignment.emplace(unique[i], static_cast<int>(i % static_cast<std::size_t>(n_folds)));
  }
  return plan;
}

std::vector<std::string> check_fold_plan(const FoldPlan& plan, std::span<const std::string> row_groups) {
  std::vector<std::string> problems;
  std::set<std::string> needed(row_groups.begin(), row_groups.end());
  std::vector<std::size_t> sizes(static_cast<std::size_t>(std::max(plan.n_folds, 0)), 0);
  for (const auto& [group, fold] : plan.assignment) {
    if (fold < 0 || fold >= plan.n_folds) {
      problems.push_back("group '" + group + "' has fold " + std::to_string(fold) + " out of range");
      continue;
    }
    if (needed.contains(group)) ++sizes[static_cast<std::size_t>(fold)];
  }
  for (const auto& g : needed) {
    if (!plan.assignment.contains(g)) problems.push_back("group '" + g + "' is not assigned");
  }
  if (!sizes.empty()) {
    const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
    if (*hi - *lo > 1) problems.push_back("fold sizes differ by more than one pair");
  }
  return problems;
}

CrossValResult crossval_f1(const ProbeRows& rows, const FoldPlan& plan, const ProbeConfig& config) {
  return crossval_impl(rows.X, rows.y, rows.groups, plan, config);
}

CrossValResult random_baseline(std::span<const int> y, std::span<const std::string> groups,
                               const RandomBaselineConfig& baseline, const FoldPlan& plan,
                               const ProbeConfig& config) {
  if (baseline.dim == 0) throw DataError("random_baseline: dim must be >= 1");
  if (y.size() != groups.size()) throw DataError("random_baseline: labels and groups differ in length");
  const auto order = canonical_order(y, groups);
  Eigen::MatrixXd R(static_cast<Eigen::Index>(y.size()), static_cast<Eigen::Index>(baseline.dim));
  std::mt19937_64 rng(baseline.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i : order) {
    for (Eigen::Index j = 0; j < R.cols(); ++j) R(static_cast<Eigen::Index>(i), j) = normal(rng);
  }
  return crossval_impl(R, y, groups, plan, config);
}

NormalizedPerf normalized_perf(double raw, double baseline) {
  if (baseline >= 1.0 - kBaselineEpsilon) return {0.0, true};
  return {(raw - baseline) / (1.0 - baseline), false};
}

std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view task_id, std::int64_t layer,
                          std::string_view purpose) {
  std::uint64_t h = splitmix64(global_seed);
  h = splitmix64(h ^ fnv1a(task_id));
  h = splitmix64(h ^ static_cast<std::uint64_t>(layer));
  return splitmix64(h ^ fnv1a(purpose));
}

ProbeRows task_rows(const Dataset& dataset, const ActivationStore& store, std::string_view task_id,
                    const LayerMatrix& layer) {
  std::vector<std::size_t> store_rows;
  ProbeRows rows;
  for (const auto& p : dataset) {
    if (p.task_id != task_id) continue;
    for (Role role : {Role::Good, Role::Bad}) {
      const SentenceId id{p.pair_id, role};
      const auto idx = store.find(id);
      if (!idx) throw DataError("sentence " + id.str() + " of task " + std::string(task_id) + " is missing from the store");
      store_rows.push_back(*idx);
      rows.y.push_back(role == Role::Good ? 1 : 0);
      rows.groups.push_back(p.pair_id);
    }
  }
  if (store_rows.empty()) throw DataError("task " + std::string(task_id) + " has no pairs in the dataset");
  rows.X.resize(static_cast<Eigen::Index>(store_rows.size()), static_cast<Eigen::Index>(layer.cols));
  for (std::size_t r = 0; r < store_rows.size(); ++r) {
    const auto src = layer.row(store_rows[r]);
    for (std::size_t j = 0; j < layer.cols; ++j) {
      rows.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = static_cast<double>(src[j]);
    }
  }
  return rows;
}

ProbeScore probe_rows(const ProbeRows& rows, std::string_view task_id, std::uint32_t layer,
                      std::uint64_t global_seed, const ProbeConfig& config) {
  const auto plan = make_fold_plan(rows.groups, config.n_folds, derive_seed(global_seed, task_id, -1, "folds"));
  const RandomBaselineConfig baseline{static_cast<std::uint32_t>(rows.X.cols()),
                                      derive_seed(global_seed, task_id, layer, "baseline")};

  const auto raw = crossval_f1(rows, plan, config);
  const auto base = random_baseline(rows.y, rows.groups, baseline, plan, config);
  const auto norm = normalized_perf(raw.mean, base.mean);

  ProbeScore s;
  s.task_id = std::string(task_id);
  s.layer = layer;
  s.raw_f1_mean = raw.mean;
  s.raw_f1_std = raw.std;
  s.baseline_f1 = base.mean;
  s.baseline_f1_std = base.std;
  s.normalized_perf = norm.value;
  s.degenerate = norm.degenerate;
  s.n_pairs = plan.assignment.size();
  s.seed = global_seed;
  s.raw_fold_f1 = raw.fold_scores;
  s.baseline_fold_f1 = base.fold_scores;
  return s;
}

ProbeScore probe_task(const Dataset& dataset, const ActivationStore& store, std::string_view task_id,
                      std::uint32_t layer, std::uint64_t global_seed, const ProbeConfig& config) {
  const auto matrix = store.read_layer(layer);
  return probe_rows(task_rows(dataset, store, task_id, matrix), task_id, layer, global_seed, config);
}

}  // namespace probekit
