#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "probekit/activation_store.hpp"
#include "probekit/error.hpp"
#include "probekit/probe.hpp"

using namespace probekit;

namespace {

std::vector<std::string> pair_ids(int n) {
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) ids.push_back("p" + std::to_string(i));
  return ids;
}

ProbeRows noise_rows(int n_pairs, int dim, std::uint64_t seed, double shift = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  ProbeRows rows;
  rows.X.resize(2 * n_pairs, dim);
  for (int i = 0; i < n_pairs; ++i) {
    for (int r = 0; r < 2; ++r) {
      rows.y.push_back(r == 0 ? 1 : 0);
      rows.groups.push_back("p" + std::to_string(i));
      for (int j = 0; j < dim; ++j) rows.X(2 * i + r, j) = g(rng) + (j == 0 ? (r == 0 ? shift : -shift) : 0.0);
    }
  }
  return rows;
}

}  // namespace

TEST_SUITE("probe") {

TEST_CASE("f1 by hand") {
  const std::vector<int> pred{1, 1, 0, 0, 1}, gold{1, 0, 0, 1, 1};
  CHECK(f1_score(pred, gold) == doctest::Approx(2.0 / 3.0));
  CHECK(f1_score(pred, gold, F1Mode::Macro) == doctest::Approx(7.0 / 12.0));
  const std::vector<int> none{0, 0, 0, 0, 0};
  CHECK(f1_score(none, gold) == 0.0);
  CHECK(f1_score(gold, gold) == 1.0);
  CHECK_THROWS_AS(f1_score(std::vector<int>{1}, gold), DataError);
  CHECK(parse_f1_mode("macro") == F1Mode::Macro);
  CHECK_THROWS_AS(parse_f1_mode("micro"), UsageError);
}

TEST_CASE("normalized performance identities") {
  CHECK(normalized_perf(0.9, 0.5).value == 0.8);
  for (double b : {0.0, 0.3, 0.7}) {
    CHECK(normalized_perf(1.0, b).value == 1.0);
    CHECK(normalized_perf(b, b).value == 0.0);
    CHECK(!normalized_perf(b, b).degenerate);
  }
  CHECK(normalized_perf(0.9, 1.0 - 1e-9).degenerate);
  CHECK(normalized_perf(0.9, 1.0 - 1e-9).value == 0.0);
  CHECK(!normalized_perf(0.9, 1.0 - 2e-9).degenerate);
  CHECK(normalized_perf(0.2, 0.6).value == doctest::Approx(-1.0));
}

TEST_CASE("fold plan keeps pairs together and balances folds") {
  const auto ids = pair_ids(103);
  const auto plan = make_fold_plan(ids, 5, 42);
  std::map<int, int> sizes;
  for (const auto& id : ids) ++sizes[plan.fold_of(id)];
  CHECK(sizes.size() == 5);
  int lo = 1000, hi = 0;
  for (auto [f, n] : sizes) lo = std::min(lo, n), hi = std::max(hi, n);
  CHECK(hi - lo <= 1);

  std::vector<std::string> rows;
  for (const auto& id : ids) rows.insert(rows.end(), {id, id});
  CHECK(check_fold_plan(plan, rows).empty());
  rows.push_back("stranger");
  CHECK(!check_fold_plan(plan, rows).empty());

  auto reversed = ids;
  std::reverse(reversed.begin(), reversed.end());
  CHECK(make_fold_plan(reversed, 5, 42).assignment == plan.assignment);
  CHECK(make_fold_plan(ids, 5, 43).assignment != plan.assignment);

  CHECK_THROWS_AS(make_fold_plan(pair_ids(3), 5, 1), DataError);
  CHECK_THROWS_AS(make_fold_plan(ids, 1, 1), UsageError);
}

TEST_CASE("cross-validation is invariant to row order") {
  auto rows = noise_rows(60, 8, 5, 0.7);
  const auto plan = make_fold_plan(rows.groups, 5, 9);
  const auto a = crossval_f1(rows, plan, {});

  std::vector<int> perm(rows.y.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937(3));
  ProbeRows shuffled;
  shuffled.X.resize(rows.X.rows(), rows.X.cols());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    shuffled.X.row(i) = rows.X.row(perm[i]);
    shuffled.y.push_back(rows.y[perm[i]]);
    shuffled.groups.push_back(rows.groups[perm[i]]);
  }
  const auto b = crossval_f1(shuffled, plan, {});
  CHECK(a.fold_scores == b.fold_scores);
  CHECK(a.mean > 0.6);
  CHECK(a.fold_scores.size() == 5);

  double m = 0, v = 0;
  for (double s : a.fold_scores) m += s / 5;
  for (double s : a.fold_scores) v += (s - m) * (s - m) / 5;
  CHECK(a.mean == doctest::Approx(m));
  CHECK(a.std == doctest::Approx(std::sqrt(v)));
}

TEST_CASE("random baseline is reproducible and near chance on balanced pairs") {
  const auto rows = noise_rows(400, 4, 1);
  const auto plan = make_fold_plan(rows.groups, 5, 2);
  const auto a = random_baseline(rows.y, rows.groups, {32, 77}, plan, {});
  const auto b = random_baseline(rows.y, rows.groups, {32, 77}, plan, {});
  const auto c = random_baseline(rows.y, rows.groups, {32, 78}, plan, {});
  CHECK(a.fold_scores == b.fold_scores);
  CHECK(a.fold_scores != c.fold_scores);
  CHECK(a.mean > 0.4);
  CHECK(a.mean < 0.6);
  CHECK_THROWS_AS(random_baseline(rows.y, rows.groups, {0, 1}, plan, {}), DataError);
}

TEST_CASE("random baseline on a 90/10 label split agrees with the reference") {
  // Reference: scikit-learn LogisticRegression(C=1, lbfgs) on standardized
  // N(0, I) features, 1000 singleton groups, 900 positives, dim 64, 5 folds;
  // mean binary F1 over 20 seeds = 0.94275 (per-seed sd 0.0017).
  std::vector<int> y(1000, 1);
  std::fill(y.begin() + 900, y.end(), 0);
  const auto groups = pair_ids(1000);
  double total = 0.0;
  for (int s = 0; s < 20; ++s) {
    const auto plan = make_fold_plan(groups, 5, 100 + s);
    total += random_baseline(y, groups, {64, static_cast<std::uint64_t>(500 + s)}, plan, {}).mean;
  }
  CHECK(total / 20 == doctest::Approx(0.94275).epsilon(0.005));
}

TEST_CASE("identical rows give the tie rule score") {
  ProbeRows rows;
  rows.X = Eigen::MatrixXd::Ones(40, 3);
  for (int i = 0; i < 20; ++i) {
    rows.y.insert(rows.y.end(), {1, 0});
    rows.groups.insert(rows.groups.end(), 2, "p" + std::to_string(i));
  }
  const auto r = crossval_f1(rows, make_fold_plan(rows.groups, 5, 1), {});
  // w = 0, b = 0, decision 0 predicts the negative class everywhere.
  CHECK(r.mean == 0.0);
  CHECK(r.std == 0.0);
}

TEST_CASE("single-class training split is a data error") {
  ProbeRows rows = noise_rows(10, 2, 3);
  std::fill(rows.y.begin(), rows.y.end(), 1);
  CHECK_THROWS_AS(crossval_f1(rows, make_fold_plan(rows.groups, 5, 1), {}), DataError);
}

TEST_CASE("seed derivation") {
  const auto s = derive_seed(7, "agr", 3, "baseline");
  CHECK(s == derive_seed(7, "agr", 3, "baseline"));
  std::set<std::uint64_t> seen{s, derive_seed(8, "agr", 3, "baseline"), derive_seed(7, "agr2", 3, "baseline"),
                               derive_seed(7, "agr", 4, "baseline"), derive_seed(7, "agr", 3, "folds"),
                               derive_seed(7, "agr", -1, "folds")};
  CHECK(seen.size() == 6);
  // Frozen so stored seeds stay meaningful across releases.
  CHECK(derive_seed(20240917, "synthetic_form_0", -1, "folds") == 0x42c990420f322b67ull);
}

TEST_CASE("probe on a planted signal") {
  SyntheticConfig cfg;
  cfg.n_pairs = 150;
  cfg.n_layers = 3;
  cfg.hidden_dim = 16;
  cfg.signal_layer = 2;
  cfg.seed = 4;
  cfg.task_id = "toy";
  const auto world = generate_synthetic(cfg);
  const auto store = ActivationStore::decode(encode_store(world.store));

  const auto noise = probe_task(world.dataset, store, "toy", 0, 11);
  const auto signal = probe_task(world.dataset, store, "toy", 2, 11);
  CHECK(signal.raw_f1_mean > 0.97);
  CHECK(signal.normalized_perf > 0.9);
  CHECK(std::fabs(noise.normalized_perf) < 0.3);
  CHECK(signal.n_pairs == 150);
  CHECK(signal.raw_fold_f1.size() == 5);
  CHECK(signal.normalized_perf == normalized_perf(signal.raw_f1_mean, signal.baseline_f1).value);
  CHECK(probe_task(world.dataset, store, "toy", 2, 11) == signal);

  // The baseline only depends on labels, groups, seed and dim.
  const auto layer = store.read_layer(2);
  auto rows = task_rows(world.dataset, store, "toy", layer);
  rows.X.setZero();
  rows.X(0, 0) = 1.0;
  CHECK(probe_rows(rows, "toy", 2, 11).baseline_fold_f1 == signal.baseline_fold_f1);

  CHECK_THROWS_AS(probe_task(world.dataset, store, "nope", 0, 11), DataError);
  auto extra = world.dataset;
  extra.push_back(extra.back());
  extra.back().pair_id = "ghost";
  CHECK_THROWS_AS(probe_task(extra, store, "toy", 0, 11), DataError);
}

}  // TEST_SUITE
