#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "probekit/error.hpp"
#include "probekit/logreg.hpp"

using namespace probekit;

namespace {

Eigen::MatrixXd to_matrix(const oracle::Dataset2D& d) {
  Eigen::MatrixXd X(d.x.size(), 2);
  for (std::size_t i = 0; i < d.x.size(); ++i) X.row(i) << d.x[i][0], d.x[i][1];
  return X;
}

}  // namespace

TEST_SUITE("logreg") {

TEST_CASE("matches a grid-search minimizer of the same objective") {
  int agree = 0, total = 0;
  for (int s = 0; s < 30; ++s) {
    const auto d = oracle::random_blobs(1000 + s, 50);
    const auto X = to_matrix(d);
    const auto clf = train_logreg(X, d.y);
    CHECK(clf.converged);
    const auto ref = oracle::grid_search_logreg(d, 1.0);
    CHECK(clf.weights[0] == doctest::Approx(ref[0]).epsilon(1e-3));
    CHECK(clf.weights[1] == doctest::Approx(ref[1]).epsilon(1e-3));
    CHECK(clf.bias == doctest::Approx(ref[2]).epsilon(1e-3));
    CHECK(logistic_objective(X, d.y, clf.weights, clf.bias, 1.0) <=
          oracle::objective(d, ref[0], ref[1], ref[2], 1.0) + 1e-9);
    for (std::size_t i = 0; i < d.x.size(); ++i) {
      const double ours = clf.decision(X.row(i).transpose());
      const double theirs = ref[0] * d.x[i][0] + ref[1] * d.x[i][1] + ref[2];
      agree += (ours > 0) == (theirs > 0);
      ++total;
    }
  }
  CHECK(double(agree) / total >= 0.98);
}

TEST_CASE("loss never increases") {
  for (int s = 0; s < 30; ++s) {
    const auto d = oracle::random_blobs(2000 + s, 50);
    const auto clf = train_logreg(to_matrix(d), d.y, {0.01, 1e-10, 1000});
    REQUIRE(clf.loss_history.size() >= 2);
    for (std::size_t k = 1; k < clf.loss_history.size(); ++k) CHECK(clf.loss_history[k] <= clf.loss_history[k - 1]);
  }
}

TEST_CASE("separable data stays finite under the penalty") {
  Eigen::MatrixXd X(4, 1);
  X << -2, -1, 1, 2;
  const std::vector<int> y{0, 0, 1, 1};
  const auto clf = train_logreg(X, y);
  CHECK(clf.converged);
  CHECK(std::isfinite(clf.weights[0]));
  CHECK(clf.predict(X) == y);
  CHECK(clf.gradient_norm <= 1e-6);
  CHECK(clf.probability(Eigen::VectorXd::Constant(1, 0.0)) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("known one-dimensional optimum") {
  // Symmetric data: b = 0, and w solves w = sum x_i s_i sigma(-w x_i s_i) / lambda.
  Eigen::MatrixXd X(2, 1);
  X << -1, 1;
  const std::vector<int> y{0, 1};
  const auto clf = train_logreg(X, y, {1.0, 1e-12, 100});
  const double w = clf.weights[0];
  CHECK(clf.bias == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(w == doctest::Approx(2.0 / (1.0 + std::exp(w))).epsilon(1e-10));
}

TEST_CASE("input errors") {
  Eigen::MatrixXd X(3, 2);
  X.setRandom();
  CHECK_THROWS_AS(train_logreg(X, std::vector<int>{1, 1, 1}), DataError);
  CHECK_THROWS_AS(train_logreg(X, std::vector<int>{0, 1, 2}), DataError);
  CHECK_THROWS_AS(train_logreg(X, std::vector<int>{0, 1}), DataError);
  CHECK_THROWS_AS(train_logreg(Eigen::MatrixXd(1, 2), std::vector<int>{1}), DataError);
  X(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(train_logreg(X, std::vector<int>{0, 1, 0}), DataError);
}

}  // TEST_SUITE
