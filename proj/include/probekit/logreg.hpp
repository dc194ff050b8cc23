#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace probekit {

struct LogRegConfig {
  double l2_lambda = 1.0;   // penalty on weights only, bias unpenalized
  double tolerance = 1e-6;  // on the gradient infinity-norm
  int max_iter = 1000;
};

/// Binary logistic-regression probe. Label 1 is the positive class.
struct ProbeClassifier {
  Eigen::VectorXd weights;
  double bias = 0.0;
  double l2_lambda = 0.0;
  bool converged = false;
  int n_iterations = 0;
  double gradient_norm = 0.0;
  std::vector<double> loss_history;  // objective at the start and after every accepted step

  double decision(const Eigen::Ref<const Eigen::VectorXd>& x) const { return weights.dot(x) + bias; }
  double probability(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  int predict(const Eigen::Ref<const Eigen::VectorXd>& x) const { return decision(x) > 0.0 ? 1 : 0; }
  std::vector<int> predict(const Eigen::MatrixXd& X) const;
};

/// Objective: sum_i log(1 + exp(-s_i (w.x_i + b))) + lambda/2 |w|^2, s_i = +-1.
double logistic_objective(const Eigen::MatrixXd& X, std::span<const int> y, const Eigen::VectorXd& w, double b,
                          double l2_lambda);

/// Damped Newton with Armijo backtracking, so the objective never increases.
/// Throws DataError for fewer than two rows, a single class, label values
/// other than 0/1, mismatched sizes or non-finite features.
ProbeClassifier train_logreg(const Eigen::MatrixXd& X, std::span<const int> y, const LogRegConfig& config = {});

}  // namespace probekit
