#include "probekit/logreg.hpp"

#include <cmath>
#include <string>

#include "probekit/error.hpp"

namespace probekit {

namespace {

// log(1 + exp(-m)) without overflow.
double softplus_neg(double m) { return (m < 0.0 ? -m : 0.0) + std::log1p(std::exp(-std::abs(m))); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

double ProbeClassifier::probability(const Eigen::Ref<const Eigen::VectorXd>& x) const { return sigmoid(decision(x)); }

std::vector<int> ProbeClassifier::predict(const Eigen::MatrixXd& X) const {
  const Eigen::VectorXd z = (X * weights).array() + bias;
  std::vector<int> out(static_cast<std::size_t>(z.size()));
  for (Eigen::Index i = 0; i < z.size(); ++i) out[static_cast<std::size_t>(i)] = z[i] > 0.0 ? 1 : 0;
  return out;
}

double logistic_objective(const Eigen::MatrixXd& X, std::span<const int> y, const Eigen::VectorXd& w, double b,
                          double l2_lambda) {
  const Eigen::VectorXd z = (X * w).array() + b;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double s = y[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
    loss += softplus_neg(s * z[i]);
  }
  return loss + 0.5 * l2_lambda * w.squaredNorm();
}

ProbeClassifier train_logreg(const Eigen::MatrixXd& X, std::span<const int> y, const LogRegConfig& config) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  if (static_cast<std::size_t>(n) != y.size()) throw DataError("train_logreg: X has " + std::to_string(n) + " rows but y has " + std::to_string(y.size()));
  if (n < 2) throw DataError("train_logreg: need at least two samples");
  if (config.l2_lambda < 0.0) throw DataError("train_logreg: l2_lambda must be >= 0");
  if (!X.allFinite()) throw DataError("train_logreg: non-finite feature value");
  Eigen::Index positives = 0;
  for (int label : y) {
    if (label != 0 && label != 1) throw DataError("train_logreg: labels must be 0 or 1");
    positives += label;
  }
  if (positives == 0 || positives == n) throw DataError("train_logreg: training data contains a single class");

  const double lambda = config.l2_lambda;
  Eigen::VectorXd yv(n);
  for (Eigen::Index i = 0; i < n; ++i) yv[i] = y[static_cast<std::size_t>(i)];

  // theta = [w; b]
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd p(n), grad(d + 1), step(d + 1);
  Eigen::MatrixXd hess(d + 1, d + 1);

  auto objective_at = [&](const Eigen::VectorXd& t, Eigen::VectorXd& z_out) {
    z_out.noalias() = X * t.head(d);
    z_out.array() += t[d];
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) loss += softplus_neg((yv[i] > 0.5 ? 1.0 : -1.0) * z_out[i]);
    return loss + 0.5 * lambda * t.head(d).squaredNorm();
  };

  ProbeClassifier clf;
  clf.l2_lambda = lambda;
  double loss = objective_at(theta, z);
  clf.loss_history.push_back(loss);

  Eigen::VectorXd z_trial(n);
  Eigen::VectorXd trial(d + 1);
  int iter = 0;
  for (;; ++iter) {
    for (Eigen::Index i = 0; i < n; ++i) p[i] = sigmoid(z[i]);
    const Eigen::VectorXd resid = p - yv;
    grad.head(d).noalias() = X.transpose() * resid;
    grad.head(d) += lambda * theta.head(d);
    grad[d] = resid.sum();
    clf.gradient_norm = grad.lpNorm<Eigen::Infinity>();
    if (clf.gradient_norm <= config.tolerance) {
      clf.converged = true;
      break;
    }
    if (iter >= config.max_iter) break;

    const Eigen::VectorXd wts = (p.array() * (1.0 - p.array())).matrix();
    const Eigen::MatrixXd Xw = X.array().colwise() * wts.array();
    hess.topLeftCorner(d, d).noalias() = X.transpose() * Xw;
    hess.topLeftCorner(d, d).diagonal().array() += lambda;
    hess.topRightCorner(d, 1) = Xw.colwise().sum().transpose();
    hess.bottomLeftCorner(1, d) = hess.topRightCorner(d, 1).transpose();
    hess(d, d) = wts.sum();

    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    step = ldlt.solve(grad);
    double slope = grad.dot(step);
    if (ldlt.info() != Eigen::Success || !step.allFinite() || !(slope > 0.0)) {
      // Singular Hessian (lambda = 0 on separable data): fall back to gradient descent.
      step = grad;
      slope = grad.squaredNorm();
    }

    double t = 1.0;
    bool accepted = false;
    for (int k = 0; k < 60; ++k, t *= 0.5) {
      trial = theta - t * step;
      const double trial_loss = objective_at(trial, z_trial);
      if (trial_loss <= loss - 1e-4 * t * slope) {
        theta.swap(trial);
        z.swap(z_trial);
        loss = trial_loss;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // no representable decrease left
    clf.loss_history.push_back(loss);
  }

  clf.n_iterations = iter;
  clf.weights = theta.head(d);
  clf.bias = theta[d];
  if (!clf.weights.allFinite() || !std::isfinite(clf.bias)) throw NumericError("train_logreg: weights diverged");
  return clf;
}

}  // namespace probekit
