#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace probekit {

double normal_cdf(double z);

/// Acklam's rational approximation refined by one Newton step on Phi.
/// Throws std::domain_error unless 0 < p < 1.
double normal_cdf_inverse(double p);

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction
/// (relative tolerance 1e-10).
double incomplete_beta(double a, double b, double x);

/// P(T <= t) for Student's t with df degrees of freedom (df may be fractional).
double student_t_cdf(double t, double df);

struct TTestResult {
  double t_statistic = 0.0;
  double degrees_of_freedom = 0.0;
  double p_two_sided = 1.0;
  double p_greater = 0.5;  // one-sided, H1: mean_A > mean_B
  double p_less = 0.5;     // one-sided, H1: mean_A < mean_B
  double mean_a = 0.0;
  double mean_b = 0.0;
  bool infinite_t = false;  // both samples constant with different means
};

/// Welch's unequal-variance t-test. Each sample needs at least two values.
TTestResult welch_t_test(std::span<const double> a, std::span<const double> b);

/// Paired t-test on a[i] - b[i].
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

struct CombinedTest {
  std::vector<double> p_values;  // after clamping
  double z = 0.0;
  double p = 1.0;
  bool clamped = false;  // some input was 0 or 1 and got pulled into [1e-15, 1 - 1e-15]
};

/// Stouffer's method for one-sided p-values testing the same direction:
/// Z = sum(PhiInv(1 - p_i)) / sqrt(k), p = 1 - Phi(Z).
CombinedTest stouffer_combine(std::span<const double> p_values);

struct CorrelationResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r = 0.0;
  double r_squared = 0.0;
  std::size_t n_points = 0;
};

/// Ordinary least squares y = slope * x + intercept with Pearson r.
/// Needs n >= 3 and non-constant xs. Constant ys give r = 0.
CorrelationResult linear_fit(std::span<const double> xs, std::span<const double> ys);

/// "***" for p < 0.001, "*" for p < 0.05, otherwise empty.
std::string significance_stars(double p);

}  // namespace probekit
