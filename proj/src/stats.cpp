#include "probekit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "probekit/error.hpp"

namespace probekit {

namespace {

constexpr double kBetaTolerance = 1e-10;
constexpr int kBetaMaxIter = 500;
constexpr double kClampP = 1e-15;

// Continued fraction for I_x(a, b), modified Lentz.
double beta_continued_fraction(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kBetaMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kBetaTolerance) return h;
  }
  throw NumericError("incomplete_beta: continued fraction did not converge");
}

bool constant(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); });
}

// A constant sample gets its value back exactly, not a rounded sum / n.
double mean_of(std::span<const double> xs) {
  if (constant(xs)) return xs.front();
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_variance(std::span<const double> xs, double mean) {
  if (constant(xs)) return 0.0;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(xs.size() - 1);
}

TTestResult finish(double t, double df, double mean_a, double mean_b) {
  TTestResult r;
  r.t_statistic = t;
  r.degrees_of_freedom = df;
  r.mean_a = mean_a;
  r.mean_b = mean_b;
  const double lower = student_t_cdf(t, df);
  r.p_less = lower;
  r.p_greater = 1.0 - lower;
  r.p_two_sided = std::min(1.0, 2.0 * std::min(r.p_greater, r.p_less));
  return r;
}

// Both samples have zero spread.
TTestResult zero_variance(double mean_a, double mean_b, double df) {
  TTestResult r;
  r.mean_a = mean_a;
  r.mean_b = mean_b;
  r.degrees_of_freedom = df;
  if (mean_a == mean_b) return r;  // t = 0, p = 1
  r.infinite_t = true;
  r.t_statistic = mean_a > mean_b ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
  r.p_two_sided = 0.0;
  r.p_greater = mean_a > mean_b ? 0.0 : 1.0;
  r.p_less = 1.0 - r.p_greater;
  return r;
}

}  // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_cdf_inverse(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_cdf_inverse: p must lie in (0, 1)");

  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double z;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    z = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    z = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    z = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  // Newton on Phi(z) - p; in the upper tail work with the complement to keep digits.
  const double density = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  if (density > 0.0) {
    const double err = p > 0.5 ? (1.0 - p) - normal_cdf(-z) : normal_cdf(z) - p;
    z -= err / density;
  }
  return z;
}

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw std::domain_error("incomplete_beta: a and b must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) throw std::domain_error("student_t_cdf: df must be positive");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double x = df / (df + t * t);
  const double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, x);
  return t > 0.0 ? 1.0 - tail : tail;
}

TTestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw DataError("welch_t_test: each sample needs at least two values");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double ma = mean_of(a), mb = mean_of(b);
  const double va = sample_variance(a, ma) / na, vb = sample_variance(b, mb) / nb;
  const double se2 = va + vb;
  if (se2 == 0.0) return zero_variance(ma, mb, na + nb - 2.0);
  const double df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  return finish((ma - mb) / std::sqrt(se2), df, ma, mb);
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("paired_t_test: samples differ in length");
  if (a.size() < 2) throw DataError("paired_t_test: need at least two pairs");
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  const double n = static_cast<double>(diff.size());
  const double md = mean_of(diff);
  const double se2 = sample_variance(diff, md) / n;
  const double ma = mean_of(a), mb = mean_of(b);
  if (se2 == 0.0) {
    auto r = zero_variance(md, 0.0, n - 1.0);
    r.mean_a = ma;
    r.mean_b = mb;
    return r;
  }
  return finish(md / std::sqrt(se2), n - 1.0, ma, mb);
}

CombinedTest stouffer_combine(std::span<const double> p_values) {
  if (p_values.empty()) throw DataError("stouffer_combine: no p-values");
  CombinedTest out;
  double sum = 0.0;
  for (double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) throw DataError("stouffer_combine: p-value outside [0, 1]");
    const double clamped = std::clamp(p, kClampP, 1.0 - kClampP);
    out.clamped = out.clamped || clamped != p;
    out.p_values.push_back(clamped);
    sum += normal_cdf_inverse(1.0 - clamped);
  }
  out.z = sum / std::sqrt(static_cast<double>(p_values.size()));
  out.p = normal_cdf(-out.z);
  return out;
}

CorrelationResult linear_fit(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw DataError("linear_fit: xs and ys differ in length");
  if (xs.size() < 3) throw DataError("linear_fit: need at least three points");
  const double mx = mean_of(xs), my = mean_of(ys);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx == 0.0) throw DataError("linear_fit: xs have zero variance");
  CorrelationResult r;
  r.n_points = xs.size();
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  r.r = syy == 0.0 ? 0.0 : std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  r.r_squared = r.r * r.r;
  return r;
}

std::string significance_stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.05) return "*";
  return "";
}

}  // namespace probekit
