#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. None of them share code with the library.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace oracle {

struct Dataset2D {
  std::vector<std::array<double, 2>> x;
  std::vector<int> y;
};

/// Two overlapping Gaussian blobs with a random mean offset and direction.
inline Dataset2D random_blobs(std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double angle = 6.283185307179586 * u(rng);
  const double gap = 0.3 + 1.5 * u(rng);
  const double cx = 2.0 * u(rng) - 1.0, cy = 2.0 * u(rng) - 1.0;
  Dataset2D d;
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    const double s = label ? 1.0 : -1.0;
    d.x.push_back({cx + s * gap * std::cos(angle) + g(rng), cy + s * gap * std::sin(angle) + g(rng)});
    d.y.push_back(label);
  }
  return d;
}

inline double objective(const Dataset2D& d, double w0, double w1, double b, double lambda) {
  double f = 0.5 * lambda * (w0 * w0 + w1 * w1);
  for (std::size_t i = 0; i < d.x.size(); ++i) {
    const double m = (d.y[i] ? 1.0 : -1.0) * (w0 * d.x[i][0] + w1 * d.x[i][1] + b);
    f += m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
  }
  return f;
}

/// Derivative-free minimizer: evaluate a dense 21^3 grid, re-centre on the
/// best point, halve the box and repeat. The objective is convex, so the
/// shrinking box keeps the minimum inside.
inline std::array<double, 3> grid_search_logreg(const Dataset2D& d, double lambda) {
  std::array<double, 3> centre{0.0, 0.0, 0.0};
  double half = 12.0;
  constexpr int kSteps = 21;
  for (int round = 0; round < 22; ++round) {
    std::array<double, 3> best = centre;
    double best_f = objective(d, centre[0], centre[1], centre[2], lambda);
    const double step = 2.0 * half / (kSteps - 1);
    for (int i = 0; i < kSteps; ++i)
      for (int j = 0; j < kSteps; ++j)
        for (int k = 0; k < kSteps; ++k) {
          const double w0 = centre[0] - half + i * step;
          const double w1 = centre[1] - half + j * step;
          const double b = centre[2] - half + k * step;
          const double f = objective(d, w0, w1, b, lambda);
          if (f < best_f) {
            best_f = f;
            best = {w0, w1, b};
          }
        }
    centre = best;
    half *= 0.5;
  }
  return centre;
}

}  // namespace oracle
