#pragma once

// Model fixtures shared by the unit tests and the acceptance run.

#include <cmath>
#include <numbers>
#include <vector>

#include "steinrec/recursion.hpp"

namespace fixture {

using namespace steinrec;

inline RecursionModel clt_model() {
  const double h = 1.0 / std::numbers::sqrt2;
  return RecursionModel(CoefficientSchedule::constant({h, h}), DiscreteDistribution::rademacher(), NoPerturbation{});
}

inline TwoEffectModel clt_pair() { return {clt_model(), clt_model()}; }

/// Coefficients (c, ..., c) with k entries and sum of squares lambda^2.
inline std::vector<double> flat(int k, double lambda) {
  return std::vector<double>(static_cast<std::size_t>(k), lambda / std::sqrt(static_cast<double>(k)));
}

struct GapSpec {
  int k = 2;
  int l = 2;
  double lambda = 1.0;  // shared by both effects
  double ratio = 0.5;   // perturbation scale ratio rho
  double base_x = 0.3;
  double base_y = 0.2;
  DiscreteDistribution noise = DiscreteDistribution::rademacher();
};

/// Two effects with geometric perturbations base * rho^n whose variances
/// converge: with q = rho^2 / lambda^2 the initial variances differ by
/// (bx^2 - by^2) Var(noise) / (lambda^2 (1 - q)), so
/// Var X_n - Var Y_n = (bx^2 - by^2) Var(noise) rho^{2n} / (lambda^2 (1 - q))
/// and the variance-gap condition holds at every level whenever
/// |bx^2 - by^2| / (1 - q) <= bx^2 + by^2.
inline TwoEffectModel gap_pair(const GapSpec& s) {
  const double vd = central_moment(s.noise, 2);
  const double q = s.ratio * s.ratio / (s.lambda * s.lambda);
  const double shift = (s.base_x * s.base_x - s.base_y * s.base_y) * vd / (s.lambda * s.lambda * (1.0 - q));
  const double vx = 1.0 + std::max(0.0, -shift);
  const double vy = vx + shift;
  const auto r = DiscreteDistribution::rademacher();
  return {RecursionModel(CoefficientSchedule::constant(flat(s.k, s.lambda)), affine(r, std::sqrt(vx), 0.0),
                         IndependentPerturbation{s.noise, {s.base_x, s.ratio}}),
          RecursionModel(CoefficientSchedule::constant(flat(s.l, s.lambda)), affine(r, std::sqrt(vy), 0.0),
                         IndependentPerturbation{s.noise, {s.base_y, s.ratio}})};
}

/// Fixtures satisfying the variance-gap condition at every level.
inline std::vector<GapSpec> gap_specs() {
  const DiscreteDistribution three({-1.0, 0.0, 2.0}, {0.4, 0.4, 0.2});
  return {
      {2, 2, 1.0, 0.5, 0.3, 0.2, DiscreteDistribution::rademacher()},
      {2, 3, 1.0, 0.5, 0.3, 0.3, DiscreteDistribution::rademacher()},
      {3, 2, 1.0, 0.7, 0.25, 0.2, DiscreteDistribution::rademacher()},
      {2, 2, 1.2, 0.6, 0.4, 0.35, DiscreteDistribution::rademacher()},
      {4, 2, 0.9, 0.5, 0.2, 0.3, DiscreteDistribution::rademacher()},
      {2, 4, 1.5, 0.8, 0.5, 0.45, three},
      {3, 3, 1.0, 0.45, 0.6, 0.5, three},
      {2, 5, 1.1, 0.9, 0.1, 0.09, three},
      {5, 3, 0.8, 0.4, 0.3, 0.25, DiscreteDistribution({-2.0, 1.0}, {1.0 / 3, 2.0 / 3})},
      {2, 2, 2.0, 1.0, 1.0, 0.9, DiscreteDistribution({-2.0, 1.0}, {1.0 / 3, 2.0 / 3})},
      {3, 4, 1.3, 0.6, 0.7, 0.7, DiscreteDistribution::rademacher()},
      {2, 3, 0.95, 0.6, 0.15, 0.12, three},
  };
}

}  // namespace fixture
