#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "steinrec/dist.hpp"

namespace steinrec {

/// Zero-bias law of a mean-zero atomic law X with variance s2: the law with
/// density x -> E[X 1(X > x)] / s2, which is constant between consecutive
/// atoms. Throws Errc::nonzero_mean or Errc::degenerate.
PiecewiseLinearCDF zero_bias(const DiscreteDistribution& d);

/// A law together with its zero-bias law, paired through one shared uniform.
struct ZeroBiasCoupling {
  DiscreteDistribution base;
  PiecewiseLinearCDF biased;

  static ZeroBiasCoupling of(const DiscreteDistribution& d);
};

struct CoupledPair {
  double x;
  double x_star;
};

/// (F^-1(v), F*^-1(v)) with right-continuous inverses. v must lie in (0, 1).
CoupledPair couple_inverse_cdf(const ZeroBiasCoupling& c, double v);

struct SumComponent {
  double coefficient;
  DiscreteDistribution law;  // mean 0, variance 1
};

/// U = sum_i (alpha_i / lambda) xi_i with lambda^2 = sum_i alpha_i^2.
class SumComponents {
 public:
  explicit SumComponents(std::vector<SumComponent> entries);

  std::span<const SumComponent> entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  double lambda() const noexcept { return lambda_; }
  /// alpha_i / lambda
  double scaled_coefficient(std::size_t i) const { return entries_[i].coefficient / lambda_; }
  /// P(I = i) = alpha_i^2 / lambda^2
  double index_weight(std::size_t i) const;

 private:
  std::vector<SumComponent> entries_;
  double lambda_ = 0.0;
};

/// Atomic law of U itself (full convolution).
DiscreteDistribution sum_law(const SumComponents& s, std::size_t atom_cap = 1'000'000);

/// Law of U* = U - (alpha_I / lambda)(xi_I* - xi_I), assembled as the
/// mixture over I of (scaled xi_I*) convolved with the atomic law of the
/// remaining terms. Throws Errc::cap_exceeded when the projected number of
/// breakpoints exceeds breakpoint_cap.
PiecewiseLinearCDF sum_zero_bias_exact(const SumComponents& s, std::size_t breakpoint_cap = 1'000'000);

/// Draws (U, U*) from explicit uniforms. Holds the per-component couplings so
/// repeated draws do not rebuild zero-bias laws.
class SumZeroBiasSampler {
 public:
  explicit SumZeroBiasSampler(const SumComponents& s);

  std::size_t dimension() const noexcept { return couplings_.size(); }

  /// u holds one uniform per component; the selector picks I through the
  /// cumulative index weights.
  CoupledPair draw(std::span<const double> u, double selector) const;

  std::size_t select_index(double selector) const;

 private:
  std::vector<ZeroBiasCoupling> couplings_;
  std::vector<double> coef_;
  std::vector<double> cumulative_;
};

CoupledPair sum_zero_bias_sample(const SumComponents& s, std::span<const double> u, double selector);

}  // namespace steinrec
