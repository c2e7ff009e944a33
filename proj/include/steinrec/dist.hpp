#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace steinrec {

/// Values closer than this are treated as the same atom / breakpoint.
inline constexpr double kMergeTolerance = 1e-12;

/// Finite atomic law. Atoms strictly increasing, probabilities in (0, 1]
/// summing to one within 1e-12.
class DiscreteDistribution {
 public:
  /// Validating constructor; stores the input as given (no sorting, merging
  /// or renormalization). Use make_discrete() for raw input.
  DiscreteDistribution(std::vector<double> atoms, std::vector<double> probs);

  static DiscreteDistribution point_mass(double x);
  static DiscreteDistribution rademacher();

  std::span<const double> atoms() const noexcept { return atoms_; }
  std::span<const double> probs() const noexcept { return probs_; }
  std::size_t size() const noexcept { return atoms_.size(); }
  double min() const noexcept { return atoms_.front(); }
  double max() const noexcept { return atoms_.back(); }

  double mean() const;
  double variance() const;
  /// E X^p, p >= 0.
  double raw_moment(int p) const;

  /// Right-continuous CDF.
  double cdf(double t) const;
  /// Right-continuous generalized inverse inf{x : F(x) > v}; at a jump
  /// level the larger atom wins.
  double quantile(double v) const;

  friend bool operator==(const DiscreteDistribution&, const DiscreteDistribution&) = default;

 private:
  std::vector<double> atoms_;
  std::vector<double> probs_;
  std::vector<double> cumulative_;
};

/// Continuous law whose CDF is linear between breakpoints and constant
/// (0 or 1) outside them.
class PiecewiseLinearCDF {
 public:
  PiecewiseLinearCDF(std::vector<double> breakpoints, std::vector<double> cdf_values);

  /// Uniform law on [a, b].
  static PiecewiseLinearCDF uniform(double a, double b);

  std::span<const double> breakpoints() const noexcept { return x_; }
  std::span<const double> cdf_values() const noexcept { return f_; }
  double min() const noexcept { return x_.front(); }
  double max() const noexcept { return x_.back(); }

  double cdf(double t) const;
  /// inf{x : F(x) > v}; right end of a flat stretch at level v.
  double quantile(double v) const;

  /// E X^p computed segment by segment (each segment is uniform).
  double raw_moment(int p) const;
  double mean() const { return raw_moment(1); }
  double variance() const;

  /// Law of c * X.  c may be negative (reflects the law); c == 0 throws.
  PiecewiseLinearCDF scaled(double c) const;

  friend bool operator==(const PiecewiseLinearCDF&, const PiecewiseLinearCDF&) = default;

 private:
  std::vector<double> x_;
  std::vector<double> f_;
};

struct SeedProvenance {
  std::uint64_t master_seed = 0;
  std::uint64_t stream = 0;
  friend bool operator==(const SeedProvenance&, const SeedProvenance&) = default;
};

/// Sorted Monte Carlo sample; treated as an atomic law with weight 1/N.
class EmpiricalSample {
 public:
  EmpiricalSample(std::vector<double> values, SeedProvenance provenance = {});

  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  const SeedProvenance& provenance() const noexcept { return provenance_; }
  double min() const noexcept { return values_.front(); }
  double max() const noexcept { return values_.back(); }

  double mean() const;
  /// Variance of the empirical law (divisor N).
  double variance() const;
  double raw_moment(int p) const;
  double central_moment(int p) const;

  double cdf(double t) const;
  double quantile(double v) const;

  /// (x - mean) / sd with the sample's own moments. Needs N >= 2.
  EmpiricalSample standardized() const;

  friend bool operator==(const EmpiricalSample&, const EmpiricalSample&) = default;

 private:
  std::vector<double> values_;
  SeedProvenance provenance_;
};

struct StandardNormal {
  double cdf(double t) const;
  double quantile(double v) const;
  double raw_moment(int p) const;
  friend bool operator==(const StandardNormal&, const StandardNormal&) = default;
};

using Law = std::variant<DiscreteDistribution, PiecewiseLinearCDF, EmpiricalSample, StandardNormal>;

/// Sorts, drops zero weights, merges values within kMergeTolerance and
/// normalizes. Idempotent on its own output.
DiscreteDistribution make_discrete(std::span<const double> values, std::span<const double> weights);

/// E (X - EX)^p for p in 1..4.
double central_moment(const DiscreteDistribution& d, int p);

/// (X - EX) / sd; throws Errc::degenerate for zero variance.
DiscreteDistribution standardize(const DiscreteDistribution& d);

/// Law of c * X + shift.
DiscreteDistribution affine(const DiscreteDistribution& d, double c, double shift = 0.0);

/// Law of X + Y for independent X, Y. Throws Errc::cap_exceeded when
/// |X| * |Y| exceeds atom_cap.
DiscreteDistribution convolve(const DiscreteDistribution& a, const DiscreteDistribution& b,
                              std::size_t atom_cap = 1'000'000);

double cdf_eval(const Law& law, double t);
double quantile_eval(const Law& law, double v);

}  // namespace steinrec
