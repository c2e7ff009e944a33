#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "steinrec/dist.hpp"

namespace steinrec {

/// n -> base * ratio^n
struct GeometricSchedule {
  double base = 0.0;
  double ratio = 1.0;

  double at(int n) const;
};

struct NoPerturbation {};

/// Delta_n = scale_n * D with D drawn independently of the copies.
struct IndependentPerturbation {
  DiscreteDistribution law;
  GeometricSchedule scale;
};

/// Delta_n = eps_n * (S^2 - 1/k), S the average of the k standardized
/// level-n copies. Mean zero by construction; illustrative only.
struct DependentQuadraticPerturbation {
  GeometricSchedule epsilon;
};

/// eps * (S^2 - 1/k) for the k standardized copies x.
double dependent_quadratic_delta(double eps, std::span<const double> standardized);

using PerturbationSpec = std::variant<NoPerturbation, IndependentPerturbation, DependentQuadraticPerturbation>;

/// Coefficient lists per level. Levels past the end of the list reuse the
/// last entry, which is also the limit the coefficients converge to.
class CoefficientSchedule {
 public:
  static CoefficientSchedule constant(std::vector<double> coefficients);
  static CoefficientSchedule per_level(std::vector<std::vector<double>> levels);

  std::span<const double> at(int n) const;
  std::span<const double> limit() const { return levels_.back(); }
  std::size_t k() const { return levels_.front().size(); }
  std::size_t explicit_levels() const { return levels_.size(); }

 private:
  explicit CoefficientSchedule(std::vector<std::vector<double>> levels) : levels_(std::move(levels)) {}
  std::vector<std::vector<double>> levels_;
};

struct PerturbationMoments {
  double mean = 0.0;
  double variance = 0.0;
  double mu4 = 0.0;
};

/// X_{n+1} = sum_i a_{n,i} X_{n,i} + Delta_n with X_{n,i} iid copies of X_n.
class RecursionModel {
 public:
  /// Validates k >= 2, equal-length finite coefficient lists, at least two
  /// nonzero limit coefficients, a non-constant initial law and a valid
  /// perturbation schedule.
  RecursionModel(CoefficientSchedule coefficients, DiscreteDistribution initial, PerturbationSpec perturbation);

  std::size_t k() const { return coefficients_.k(); }
  std::span<const double> coefficients(int n) const { return coefficients_.at(n); }
  const CoefficientSchedule& schedule() const { return coefficients_; }
  const DiscreteDistribution& initial() const { return initial_; }
  const PerturbationSpec& perturbation() const { return perturbation_; }

  bool dependent_perturbation() const;
  bool has_perturbation() const;

  /// lambda_{a,n}^2 = sum_i a_{n,i}^2
  double lambda_sq(int n) const;
  /// lambda_a of the limit coefficients.
  double lambda_limit() const;

  /// Exact moments of Delta_n. Throws Errc::unsupported for the dependent
  /// kind.
  PerturbationMoments perturbation_moments(int n) const;

 private:
  CoefficientSchedule coefficients_;
  DiscreteDistribution initial_;
  PerturbationSpec perturbation_;
};

/// The X and Y recursions; always driven by independent randomness.
struct TwoEffectModel {
  RecursionModel x;
  RecursionModel y;
};

/// Exact law of X_n by repeated scaled convolution. Each pairwise
/// convolution is refused (Errc::cap_exceeded) when it would produce more
/// than atom_cap candidate atoms.
DiscreteDistribution propagate_exact(const RecursionModel& m, int n, std::size_t atom_cap = 1'000'000);

/// Exact laws of X_0 .. X_n.
std::vector<DiscreteDistribution> propagate_exact_levels(const RecursionModel& m, int n,
                                                         std::size_t atom_cap = 1'000'000);

struct PoolOptions {
  std::size_t pool_size = 100'000;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;  // 0 for the x effect, 1 for y
  unsigned threads = 1;
};

/// Pools of approximate draws of X_0 .. X_n, each sorted. Level l+1 draw j
/// picks k members of level l uniformly with replacement and adds a
/// perturbation draw, all from the counter stream (seed, stream, l+1, j), so
/// the result does not depend on the thread count.
std::vector<EmpiricalSample> sample_pool_levels(const RecursionModel& m, int n, const PoolOptions& opt);

EmpiricalSample sample_pool(const RecursionModel& m, int n, const PoolOptions& opt);

/// Same evolution from an explicit level-0 pool.
std::vector<EmpiricalSample> evolve_pool(const RecursionModel& m, std::vector<double> level0, int n,
                                         const PoolOptions& opt);

struct MomentRow {
  double mean = 0.0;
  double variance = 0.0;
  double mu4 = 0.0;  // fourth central moment
};

/// Closed-form mean, variance and fourth central moment of X_0 .. X_{n_max}.
std::vector<MomentRow> moment_recursion(const RecursionModel& m, int n_max);

// ---------------------------------------------------------------------------
// Coupled decomposition Z~_{n+1} = r_x U_x + r_y U_y + Gamma_x + Gamma_y

enum class MomentSource { exact, pool_estimate };

using LevelSource = std::variant<DiscreteDistribution, EmpiricalSample>;

/// Draw from a level law: inverse CDF for atomic laws, uniform member for
/// pools.
double draw_from(const LevelSource& source, double u);

/// Law of X_n (or Y_n) plus the mean and variance used to standardize it.
struct LevelState {
  LevelSource source;
  double mean = 0.0;
  double variance = 0.0;
  MomentSource provenance = MomentSource::exact;
};

struct CoupledDecomposition {
  double z_tilde;
  double u;
  double u_x;
  double u_y;
  double gamma_x;
  double gamma_y;
  double r_x;
  double r_y;
};

/// k + l copy uniforms followed by one perturbation uniform per effect.
std::size_t coupled_uniform_count(const TwoEffectModel& tm);

/// One coupled draw of level n+1 from level-n copies. next_variance is
/// sigma_{n+1}^2 = Var X_{n+1} + Var Y_{n+1}. z_tilde is assembled from the
/// decomposition, so the identity holds exactly.
CoupledDecomposition coupled_decomposition_sample(const TwoEffectModel& tm, int n, const LevelState& x,
                                                  const LevelState& y, double next_variance,
                                                  std::span<const double> uniforms);

}  // namespace steinrec
