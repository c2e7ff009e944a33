#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "steinrec/dist.hpp"
#include "steinrec/recursion.hpp"

namespace steinrec {

/// ||F - G||_1 = int |F(t) - G(t)| dt, integrated exactly segment by segment
/// over the merged breakpoint grid. Against the standard normal the tails
/// are closed-form and the interior segments use t Phi(t) + phi(t).
double w1(const Law& f, const Law& g);

// ---------------------------------------------------------------------------
// Couplings on a shared uniform grid

/// A joint law given as a map from `dimension` independent uniforms to a
/// pair (x, y).
struct Coupling {
  std::string name;
  int dimension = 1;
  std::function<std::pair<double, double>(std::span<const double>)> draw;
};

/// (F^-1(v), G^-1(v)).
Coupling inverse_cdf_coupling(const Law& f, const Law& g);
/// (F^-1(v1), G^-1(v2)) with v1, v2 independent.
Coupling independent_coupling(const Law& f, const Law& g);
/// (F^-1(v), F^-1(v)).
Coupling identity_coupling(const Law& f);

struct DualCheck {
  double exact_w1;
  double coupled_mean;  // E|X - Y| under the coupling
  /// W1 of each grid marginal to its target, summed. The grid mean can fall
  /// short of exact_w1 by at most this much; it is 0 when the grid resolves
  /// every atom exactly.
  double marginal_error;
};

/// Evaluates E|X - Y| by midpoint integration over the uniform grid (a
/// product grid with round(n_grid^(1/d)) points per axis for d-dimensional
/// couplings) and compares it with the exact w1. Throws
/// Errc::marginal_mismatch when either grid marginal is further from its
/// target law than the grid resolution allows.
DualCheck w1_dual_check(const Law& f, const Law& g, const Coupling& coupling, std::size_t n_grid);

// ---------------------------------------------------------------------------
// Stein test functions

/// f(w) = c1 w + c2 w^2 + c3 w^3 + c4 w^4, so f(0) = 0.
class SteinTestFunction {
 public:
  explicit SteinTestFunction(std::array<double, 4> coefficients);
  static SteinTestFunction monomial(int p);

  const std::array<double, 4>& coefficients() const noexcept { return c_; }
  double f(double w) const;
  double fprime(double w) const;
  /// h(w) = f'(w) - w f(w)
  double h(double w) const;

 private:
  std::array<double, 4> c_;
};

/// E h(W) = E f'(W) - E[W f(W)] from the exact raw moments of the law.
double stein_residual(const Law& law, const SteinTestFunction& tf);

// ---------------------------------------------------------------------------
// beta_n = E|Z~_{n+1} - U_{n+1}| + 1/2 E|Z~_{n+1}^3 - U_{n+1}^3|

struct BetaEstimate {
  int n = 0;
  double term1 = 0.0;
  double term2 = 0.0;
  double beta = 0.0;
  double stderr_term1 = 0.0;
  double stderr_term2 = 0.0;
  double stderr_beta = 0.0;
  std::size_t draws = 0;
};

/// Level-n laws of both effects plus sigma_{n+1}^2, the inputs of a
/// coupled draw.
struct BetaContext {
  int n = 0;
  LevelState x;
  LevelState y;
  double next_variance = 0.0;
  MomentSource next_variance_source = MomentSource::exact;
};

/// Uses exact laws and moments when they fit under atom_cap and the
/// perturbations allow it; otherwise pools (and pool moment estimates)
/// built from `pool`.
BetaContext make_beta_context(const TwoEffectModel& tm, int n, std::size_t atom_cap, const PoolOptions& pool);

/// Monte Carlo means over `draws` coupled draws; draw d uses the counter
/// stream (seed, beta, n, d). Blocks of draws are reduced in a fixed order,
/// so the result does not depend on `threads`.
BetaEstimate beta_estimate(const TwoEffectModel& tm, const BetaContext& ctx, std::size_t draws, std::uint64_t seed,
                           unsigned threads = 1);

BetaEstimate beta_estimate(const TwoEffectModel& tm, int n, std::size_t draws, std::uint64_t seed,
                           unsigned threads = 1, std::size_t atom_cap = 1'000'000);

/// "n,w1,beta,term1,term2,stderr"
std::string metrics_csv_header();
std::string metrics_csv_row(int n, double w1_value, const BetaEstimate& b);

}  // namespace steinrec
