#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "steinrec/recursion.hpp"

namespace steinrec {

struct CoefficientStats {
  double lambda;  // sqrt(sum a_i^2)
  double phi;     // sum |a_i|^3 / lambda^3
};

CoefficientStats coefficient_stats(std::span<const double> a);
CoefficientStats coefficient_stats(const RecursionModel& m, int n);

/// State and perturbation moment sequences of one effect, levels 0..n_max.
struct EffectMoments {
  std::vector<MomentRow> state;
  std::vector<PerturbationMoments> perturbation;
  MomentSource source = MomentSource::exact;
};

/// Closed-form sequences; throws Errc::unsupported for dependent
/// perturbations.
EffectMoments exact_moments(const RecursionModel& m, int n_max);

/// Pool moments for the state and Monte Carlo moments of Delta_n built from
/// the same pools (perturbation_draws draws per level).
EffectMoments estimated_moments(const RecursionModel& m, std::span<const EmpiricalSample> pools,
                                std::size_t perturbation_draws, std::uint64_t seed, std::uint64_t stream);

inline constexpr double kDeltaFloor = 1e-6;
inline constexpr double kDeltaCap2 = 0.999;
inline constexpr double kDeltaCap4 = 0.9;

/// Envelope constants of one effect:
///   Var X_n          >= c_x2^2 lambda^{2n} (1 - delta_x2)^{2n}
///   Var Delta_n      <= c_p2^2 lambda^{2n} (1 - delta_p2)^{2n}
///   E(X_n - EX_n)^4  <= c_x4^4 lambda^{4n} (1 + delta_x4)^{4n}
///   E(Delta_n - EDelta_n)^4 <= c_p4^4 lambda^{4n} (1 - delta_p4)^{4n}
struct ConditionConstants {
  double c_x2 = 0.0;
  double delta_x2 = 0.0;
  double c_p2 = 0.0;
  double delta_p2 = 0.0;
  double c_x4 = 0.0;
  double delta_x4 = 0.0;
  double c_p4 = 0.0;
  double delta_p4 = 0.0;
  double lambda_limit = 0.0;
};

/// Fits each envelope in the log domain with the supporting line through
/// the last level of the horizon (the final edge of the lower or upper
/// hull), then sets C so the envelope is tight at its binding level.
/// Throws Errc::infeasible when delta_x2 >= delta_p2.
ConditionConstants fit_condition_constants(std::span<const MomentRow> moments,
                                           std::span<const PerturbationMoments> perturbation, double lambda_limit,
                                           int horizon);

/// Checks every envelope inequality at levels 0..horizon; returns the
/// largest relative violation (<= 0 when all hold).
double envelope_violation(const ConditionConstants& c, std::span<const MomentRow> moments,
                          std::span<const PerturbationMoments> perturbation, int horizon);

struct GapCheck {
  int n;
  double gap;        // |Var X_n - Var Y_n|
  double threshold;  // (Var Delta_n + Var Lambda_n) / max(lambda_{a,n}^2, lambda_{b,n}^2)
  bool ok;
};

struct RateReport {
  double phi_x2 = 0.0;
  double phi_x4 = 0.0;
  double phi_y2 = 0.0;
  double phi_y4 = 0.0;
  double psi_xy = 0.0;
  double psi_yx = 0.0;
  double gamma_beta = 0.0;
  /// gamma_beta under the literal reading of its last argument, which names
  /// an undefined quantity and is dropped.
  double gamma_beta_literal = 0.0;
  double phi_a_inf = 0.0;
  double phi_b_inf = 0.0;
  double gamma_x_single = 0.0;
  double gamma_y_single = 0.0;
  double gamma_total = 0.0;

  bool phi_ok = false;  // every phi < 1
  bool psi_ok = false;  // both psi < 1
  std::vector<GapCheck> gap;
  bool gap_ok = false;

  bool hypotheses_ok() const { return phi_ok && psi_ok && gap_ok; }
};

double gamma_single(double phi2, double phi4, double phi_inf);

RateReport rate_report(const ConditionConstants& cx, const ConditionConstants& cy, const TwoEffectModel& tm,
                       const EffectMoments& mx, const EffectMoments& my, int horizon);

/// Exact-moment convenience form.
RateReport rate_report(const ConditionConstants& cx, const ConditionConstants& cy, const TwoEffectModel& tm,
                       int horizon);

/// Variance-gap condition at level n.
GapCheck variance_gap(const TwoEffectModel& tm, const EffectMoments& mx, const EffectMoments& my, int n);

struct RnRow {
  int n;
  double r_x;
  double r_y;
  double lemma_rhs;  // 2 sqrt(Var Delta_n + Var Lambda_n) / sigma_{n+1}
  std::array<double, 3> rp_x;  // |r_x^p - 1|, p = 1, 2, 3
  std::array<double, 3> rp_y;
  std::array<double, 3> chain_x;  // sum_{j<=p} binom(p, j) |r_x - 1|^j
  std::array<double, 3> chain_y;
  bool gap_ok;
  /// |r - 1| <= lemma_rhs for both effects. Only asserted when gap_ok.
  bool lemma_holds;
};

struct RnSeries {
  std::vector<RnRow> rows;  // n = 0 .. n_max - 1
};

RnSeries rn_series(const TwoEffectModel& tm, const EffectMoments& mx, const EffectMoments& my, int n_max);
RnSeries rn_series(const TwoEffectModel& tm, int n_max);

/// "key value" lines.
std::string to_key_value(const RateReport& r);
std::string to_key_value(const ConditionConstants& c, const std::string& prefix);
std::string rate_csv_header();
std::string rate_csv_row(const RateReport& r);

}  // namespace steinrec
