#include "steinrec/bounds.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <optional>
#include <sstream>

#include "steinrec/error.hpp"
#include "steinrec/numeric.hpp"
#include "steinrec/random.hpp"
#include "steinrec/serialize.hpp"

namespace steinrec {

CoefficientStats coefficient_stats(std::span<const double> a) {
  KahanSum l2;
  KahanSum l3;
  for (double v : a) {
    l2 += v * v;
    l3 += std::abs(v) * v * v;
  }
  const double lambda = std::sqrt(l2.value());
  if (!(lambda > 0.0)) return {0.0, 0.0};
  return {lambda, l3.value() / (lambda * lambda * lambda)};
}

CoefficientStats coefficient_stats(const RecursionModel& m, int n) { return coefficient_stats(m.coefficients(n)); }

// ---------------------------------------------------------------------------

EffectMoments exact_moments(const RecursionModel& m, int n_max) {
  EffectMoments out;
  out.state = moment_recursion(m, n_max);
  out.perturbation.reserve(static_cast<std::size_t>(n_max) + 1);
  for (int n = 0; n <= n_max; ++n) out.perturbation.push_back(m.perturbation_moments(n));
  out.source = MomentSource::exact;
  return out;
}

EffectMoments estimated_moments(const RecursionModel& m, std::span<const EmpiricalSample> pools,
                                std::size_t perturbation_draws, std::uint64_t seed, std::uint64_t stream) {
  if (pools.empty()) throw Error(Errc::empty_input, "no pools");
  EffectMoments out;
  out.source = MomentSource::pool_estimate;
  const auto* dep = std::get_if<DependentQuadraticPerturbation>(&m.perturbation());
  if (dep && perturbation_draws < 2) throw Error(Errc::out_of_range, "need at least two perturbation draws");
  for (std::size_t n = 0; n < pools.size(); ++n) {
    const EmpiricalSample& pool = pools[n];
    out.state.push_back({pool.mean(), pool.variance(), pool.central_moment(4)});
    if (!dep) {
      out.perturbation.push_back(m.perturbation_moments(static_cast<int>(n)));
      continue;
    }
    const double mu = pool.mean();
    const double var = pool.variance();
    if (!(var > 0.0)) throw Error(Errc::degenerate, "pool collapsed at level " + std::to_string(n));
    const double sd = std::sqrt(var);
    const double eps = dep->epsilon.at(static_cast<int>(n));
    const auto values = pool.values();
    std::vector<double> deltas(perturbation_draws);
    std::vector<double> picked(m.k());
    for (std::size_t d = 0; d < perturbation_draws; ++d) {
      CounterStream rng(seed, {static_cast<std::uint64_t>(StreamDomain::perturbation_moments), stream, n, d});
      for (double& p : picked) p = (values[rng.index(values.size())] - mu) / sd;
      deltas[d] = dependent_quadratic_delta(eps, picked);
    }
    const EmpiricalSample sample(std::move(deltas));
    out.perturbation.push_back({sample.mean(), sample.variance(), sample.central_moment(4)});
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct Envelope {
  double log_c;
  double slope;
};

// Points (n, y_n) with y_n finite. The line through the last point that
// supports the whole set from below (lower) or above (upper).
double anchored_slope(std::span<const std::pair<int, double>> pts, bool lower) {
  const auto [nl, yl] = pts.back();
  std::optional<double> s;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double chord = (yl - pts[i].second) / static_cast<double>(nl - pts[i].first);
    s = !s ? chord : (lower ? std::max(*s, chord) : std::min(*s, chord));
  }
  return *s;
}

// C for a fixed slope: the binding level makes the envelope tight.
double fit_intercept(std::span<const std::pair<int, double>> pts, double slope, bool lower) {
  double c = lower ? INFINITY : -INFINITY;
  for (const auto& [n, y] : pts) {
    const double v = y - slope * n;
    c = lower ? std::min(c, v) : std::max(c, v);
  }
  return c;
}

// y_n = log(m_n) / root - n log(lambda) over levels with m_n > 0.
std::vector<std::pair<int, double>> log_points(std::span<const double> m, double root, double log_lambda) {
  std::vector<std::pair<int, double>> pts;
  for (std::size_t n = 0; n < m.size(); ++n)
    if (m[n] > 0.0) pts.emplace_back(static_cast<int>(n), std::log(m[n]) / root - static_cast<double>(n) * log_lambda);
  return pts;
}

struct DecayFit {
  double c;
  double delta;
};

// Upper envelope C (1 - delta)^n on a decaying perturbation moment.
DecayFit fit_decay_envelope(std::span<const double> m, double root, double log_lambda, double cap, double floor) {
  const auto pts = log_points(m, root, log_lambda);
  if (pts.empty()) return {DBL_MIN, cap};
  double slope = pts.size() >= 2 ? anchored_slope(pts, false) : std::log(1.0 - cap);
  slope = std::max(slope, std::log(1.0 - cap));
  slope = std::min(slope, std::log(1.0 - floor));
  return {std::exp(fit_intercept(pts, slope, false)), 1.0 - std::exp(slope)};
}

}  // namespace

ConditionConstants fit_condition_constants(std::span<const MomentRow> moments,
                                           std::span<const PerturbationMoments> perturbation, double lambda_limit,
                                           int horizon) {
  if (horizon < 3) throw Error(Errc::out_of_range, "envelope fit needs horizon >= 3");
  const auto levels = static_cast<std::size_t>(horizon) + 1;
  if (moments.size() < levels || perturbation.size() < levels)
    throw Error(Errc::size_mismatch, "moment sequences are shorter than the horizon");
  if (!(lambda_limit > 0.0)) throw Error(Errc::degenerate, "lambda must be positive");
  const double log_lambda = std::log(lambda_limit);

  std::vector<double> var(levels), mu4(levels), pvar(levels), pmu4(levels);
  for (std::size_t n = 0; n < levels; ++n) {
    var[n] = moments[n].variance;
    mu4[n] = moments[n].mu4;
    pvar[n] = perturbation[n].variance;
    pmu4[n] = perturbation[n].mu4;
    if (!(var[n] > 0.0)) throw Error(Errc::degenerate, "zero variance at level " + std::to_string(n));
  }

  ConditionConstants c;
  c.lambda_limit = lambda_limit;

  {  // Var X_n >= C^2 lambda^{2n} (1 - d)^{2n}
    const auto pts = log_points(var, 2.0, log_lambda);
    const double slope = std::min(anchored_slope(pts, true), std::log(1.0 - kDeltaFloor));
    c.delta_x2 = 1.0 - std::exp(slope);
    c.c_x2 = std::exp(fit_intercept(pts, slope, true));
  }
  {  // E(X_n - EX_n)^4 <= C^4 lambda^{4n} (1 + d)^{4n}
    const auto pts = log_points(mu4, 4.0, log_lambda);
    const double slope = std::max(anchored_slope(pts, false), 0.0);
    c.delta_x4 = std::exp(slope) - 1.0;
    c.c_x4 = std::exp(fit_intercept(pts, slope, false));
  }
  {
    const DecayFit f = fit_decay_envelope(pvar, 2.0, log_lambda, kDeltaCap2, -INFINITY);
    c.c_p2 = f.c;
    c.delta_p2 = f.delta;
  }
  {
    const DecayFit f = fit_decay_envelope(pmu4, 4.0, log_lambda, kDeltaCap4, 0.0);
    c.c_p4 = f.c;
    c.delta_p4 = f.delta;
  }

  if (!(c.delta_x2 < c.delta_p2)) {
    std::ostringstream os;
    os << "fitted delta_x2 = " << format_real(c.delta_x2) << " is not below delta_p2 = " << format_real(c.delta_p2)
       << " over horizon " << horizon;
    throw Error(Errc::infeasible, os.str());
  }
  return c;
}

double envelope_violation(const ConditionConstants& c, std::span<const MomentRow> moments,
                          std::span<const PerturbationMoments> perturbation, int horizon) {
  double worst = -INFINITY;
  auto check = [&](double value, double bound, bool lower) {
    const double diff = lower ? bound - value : value - bound;
    worst = std::max(worst, diff / std::max(std::abs(bound), DBL_MIN));
  };
  const double l = c.lambda_limit;
  for (int n = 0; n <= horizon; ++n) {
    const auto i = static_cast<std::size_t>(n);
    check(moments[i].variance, std::pow(c.c_x2 * std::pow(l * (1.0 - c.delta_x2), n), 2), true);
    check(moments[i].mu4, std::pow(c.c_x4 * std::pow(l * (1.0 + c.delta_x4), n), 4), false);
    check(perturbation[i].variance, std::pow(c.c_p2 * std::pow(l * (1.0 - c.delta_p2), n), 2), false);
    check(perturbation[i].mu4, std::pow(c.c_p4 * std::pow(l * (1.0 - c.delta_p4), n), 4), false);
  }
  return worst;
}

// ---------------------------------------------------------------------------

double gamma_single(double phi2, double phi4, double phi_inf) {
  return std::max({phi2, std::pow(phi4, 1.5), phi_inf});
}

GapCheck variance_gap(const TwoEffectModel& tm, const EffectMoments& mx, const EffectMoments& my, int n) {
  const auto i = static_cast<std::size_t>(n);
  const double vx = mx.state.at(i).variance;
  const double vy = my.state.at(i).variance;
  const double gap = std::abs(vx - vy);
  const double denom = std::max(tm.x.lambda_sq(n), tm.y.lambda_sq(n));
  const double num = mx.perturbation.at(i).variance + my.perturbation.at(i).variance;
  const double threshold = num / denom;
  const bool ok = num == 0.0 ? gap <= 1e-10 * std::max({1.0, vx, vy}) : gap <= threshold * (1.0 + 1e-12);
  return {n, gap, threshold, ok};
}

RateReport rate_report(const ConditionConstants& cx, const ConditionConstants& cy, const TwoEffectModel& tm,
                       const EffectMoments& mx, const EffectMoments& my, int horizon) {
  RateReport r;
  r.phi_x2 = (1.0 - cx.delta_p2) * std::pow(1.0 + cx.delta_x4, 3) / std::pow(1.0 - cx.delta_x2, 4);
  r.phi_x4 = std::pow((1.0 - cx.delta_p4) / (1.0 - cx.delta_x2), 2);
  r.phi_y2 = (1.0 - cy.delta_p2) * std::pow(1.0 + cy.delta_x4, 3) / std::pow(1.0 - cy.delta_x2, 4);
  r.phi_y4 = std::pow((1.0 - cy.delta_p4) / (1.0 - cy.delta_x2), 2);
  r.psi_xy = (1.0 - cy.delta_p2) * std::pow(1.0 + cx.delta_x4, 3) /
             ((1.0 - cy.delta_x2) * std::pow(1.0 - cx.delta_x2, 3));
  r.psi_yx = (1.0 - cx.delta_p2) * std::pow(1.0 + cy.delta_x4, 3) /
             ((1.0 - cx.delta_x2) * std::pow(1.0 - cy.delta_x2, 3));

  const double x4 = std::pow(r.phi_x4, 1.5);
  const double y4 = std::pow(r.phi_y4, 1.5);
  r.gamma_beta_literal = std::max({r.phi_x2, r.phi_y2, x4, y4, r.psi_xy});
  r.gamma_beta = std::max(r.gamma_beta_literal, r.psi_yx);

  r.phi_a_inf = coefficient_stats(tm.x.schedule().limit()).phi;
  r.phi_b_inf = coefficient_stats(tm.y.schedule().limit()).phi;
  r.gamma_x_single = gamma_single(r.phi_x2, r.phi_x4, r.phi_a_inf);
  r.gamma_y_single = gamma_single(r.phi_y2, r.phi_y4, r.phi_b_inf);
  r.gamma_total = std::max({r.gamma_x_single, r.gamma_y_single, r.gamma_beta});

  r.phi_ok = r.phi_x2 < 1.0 && r.phi_x4 < 1.0 && r.phi_y2 < 1.0 && r.phi_y4 < 1.0;
  r.psi_ok = r.psi_xy < 1.0 && r.psi_yx < 1.0;
  r.gap_ok = true;
  for (int n = 0; n <= horizon; ++n) {
    r.gap.push_back(variance_gap(tm, mx, my, n));
    r.gap_ok = r.gap_ok && r.gap.back().ok;
  }
  return r;
}

RateReport rate_report(const ConditionConstants& cx, const ConditionConstants& cy, const TwoEffectModel& tm,
                       int horizon) {
  return rate_report(cx, cy, tm, exact_moments(tm.x, horizon), exact_moments(tm.y, horizon), horizon);
}

// ---------------------------------------------------------------------------

namespace {

std::array<double, 3> powers_minus_one(double r) {
  return {std::abs(r - 1.0), std::abs(r * r - 1.0), std::abs(r * r * r - 1.0)};
}

std::array<double, 3> binomial_chain(double r) {
  const double e = std::abs(r - 1.0);
  return {e, 2.0 * e + e * e, 3.0 * e + 3.0 * e * e + e * e * e};
}

}  // namespace

RnSeries rn_series(const TwoEffectModel& tm, const EffectMoments& mx, const EffectMoments& my, int n_max) {
  const auto levels = static_cast<std::size_t>(n_max) + 1;
  if (mx.state.size() < levels || my.state.size() < levels)
    throw Error(Errc::size_mismatch, "moment sequences are shorter than n_max");
  RnSeries out;
  for (int n = 0; n < n_max; ++n) {
    const auto i = static_cast<std::size_t>(n);
    const double next = mx.state[i + 1].variance + my.state[i + 1].variance;
    if (!(next > 0.0)) throw Error(Errc::degenerate, "sigma is zero at level " + std::to_string(n + 1));
    const double lam2 = tm.x.lambda_sq(n) + tm.y.lambda_sq(n);
    RnRow row{};
    row.n = n;
    row.r_x = std::sqrt(lam2 * mx.state[i].variance / next);
    row.r_y = std::sqrt(lam2 * my.state[i].variance / next);
    row.lemma_rhs = 2.0 * std::sqrt(mx.perturbation[i].variance + my.perturbation[i].variance) / std::sqrt(next);
    row.rp_x = powers_minus_one(row.r_x);
    row.rp_y = powers_minus_one(row.r_y);
    row.chain_x = binomial_chain(row.r_x);
    row.chain_y = binomial_chain(row.r_y);
    row.gap_ok = variance_gap(tm, mx, my, n).ok;
    row.lemma_holds = row.rp_x[0] <= row.lemma_rhs && row.rp_y[0] <= row.lemma_rhs;
    out.rows.push_back(row);
  }
  return out;
}

RnSeries rn_series(const TwoEffectModel& tm, int n_max) {
  return rn_series(tm, exact_moments(tm.x, n_max), exact_moments(tm.y, n_max), n_max);
}

// ---------------------------------------------------------------------------

std::string to_key_value(const RateReport& r) {
  std::ostringstream os;
  auto kv = [&](const char* k, double v) { os << k << ' ' << format_real(v) << '\n'; };
  kv("phi_x2", r.phi_x2);
  kv("phi_x4", r.phi_x4);
  kv("phi_y2", r.phi_y2);
  kv("phi_y4", r.phi_y4);
  kv("psi_xy", r.psi_xy);
  kv("psi_yx", r.psi_yx);
  kv("gamma_beta", r.gamma_beta);
  if (r.gamma_beta_literal != r.gamma_beta) kv("gamma_beta_literal", r.gamma_beta_literal);
  kv("phi_a_inf", r.phi_a_inf);
  kv("phi_b_inf", r.phi_b_inf);
  kv("gamma_x_single", r.gamma_x_single);
  kv("gamma_y_single", r.gamma_y_single);
  kv("gamma_total", r.gamma_total);
  os << "single_rate_note surrogate max(phi_2, phi_4^1.5, phi_inf)\n";
  os << "flag_phi " << (r.phi_ok ? "pass" : "fail") << '\n';
  os << "flag_psi " << (r.psi_ok ? "pass" : "fail") << '\n';
  os << "flag_variance_gap " << (r.gap_ok ? "pass" : "fail") << '\n';
  for (const auto& g : r.gap)
    if (!g.ok) os << "variance_gap_failed_at " << g.n << ' ' << format_real(g.gap) << ' ' << format_real(g.threshold) << '\n';
  return os.str();
}

std::string to_key_value(const ConditionConstants& c, const std::string& prefix) {
  std::ostringstream os;
  auto kv = [&](const char* k, double v) { os << prefix << k << ' ' << format_real(v) << '\n'; };
  kv("c_x2", c.c_x2);
  kv("delta_x2", c.delta_x2);
  kv("c_p2", c.c_p2);
  kv("delta_p2", c.delta_p2);
  kv("c_x4", c.c_x4);
  kv("delta_x4", c.delta_x4);
  kv("c_p4", c.c_p4);
  kv("delta_p4", c.delta_p4);
  kv("lambda_limit", c.lambda_limit);
  return os.str();
}

std::string rate_csv_header() {
  return "phi_x2,phi_x4,phi_y2,phi_y4,psi_xy,psi_yx,gamma_beta,gamma_x_single,gamma_y_single,gamma_total,"
         "phi_ok,psi_ok,gap_ok";
}

std::string rate_csv_row(const RateReport& r) {
  std::ostringstream os;
  for (double v : {r.phi_x2, r.phi_x4, r.phi_y2, r.phi_y4, r.psi_xy, r.psi_yx, r.gamma_beta, r.gamma_x_single,
                   r.gamma_y_single, r.gamma_total})
    os << format_real(v) << ',';
  os << r.phi_ok << ',' << r.psi_ok << ',' << r.gap_ok;
  return os.str();
}

}  // namespace steinrec
