#include "steinrec/recursion.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "steinrec/error.hpp"
#include "steinrec/numeric.hpp"
#include "steinrec/random.hpp"

namespace steinrec {

double GeometricSchedule::at(int n) const { return base * std::pow(ratio, n); }

CoefficientSchedule CoefficientSchedule::constant(std::vector<double> coefficients) {
  return per_level({std::move(coefficients)});
}

CoefficientSchedule CoefficientSchedule::per_level(std::vector<std::vector<double>> levels) {
  if (levels.empty()) throw Error(Errc::invalid_model, "coefficient schedule is empty");
  const std::size_t k = levels.front().size();
  if (k < 2) throw Error(Errc::invalid_model, "need k >= 2 coefficients per level");
  for (std::size_t n = 0; n < levels.size(); ++n) {
    if (levels[n].size() != k)
      throw Error(Errc::invalid_model, "level " + std::to_string(n) + " has " + std::to_string(levels[n].size()) +
                                           " coefficients, expected " + std::to_string(k));
    for (double a : levels[n])
      if (!std::isfinite(a)) throw Error(Errc::invalid_model, "non-finite coefficient at level " + std::to_string(n));
  }
  return CoefficientSchedule(std::move(levels));
}

std::span<const double> CoefficientSchedule::at(int n) const {
  if (n < 0) throw Error(Errc::out_of_range, "negative level");
  const std::size_t idx = std::min<std::size_t>(static_cast<std::size_t>(n), levels_.size() - 1);
  return levels_[idx];
}

// ---------------------------------------------------------------------------

namespace {

void check_schedule(const GeometricSchedule& s, const char* what, bool non_negative) {
  if (!std::isfinite(s.base) || !std::isfinite(s.ratio))
    throw Error(Errc::invalid_model, std::string(what) + " schedule must be finite");
  if (s.ratio < 0.0) throw Error(Errc::invalid_model, std::string(what) + " ratio must be non-negative");
  if (non_negative && s.base < 0.0) throw Error(Errc::invalid_model, std::string(what) + " base must be non-negative");
}

double sum_sq(std::span<const double> a) {
  KahanSum s;
  for (double v : a) s += v * v;
  return s.value();
}

}  // namespace

RecursionModel::RecursionModel(CoefficientSchedule coefficients, DiscreteDistribution initial,
                               PerturbationSpec perturbation)
    : coefficients_(std::move(coefficients)), initial_(std::move(initial)), perturbation_(std::move(perturbation)) {
  const auto limit = coefficients_.limit();
  const auto nonzero = std::count_if(limit.begin(), limit.end(), [](double a) { return a != 0.0; });
  if (nonzero < 2) throw Error(Errc::invalid_model, "at least two limit coefficients must be nonzero");
  if (!(central_moment(initial_, 2) > 0.0)) throw Error(Errc::degenerate, "initial law must be non-constant");
  if (const auto* ind = std::get_if<IndependentPerturbation>(&perturbation_)) {
    check_schedule(ind->scale, "perturbation scale", true);
  } else if (const auto* dep = std::get_if<DependentQuadraticPerturbation>(&perturbation_)) {
    check_schedule(dep->epsilon, "perturbation epsilon", false);
  }
}

bool RecursionModel::dependent_perturbation() const {
  return std::holds_alternative<DependentQuadraticPerturbation>(perturbation_);
}

bool RecursionModel::has_perturbation() const { return !std::holds_alternative<NoPerturbation>(perturbation_); }

double RecursionModel::lambda_sq(int n) const { return sum_sq(coefficients_.at(n)); }

double RecursionModel::lambda_limit() const { return std::sqrt(sum_sq(coefficients_.limit())); }

PerturbationMoments RecursionModel::perturbation_moments(int n) const {
  if (dependent_perturbation())
    throw Error(Errc::unsupported, "dependent perturbations have no closed-form moments");
  const auto* ind = std::get_if<IndependentPerturbation>(&perturbation_);
  if (!ind) return {};
  const double s = ind->scale.at(n);
  const double s2 = s * s;
  return {s * ind->law.mean(), s2 * central_moment(ind->law, 2), s2 * s2 * central_moment(ind->law, 4)};
}

// ---------------------------------------------------------------------------

std::vector<DiscreteDistribution> propagate_exact_levels(const RecursionModel& m, int n, std::size_t atom_cap) {
  if (n < 0) throw Error(Errc::out_of_range, "negative level");
  if (m.dependent_perturbation())
    throw Error(Errc::unsupported, "dependent perturbations cannot be propagated exactly; use sampling");
  std::vector<DiscreteDistribution> levels{m.initial()};
  levels.reserve(static_cast<std::size_t>(n) + 1);
  const auto* ind = std::get_if<IndependentPerturbation>(&m.perturbation());
  for (int l = 0; l < n; ++l) {
    const DiscreteDistribution& cur = levels.back();
    std::optional<DiscreteDistribution> next;
    for (double a : m.coefficients(l)) {
      if (a == 0.0) continue;
      auto term = affine(cur, a);
      next = next ? convolve(*next, term, atom_cap) : std::move(term);
    }
    if (!next) next = DiscreteDistribution::point_mass(0.0);
    if (ind) {
      const double s = ind->scale.at(l);
      if (s != 0.0) next = convolve(*next, affine(ind->law, s), atom_cap);
    }
    levels.push_back(std::move(*next));
  }
  return levels;
}

DiscreteDistribution propagate_exact(const RecursionModel& m, int n, std::size_t atom_cap) {
  return std::move(propagate_exact_levels(m, n, atom_cap).back());
}

// ---------------------------------------------------------------------------

double dependent_quadratic_delta(double eps, std::span<const double> standardized) {
  const double k = static_cast<double>(standardized.size());
  double s = 0.0;
  for (double v : standardized) s += v;
  s /= k;
  return eps * (s * s - 1.0 / k);
}

std::vector<EmpiricalSample> evolve_pool(const RecursionModel& m, std::vector<double> level0, int n,
                                         const PoolOptions& opt) {
  if (n < 0) throw Error(Errc::out_of_range, "negative level");
  if (level0.size() != opt.pool_size) throw Error(Errc::size_mismatch, "level-0 pool has the wrong size");
  const SeedProvenance prov{opt.seed, opt.stream};
  const std::size_t size = opt.pool_size;
  const std::size_t k = m.k();

  std::vector<EmpiricalSample> levels;
  levels.reserve(static_cast<std::size_t>(n) + 1);
  levels.emplace_back(std::move(level0), prov);  // sorts: pools are kept in canonical order

  const auto* ind = std::get_if<IndependentPerturbation>(&m.perturbation());
  const auto* dep = std::get_if<DependentQuadraticPerturbation>(&m.perturbation());

  for (int l = 0; l < n; ++l) {
    const auto cur = levels.back().values();
    const auto coef = m.coefficients(l);
    double mu = 0.0, sd = 1.0;
    if (dep) {
      mu = levels.back().mean();
      const double var = levels.back().variance();
      if (!(var > 0.0)) throw Error(Errc::degenerate, "pool collapsed at level " + std::to_string(l));
      sd = std::sqrt(var);
    }
    const double scale = ind ? ind->scale.at(l) : 0.0;
    const double eps = dep ? dep->epsilon.at(l) : 0.0;

    std::vector<double> next(size);
    parallel_for(size, opt.threads, [&](std::size_t begin, std::size_t end) {
      std::vector<double> picked(k);
      for (std::size_t j = begin; j < end; ++j) {
        CounterStream rng(opt.seed, {static_cast<std::uint64_t>(StreamDomain::pool), opt.stream,
                                     static_cast<std::uint64_t>(l + 1), j});
        double value = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
          picked[i] = cur[rng.index(size)];
          value += coef[i] * picked[i];
        }
        const double u = rng.uniform();
        if (ind) {
          value += scale * ind->law.quantile(u);
        } else if (dep) {
          for (double& p : picked) p = (p - mu) / sd;
          value += dependent_quadratic_delta(eps, picked);
        }
        next[j] = value;
      }
    });
    levels.emplace_back(std::move(next), prov);
  }
  return levels;
}

std::vector<EmpiricalSample> sample_pool_levels(const RecursionModel& m, int n, const PoolOptions& opt) {
  if (opt.pool_size < 1000) throw Error(Errc::out_of_range, "pool size must be at least 1000");
  std::vector<double> level0(opt.pool_size);
  parallel_for(opt.pool_size, opt.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      CounterStream rng(opt.seed, {static_cast<std::uint64_t>(StreamDomain::pool), opt.stream, 0, j});
      level0[j] = m.initial().quantile(rng.uniform());
    }
  });
  return evolve_pool(m, std::move(level0), n, opt);
}

EmpiricalSample sample_pool(const RecursionModel& m, int n, const PoolOptions& opt) {
  return std::move(sample_pool_levels(m, n, opt).back());
}

// ---------------------------------------------------------------------------

std::vector<MomentRow> moment_recursion(const RecursionModel& m, int n_max) {
  if (n_max < 0) throw Error(Errc::out_of_range, "negative level");
  if (m.dependent_perturbation())
    throw Error(Errc::unsupported, "dependent perturbations have no closed-form moments; use sampling");
  std::vector<MomentRow> rows;
  rows.reserve(static_cast<std::size_t>(n_max) + 1);
  rows.push_back({m.initial().mean(), central_moment(m.initial(), 2), central_moment(m.initial(), 4)});
  for (int n = 0; n < n_max; ++n) {
    const auto a = m.coefficients(n);
    KahanSum lam2, sum_a, s4, cross;
    for (std::size_t i = 0; i < a.size(); ++i) {
      sum_a += a[i];
      lam2 += a[i] * a[i];
      s4 += a[i] * a[i] * a[i] * a[i];
      for (std::size_t j = 0; j < a.size(); ++j)
        if (i != j) cross += a[i] * a[i] * a[j] * a[j];
    }
    const auto& cur = rows.back();
    const PerturbationMoments d = m.perturbation_moments(n);
    MomentRow next;
    next.mean = sum_a.value() * cur.mean + d.mean;
    next.variance = lam2.value() * cur.variance + d.variance;
    KahanSum mu4;
    mu4 += s4.value() * cur.mu4;
    mu4 += 3.0 * cross.value() * cur.variance * cur.variance;
    mu4 += d.mu4;
    mu4 += 6.0 * lam2.value() * cur.variance * d.variance;
    next.mu4 = mu4.value();
    rows.push_back(next);
  }
  return rows;
}

// ---------------------------------------------------------------------------

double draw_from(const LevelSource& source, double u) {
  return std::visit([u](const auto& law) { return law.quantile(u); }, source);
}

std::size_t coupled_uniform_count(const TwoEffectModel& tm) { return tm.x.k() + tm.y.k() + 2; }

namespace {

struct EffectDraw {
  double u_part;  // sum_i a_i xi_i / lambda_n
  double gamma;   // (Delta - E Delta) / sigma_{n+1}
};

EffectDraw draw_effect(const RecursionModel& m, int n, const LevelState& level, double lambda_n, double sigma_next,
                       std::span<const double> copy_uniforms, double pert_uniform) {
  const auto a = m.coefficients(n);
  const double sd = std::sqrt(level.variance);
  std::vector<double> xi(a.size());
  double u = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    xi[i] = (draw_from(level.source, copy_uniforms[i]) - level.mean) / sd;
    u += a[i] * xi[i];
  }
  u /= lambda_n;

  double centered = 0.0;
  if (const auto* ind = std::get_if<IndependentPerturbation>(&m.perturbation())) {
    const double s = ind->scale.at(n);
    centered = s * (ind->law.quantile(pert_uniform) - ind->law.mean());
  } else if (const auto* dep = std::get_if<DependentQuadraticPerturbation>(&m.perturbation())) {
    centered = dependent_quadratic_delta(dep->epsilon.at(n), xi);
  }
  return {u, centered / sigma_next};
}

}  // namespace

CoupledDecomposition coupled_decomposition_sample(const TwoEffectModel& tm, int n, const LevelState& x,
                                                  const LevelState& y, double next_variance,
                                                  std::span<const double> uniforms) {
  const std::size_t k = tm.x.k();
  const std::size_t l = tm.y.k();
  if (uniforms.size() != k + l + 2)
    throw Error(Errc::dimension_mismatch, "coupled draw needs " + std::to_string(k + l + 2) + " uniforms");
  if (!(x.variance > 0.0) || !(y.variance > 0.0) || !(next_variance > 0.0))
    throw Error(Errc::degenerate, "zero variance at level " + std::to_string(n));

  const double lam2 = tm.x.lambda_sq(n) + tm.y.lambda_sq(n);
  const double lambda_n = std::sqrt(lam2);
  const double sigma_next = std::sqrt(next_variance);

  const EffectDraw dx = draw_effect(tm.x, n, x, lambda_n, sigma_next, uniforms.subspan(0, k), uniforms[k + l]);
  const EffectDraw dy = draw_effect(tm.y, n, y, lambda_n, sigma_next, uniforms.subspan(k, l), uniforms[k + l + 1]);

  CoupledDecomposition c;
  // r = lambda_n sigma_{X,n} / sigma_{n+1}, taken as one square root of a
  // variance ratio so equal effects give r == 1 exactly.
  c.r_x = std::sqrt(lam2 * x.variance / next_variance);
  c.r_y = std::sqrt(lam2 * y.variance / next_variance);
  c.u_x = dx.u_part;
  c.u_y = dy.u_part;
  c.u = c.u_x + c.u_y;
  c.gamma_x = dx.gamma;
  c.gamma_y = dy.gamma;
  c.z_tilde = c.r_x * c.u_x + c.r_y * c.u_y + c.gamma_x + c.gamma_y;
  return c;
}

}  // namespace steinrec
