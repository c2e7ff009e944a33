#include "steinrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include "steinrec/error.hpp"
#include "steinrec/numeric.hpp"
#include "steinrec/random.hpp"
#include "steinrec/serialize.hpp"

namespace steinrec {

namespace {

// ---------------------------------------------------------------------------
// w1 helpers

std::vector<double> grid_points(const Law& law) {
  return std::visit(
      [](const auto& l) -> std::vector<double> {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, DiscreteDistribution>) {
          return {l.atoms().begin(), l.atoms().end()};
        } else if constexpr (std::is_same_v<T, PiecewiseLinearCDF>) {
          return {l.breakpoints().begin(), l.breakpoints().end()};
        } else if constexpr (std::is_same_v<T, EmpiricalSample>) {
          return {l.values().begin(), l.values().end()};
        } else {
          return {};
        }
      },
      law);
}

bool is_step(const Law& law) { return !std::holds_alternative<PiecewiseLinearCDF>(law); }

// CDF values just inside (a, b): right limit at a and left limit at b. Both
// laws have no breakpoints strictly inside, so step laws are flat there.
std::pair<double, double> segment_values(const Law& law, double a, double b) {
  const double left = cdf_eval(law, a);
  return {left, is_step(law) ? left : cdf_eval(law, b)};
}

// int over a width-w segment of |d| with d linear from d0 to d1.
double abs_linear_integral(double d0, double d1, double w) {
  if ((d0 >= 0.0 && d1 >= 0.0) || (d0 <= 0.0 && d1 <= 0.0)) return 0.5 * w * (std::abs(d0) + std::abs(d1));
  return w * (d0 * d0 + d1 * d1) / (2.0 * (std::abs(d0) + std::abs(d1)));
}

double w1_bounded(const Law& f, const Law& g) {
  std::vector<double> grid = grid_points(f);
  const auto other = grid_points(g);
  grid.insert(grid.end(), other.begin(), other.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  KahanSum total;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double a = grid[i];
    const double b = grid[i + 1];
    const auto [f0, f1] = segment_values(f, a, b);
    const auto [g0, g1] = segment_values(g, a, b);
    total += abs_linear_integral(f0 - g0, f1 - g1, b - a);
  }
  return total.value();
}

// Root of a monotone function on [p, q] with a sign change.
template <class Fn>
double bisect(Fn&& fn, double p, double q) {
  double fp = fn(p);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (p + q);
    if (mid <= p || mid >= q) break;
    const double fm = fn(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (fp < 0.0)) {
      p = mid;
      fp = fm;
    } else {
      q = mid;
    }
  }
  return 0.5 * (p + q);
}

// int_a^b |Phi(t) - L(t)| with L linear from l0 at a to l1 at b.
double normal_segment(double a, double b, double l0, double l1) {
  const double slope = (l1 - l0) / (b - a);
  auto line = [&](double t) { return l0 + slope * (t - a); };
  auto gap = [&](double t) { return normal::cdf(t) - line(t); };

  // Phi - L is monotone between the stationary points phi(t) = slope.
  std::vector<double> cuts{a};
  auto add_cut = [&](double t) {
    if (t > a && t < b) cuts.push_back(t);
  };
  add_cut(0.0);
  const double level = slope * std::sqrt(2.0 * std::numbers::pi);
  if (slope > 0.0 && level < 1.0) {
    const double t = std::sqrt(-2.0 * std::log(level));
    add_cut(-t);
    add_cut(t);
  }
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());

  std::vector<double> pts{a};
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double p = cuts[i];
    const double q = cuts[i + 1];
    const double gp = gap(p);
    const double gq = gap(q);
    if ((gp < 0.0 && gq > 0.0) || (gp > 0.0 && gq < 0.0)) pts.push_back(bisect(gap, p, q));
    pts.push_back(q);
  }

  KahanSum total;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double p = pts[i];
    const double q = pts[i + 1];
    if (q <= p) continue;
    const double phi_part = normal::cdf_integral(p, q);
    const double line_part = 0.5 * (line(p) + line(q)) * (q - p);
    total += std::abs(phi_part - line_part);
  }
  return total.value();
}

double w1_normal(const Law& law) {
  if (std::holds_alternative<StandardNormal>(law)) return 0.0;
  std::vector<double> grid = grid_points(law);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  KahanSum total;
  // The bounded law is 0 below its support and 1 above it.
  total += normal::lower_tail_integral(grid.front());
  total += normal::upper_tail_integral(grid.back());
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const auto [l0, l1] = segment_values(law, grid[i], grid[i + 1]);
    total += normal_segment(grid[i], grid[i + 1], l0, l1);
  }
  return total.value();
}

}  // namespace

double w1(const Law& f, const Law& g) {
  if (std::holds_alternative<StandardNormal>(f)) return w1_normal(g);
  if (std::holds_alternative<StandardNormal>(g)) return w1_normal(f);
  return w1_bounded(f, g);
}

// ---------------------------------------------------------------------------

Coupling inverse_cdf_coupling(const Law& f, const Law& g) {
  return {"inverse_cdf", 1, [f, g](std::span<const double> v) {
            return std::pair{quantile_eval(f, v[0]), quantile_eval(g, v[0])};
          }};
}

Coupling independent_coupling(const Law& f, const Law& g) {
  return {"independent", 2, [f, g](std::span<const double> v) {
            return std::pair{quantile_eval(f, v[0]), quantile_eval(g, v[1])};
          }};
}

Coupling identity_coupling(const Law& f) {
  return {"identity", 1, [f](std::span<const double> v) {
            const double x = quantile_eval(f, v[0]);
            return std::pair{x, x};
          }};
}

namespace {

// W1 between a law and its midpoint quantile grid of m points is at most
// (spread of the inner quantiles + tail allowance) / m.
double grid_resolution(const Law& law, std::size_t m) {
  const double h = 0.5 / static_cast<double>(m);
  const double spread = quantile_eval(law, 1.0 - h) - quantile_eval(law, h);
  const double tails = std::holds_alternative<StandardNormal>(law) ? 2.0 : 0.0;
  return (spread + tails) / static_cast<double>(m);
}

}  // namespace

DualCheck w1_dual_check(const Law& f, const Law& g, const Coupling& coupling, std::size_t n_grid) {
  if (n_grid == 0) throw Error(Errc::out_of_range, "n_grid must be positive");
  if (coupling.dimension < 1 || coupling.dimension > 2)
    throw Error(Errc::unsupported, "couplings of dimension " + std::to_string(coupling.dimension));
  const std::size_t m = coupling.dimension == 1
                            ? n_grid
                            : std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(std::sqrt(n_grid))));
  const std::size_t total = coupling.dimension == 1 ? m : m * m;

  std::vector<double> xs(total);
  std::vector<double> ys(total);
  KahanSum acc;
  std::array<double, 2> v{};
  for (std::size_t idx = 0; idx < total; ++idx) {
    v[0] = (static_cast<double>(idx % m) + 0.5) / static_cast<double>(m);
    v[1] = (static_cast<double>(idx / m) + 0.5) / static_cast<double>(m);
    const auto [x, y] = coupling.draw(std::span<const double>(v.data(), static_cast<std::size_t>(coupling.dimension)));
    xs[idx] = x;
    ys[idx] = y;
    acc += std::abs(x - y);
  }

  const double mx = w1(EmpiricalSample(std::move(xs)), f);
  const double my = w1(EmpiricalSample(std::move(ys)), g);
  if (mx > grid_resolution(f, m) + 1e-9 || my > grid_resolution(g, m) + 1e-9)
    throw Error(Errc::marginal_mismatch, "coupling '" + coupling.name + "' does not have the stated marginals");

  return {w1(f, g), acc.value() / static_cast<double>(total), mx + my};
}

// ---------------------------------------------------------------------------

SteinTestFunction::SteinTestFunction(std::array<double, 4> coefficients) : c_(coefficients) {
  for (double c : c_)
    if (!std::isfinite(c)) throw Error(Errc::non_finite, "test-function coefficient");
}

SteinTestFunction SteinTestFunction::monomial(int p) {
  if (p < 1 || p > 4) throw Error(Errc::unsupported_moment, "monomial degree must be in 1..4");
  std::array<double, 4> c{};
  c[static_cast<std::size_t>(p - 1)] = 1.0;
  return SteinTestFunction(c);
}

double SteinTestFunction::f(double w) const { return w * (c_[0] + w * (c_[1] + w * (c_[2] + w * c_[3]))); }

double SteinTestFunction::fprime(double w) const {
  return c_[0] + w * (2.0 * c_[1] + w * (3.0 * c_[2] + w * 4.0 * c_[3]));
}

double SteinTestFunction::h(double w) const { return fprime(w) - w * f(w); }

double stein_residual(const Law& law, const SteinTestFunction& tf) {
  auto moment = [&](int p) {
    return std::visit(
        [p](const auto& l) -> double {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, StandardNormal>) {
            return normal::raw_moment(p);
          } else {
            return l.raw_moment(p);
          }
        },
        law);
  };
  KahanSum e;
  const auto& c = tf.coefficients();
  for (int p = 1; p <= 4; ++p) {
    const double cp = c[static_cast<std::size_t>(p - 1)];
    if (cp == 0.0) continue;
    e += cp * p * moment(p - 1);  // E f'(W)
    e += -cp * moment(p + 1);     // E W f(W)
  }
  return e.value();
}

// ---------------------------------------------------------------------------

namespace {

struct EffectLevel {
  LevelState state;
  double next_variance;
};

EffectLevel effect_level(const RecursionModel& m, int n, std::size_t atom_cap, const PoolOptions& pool) {
  if (!m.dependent_perturbation()) {
    try {
      auto laws = propagate_exact_levels(m, n, atom_cap);
      const auto rows = moment_recursion(m, n + 1);
      const auto& row = rows[static_cast<std::size_t>(n)];
      return {{std::move(laws.back()), row.mean, row.variance, MomentSource::exact}, rows.back().variance};
    } catch (const Error& e) {
      if (e.code() != Errc::cap_exceeded) throw;
    }
  }
  auto pools = sample_pool_levels(m, n + 1, pool);
  const EmpiricalSample& cur = pools[static_cast<std::size_t>(n)];
  const double mean = cur.mean();
  const double var = cur.variance();
  const double next = pools.back().variance();
  return {{cur, mean, var, MomentSource::pool_estimate}, next};
}

}  // namespace

BetaContext make_beta_context(const TwoEffectModel& tm, int n, std::size_t atom_cap, const PoolOptions& pool) {
  if (n < 0) throw Error(Errc::out_of_range, "negative level");
  PoolOptions px = pool;
  px.stream = 0;
  PoolOptions py = pool;
  py.stream = 1;
  EffectLevel x = effect_level(tm.x, n, atom_cap, px);
  EffectLevel y = effect_level(tm.y, n, atom_cap, py);
  const bool exact = x.state.provenance == MomentSource::exact && y.state.provenance == MomentSource::exact;
  BetaContext ctx{n, std::move(x.state), std::move(y.state), x.next_variance + y.next_variance,
                  exact ? MomentSource::exact : MomentSource::pool_estimate};
  return ctx;
}

BetaEstimate beta_estimate(const TwoEffectModel& tm, const BetaContext& ctx, std::size_t draws, std::uint64_t seed,
                           unsigned threads) {
  if (draws == 0) throw Error(Errc::out_of_range, "beta_estimate needs at least one draw");
  constexpr std::size_t kBlock = 4096;
  const std::size_t blocks = (draws + kBlock - 1) / kBlock;
  const std::size_t width = coupled_uniform_count(tm);

  struct Partial {
    double s1 = 0, q1 = 0, s2 = 0, q2 = 0, sb = 0, qb = 0;
  };
  std::vector<Partial> partial(blocks);

  parallel_for(blocks, threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> u(width);
    for (std::size_t b = begin; b < end; ++b) {
      KahanSum s1, q1, s2, q2, sb, qb;
      const std::size_t last = std::min(draws, (b + 1) * kBlock);
      for (std::size_t d = b * kBlock; d < last; ++d) {
        CounterStream rng(seed, {static_cast<std::uint64_t>(StreamDomain::beta), static_cast<std::uint64_t>(ctx.n), d});
        for (double& v : u) v = rng.uniform();
        const CoupledDecomposition c = coupled_decomposition_sample(tm, ctx.n, ctx.x, ctx.y, ctx.next_variance, u);
        const double t1 = std::abs(c.z_tilde - c.u);
        const double z3 = c.z_tilde * c.z_tilde * c.z_tilde;
        const double u3 = c.u * c.u * c.u;
        const double t2 = 0.5 * std::abs(z3 - u3);
        s1 += t1;
        q1 += t1 * t1;
        s2 += t2;
        q2 += t2 * t2;
        sb += t1 + t2;
        qb += (t1 + t2) * (t1 + t2);
      }
      partial[b] = {s1.value(), q1.value(), s2.value(), q2.value(), sb.value(), qb.value()};
    }
  });

  KahanSum s1, q1, s2, q2, sb, qb;
  for (const auto& p : partial) {
    s1 += p.s1;
    q1 += p.q1;
    s2 += p.s2;
    q2 += p.q2;
    sb += p.sb;
    qb += p.qb;
  }
  const double nd = static_cast<double>(draws);
  auto stderr_of = [&](double sum, double sq) {
    if (draws < 2) return std::numeric_limits<double>::quiet_NaN();
    const double mean = sum / nd;
    const double var = std::max(0.0, (sq - nd * mean * mean) / (nd - 1.0));
    return std::sqrt(var / nd);
  };

  BetaEstimate out;
  out.n = ctx.n;
  out.draws = draws;
  out.term1 = s1.value() / nd;
  out.term2 = s2.value() / nd;
  out.beta = out.term1 + out.term2;
  out.stderr_term1 = stderr_of(s1.value(), q1.value());
  out.stderr_term2 = stderr_of(s2.value(), q2.value());
  out.stderr_beta = stderr_of(sb.value(), qb.value());
  return out;
}

BetaEstimate beta_estimate(const TwoEffectModel& tm, int n, std::size_t draws, std::uint64_t seed, unsigned threads,
                           std::size_t atom_cap) {
  PoolOptions pool;
  pool.seed = seed;
  pool.threads = threads;
  return beta_estimate(tm, make_beta_context(tm, n, atom_cap, pool), draws, seed, threads);
}

std::string metrics_csv_header() { return "n,w1,beta,term1,term2,stderr"; }

std::string metrics_csv_row(int n, double w1_value, const BetaEstimate& b) {
  std::ostringstream os;
  os << n << ',' << format_real(w1_value) << ',' << format_real(b.beta) << ',' << format_real(b.term1) << ','
     << format_real(b.term2) << ',' << format_real(b.stderr_beta);
  return os.str();
}

}  // namespace steinrec
