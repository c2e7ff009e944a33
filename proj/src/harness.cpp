#include "steinrec/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "steinrec/error.hpp"
#include "steinrec/numeric.hpp"
#include "steinrec/random.hpp"
#include "steinrec/serialize.hpp"

namespace steinrec {

using nlohmann::json;

const char* to_string(Method m) {
  switch (m) {
    case Method::exact:
      return "exact";
    case Method::pool:
      return "pool";
    case Method::both:
      return "both";
  }
  return "?";
}

TwoEffectModel ExperimentConfig::models() const {
  if (!x || !y) throw Error(Errc::config, "configuration needs one x and one y model");
  return {*x, *y};
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw Error(Errc::config, where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items())
    if (!ok.contains(key)) throw Error(Errc::config, "unknown key '" + key + "' in " + where);
}

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw Error(Errc::config, where + " is missing '" + key + "'");
  return obj.at(key);
}

std::vector<double> real_list(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) throw Error(Errc::config, where + " must be a non-empty list of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw Error(Errc::config, where + " must contain numbers only");
    out.push_back(e.get<double>());
  }
  return out;
}

DiscreteDistribution parse_law(const json& j, const std::string& where) {
  const std::string kind = require(j, "kind", where).get<std::string>();
  if (kind == "rademacher") {
    check_keys(j, {"kind"}, where);
    return DiscreteDistribution::rademacher();
  }
  if (kind == "bernoulli") {
    check_keys(j, {"kind", "p"}, where);
    const double p = require(j, "p", where).get<double>();
    if (!(p > 0.0 && p < 1.0)) throw Error(Errc::config, where + ": bernoulli p must lie in (0, 1)");
    return DiscreteDistribution({0.0, 1.0}, {1.0 - p, p});
  }
  if (kind == "uniform") {
    check_keys(j, {"kind", "points"}, where);
    const auto pts = real_list(require(j, "points", where), where + ".points");
    const std::vector<double> w(pts.size(), 1.0);
    return make_discrete(pts, w);
  }
  if (kind == "discrete") {
    check_keys(j, {"kind", "atoms", "probs"}, where);
    const auto atoms = real_list(require(j, "atoms", where), where + ".atoms");
    const auto probs = real_list(require(j, "probs", where), where + ".probs");
    if (atoms.size() != probs.size()) throw Error(Errc::config, where + ": atoms and probs differ in length");
    return make_discrete(atoms, probs);
  }
  throw Error(Errc::config, where + ": unknown law kind '" + kind + "'");
}

GeometricSchedule parse_geometric(const json& j, const std::string& where) {
  check_keys(j, {"base", "ratio"}, where);
  return {require(j, "base", where).get<double>(), require(j, "ratio", where).get<double>()};
}

std::vector<double> normalized(std::vector<double> a) {
  double l2 = 0.0;
  for (double v : a) l2 += v * v;
  const double l = std::sqrt(l2);
  if (l > 0.0)
    for (double& v : a) v /= l;
  return a;
}

std::pair<char, RecursionModel> parse_model(const json& j, const std::string& where) {
  check_keys(j, {"effect", "k", "coefficients", "initial", "perturbation"}, where);
  const std::string effect = require(j, "effect", where).get<std::string>();
  if (effect != "x" && effect != "y") throw Error(Errc::config, where + ": effect must be \"x\" or \"y\"");
  const int k = require(j, "k", where).get<int>();
  if (k < 2) throw Error(Errc::config, where + ": k must be at least 2");

  const json& cj = require(j, "coefficients", where);
  const std::string cwhere = where + ".coefficients";
  const std::string rule = require(cj, "rule", cwhere).get<std::string>();
  const bool normalize = cj.value("normalize", false);
  std::vector<std::vector<double>> levels;
  if (rule == "constant") {
    check_keys(cj, {"rule", "values", "normalize"}, cwhere);
    levels.push_back(real_list(require(cj, "values", cwhere), cwhere + ".values"));
  } else if (rule == "per_level") {
    check_keys(cj, {"rule", "levels", "normalize"}, cwhere);
    const json& lv = require(cj, "levels", cwhere);
    if (!lv.is_array() || lv.empty()) throw Error(Errc::config, cwhere + ".levels must be a non-empty list");
    for (std::size_t i = 0; i < lv.size(); ++i)
      levels.push_back(real_list(lv[i], cwhere + ".levels[" + std::to_string(i) + "]"));
  } else {
    throw Error(Errc::config, cwhere + ": unknown rule '" + rule + "'");
  }
  for (auto& l : levels) {
    if (l.size() != static_cast<std::size_t>(k))
      throw Error(Errc::config, cwhere + ": expected " + std::to_string(k) + " coefficients per level");
    if (normalize) l = normalized(std::move(l));
  }

  DiscreteDistribution initial = parse_law(require(j, "initial", where), where + ".initial");

  PerturbationSpec pert = NoPerturbation{};
  if (j.contains("perturbation")) {
    const json& pj = j.at("perturbation");
    const std::string pwhere = where + ".perturbation";
    const std::string kind = require(pj, "kind", pwhere).get<std::string>();
    if (kind == "none") {
      check_keys(pj, {"kind"}, pwhere);
    } else if (kind == "independent") {
      check_keys(pj, {"kind", "law", "scale"}, pwhere);
      pert = IndependentPerturbation{parse_law(require(pj, "law", pwhere), pwhere + ".law"),
                                     parse_geometric(require(pj, "scale", pwhere), pwhere + ".scale")};
    } else if (kind == "dependent_quadratic") {
      check_keys(pj, {"kind", "epsilon"}, pwhere);
      pert = DependentQuadraticPerturbation{parse_geometric(require(pj, "epsilon", pwhere), pwhere + ".epsilon")};
    } else {
      throw Error(Errc::config, pwhere + ": unknown kind '" + kind + "'");
    }
  }
  return {effect[0], RecursionModel(CoefficientSchedule::per_level(std::move(levels)), std::move(initial),
                                    std::move(pert))};
}

template <class T>
T positive_int(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  const auto v = j.at(key).get<long long>();
  if (v < 0) throw Error(Errc::config, std::string(key) + " must be non-negative");
  return static_cast<T>(v);
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(Errc::config, std::string("configuration is not valid JSON: ") + e.what());
  }
  try {
    check_keys(j, {"models", "horizon", "method", "pool_size", "replicates", "seed", "atom_cap", "threads",
                   "fit_min_level", "beta_draws", "perturbation_draws", "out_dir"},
               "configuration");
    ExperimentConfig cfg;
    const json& models = require(j, "models", "configuration");
    if (!models.is_array() || models.size() != 2)
      throw Error(Errc::config, "'models' must list exactly two models (x and y)");
    for (std::size_t i = 0; i < models.size(); ++i) {
      auto [effect, model] = parse_model(models[i], "models[" + std::to_string(i) + "]");
      auto& slot = effect == 'x' ? cfg.x : cfg.y;
      if (slot) throw Error(Errc::config, std::string("two models for effect ") + effect);
      slot.emplace(std::move(model));
    }
    cfg.horizon = j.value("horizon", cfg.horizon);
    if (cfg.horizon < 2) throw Error(Errc::config, "horizon must be at least 2");
    if (j.contains("method")) {
      const std::string m = j.at("method").get<std::string>();
      if (m == "exact") cfg.method = Method::exact;
      else if (m == "pool") cfg.method = Method::pool;
      else if (m == "both") cfg.method = Method::both;
      else throw Error(Errc::config, "method must be exact, pool or both");
    }
    cfg.pool_size = positive_int(j, "pool_size", cfg.pool_size);
    if (cfg.pool_size < 1000) throw Error(Errc::config, "pool_size must be at least 1000");
    cfg.replicates = positive_int(j, "replicates", cfg.replicates);
    if (cfg.replicates < 1) throw Error(Errc::config, "replicates must be at least 1");
    cfg.seed = positive_int<std::uint64_t>(j, "seed", cfg.seed);
    cfg.atom_cap = positive_int(j, "atom_cap", cfg.atom_cap);
    cfg.threads = positive_int(j, "threads", cfg.threads);
    if (cfg.threads < 1) throw Error(Errc::config, "threads must be at least 1");
    cfg.fit_min_level = positive_int(j, "fit_min_level", cfg.fit_min_level);
    cfg.beta_draws = positive_int(j, "beta_draws", cfg.beta_draws);
    cfg.perturbation_draws = positive_int(j, "perturbation_draws", cfg.perturbation_draws);
    if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
    if (cfg.method != Method::pool && (cfg.x->dependent_perturbation() || cfg.y->dependent_perturbation()))
      throw Error(Errc::config, "dependent perturbations need method \"pool\"");
    return cfg;
  } catch (const json::exception& e) {
    throw Error(Errc::config, std::string("configuration has a value of the wrong type: ") + e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// ---------------------------------------------------------------------------
// Decay fit

DecayFitResult fit_decay(const std::vector<std::pair<int, double>>& rows) {
  if (rows.size() < 3) throw Error(Errc::out_of_range, "decay fit needs at least three rows");
  const double m = static_cast<double>(rows.size());
  double mx = 0.0, my = 0.0;
  for (const auto& [n, d] : rows) {
    if (!(d > 0.0)) throw Error(Errc::out_of_range, "decay fit needs positive distances");
    mx += n;
    my += std::log(d);
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [n, d] : rows) {
    sxx += (n - mx) * (n - mx);
    sxy += (n - mx) * (std::log(d) - my);
  }
  if (!(sxx > 0.0)) throw Error(Errc::out_of_range, "decay fit needs distinct levels");
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double ssr = 0.0;
  for (const auto& [n, d] : rows) {
    const double e = std::log(d) - (intercept + slope * n);
    ssr += e * e;
  }
  const double s2 = ssr / (m - 2.0);
  const double se_slope = std::sqrt(s2 / sxx);
  const double se_intercept = std::sqrt(s2 * (1.0 / m + mx * mx / sxx));
  const boost::math::students_t dist(m - 2.0);
  const double t = boost::math::quantile(boost::math::complement(dist, 0.025));

  DecayFitResult r;
  r.c_fit = std::exp(intercept);
  r.gamma_fit = std::exp(slope);
  r.gamma_lo = std::exp(slope - t * se_slope);
  r.gamma_hi = std::exp(slope + t * se_slope);
  r.c_lo = std::exp(intercept - t * se_intercept);
  r.c_hi = std::exp(intercept + t * se_intercept);
  r.rows_used = rows.size();
  return r;
}

std::vector<std::pair<int, double>> qualifying_rows(const DecayCurve& curve, Method method, int fit_min_level) {
  std::vector<std::pair<int, double>> out;
  for (const auto& r : curve.rows) {
    if (r.method != method || r.n < fit_min_level) continue;
    if (method != Method::exact && !std::isnan(r.stderr_d) && !(r.d_n > 10.0 * r.stderr_d)) continue;
    out.emplace_back(r.n, r.d_n);
  }
  return out;
}

std::string verdict(const RateReport& report, const std::optional<DecayFitResult>& fit) {
  if (!report.hypotheses_ok()) return "hypotheses not met — no claim";
  if (!fit) return "insufficient rows for a fit — no claim";
  return fit->gamma_fit <= report.gamma_total + kGammaMargin ? "bound consistent" : "bound inconsistent";
}

// ---------------------------------------------------------------------------
// Experiment

namespace {

struct PoolRun {
  std::vector<EmpiricalSample> x;
  std::vector<EmpiricalSample> y;
  std::uint64_t seed;
};

std::uint64_t replicate_seed(std::uint64_t master, std::size_t r) {
  return r == 0 ? master : derive_key(master, {0x7265706cULL, r});
}

PoolRun run_pools(const TwoEffectModel& tm, const ExperimentConfig& cfg, std::size_t replicate, int levels) {
  PoolOptions opt;
  opt.pool_size = cfg.pool_size;
  opt.seed = replicate_seed(cfg.seed, replicate);
  opt.threads = cfg.threads;
  opt.stream = 0;
  auto x = sample_pool_levels(tm.x, levels, opt);
  opt.stream = 1;
  auto y = sample_pool_levels(tm.y, levels, opt);
  return {std::move(x), std::move(y), opt.seed};
}

// Z = X + Y with the X pool permuted by a seeded shuffle, so pairs are not
// formed in sorted order.
EmpiricalSample pair_pools(const EmpiricalSample& x, const EmpiricalSample& y, std::uint64_t seed, int n) {
  const std::size_t size = x.size();
  std::vector<std::size_t> perm(size);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  CounterStream rng(seed, {static_cast<std::uint64_t>(StreamDomain::pairing), static_cast<std::uint64_t>(n)});
  for (std::size_t i = size; i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
  std::vector<double> z(size);
  const auto xv = x.values();
  const auto yv = y.values();
  for (std::size_t j = 0; j < size; ++j) z[j] = xv[perm[j]] + yv[j];
  return EmpiricalSample(std::move(z), {seed, 2});
}

double distance_to_normal(const DiscreteDistribution& z) { return w1(standardize(z), StandardNormal{}); }

double distance_to_normal(const EmpiricalSample& z) {
  if (!(z.variance() > 0.0)) throw Error(Errc::degenerate, "sampled Z has zero variance");
  return w1(z.standardized(), StandardNormal{});
}

struct Moments {
  EffectMoments x;
  EffectMoments y;
};

EffectMoments effect_moments(const RecursionModel& m, const std::vector<EmpiricalSample>* pools, int levels,
                             const ExperimentConfig& cfg, std::uint64_t stream) {
  if (!m.dependent_perturbation()) return exact_moments(m, levels);
  if (!pools) throw Error(Errc::config, "dependent perturbations need method \"pool\"");
  return estimated_moments(m, std::span<const EmpiricalSample>(pools->data(), static_cast<std::size_t>(levels) + 1),
                           cfg.perturbation_draws, cfg.seed, stream);
}

ExperimentResult bounds_from(const TwoEffectModel& tm, const Moments& mom, int levels) {
  ExperimentResult res;
  res.cx = fit_condition_constants(mom.x.state, mom.x.perturbation, tm.x.lambda_limit(), levels);
  res.cy = fit_condition_constants(mom.y.state, mom.y.perturbation, tm.y.lambda_limit(), levels);
  res.report = rate_report(res.cx, res.cy, tm, mom.x, mom.y, levels);
  return res;
}

LevelState exact_state(const DiscreteDistribution& law, const MomentRow& row) {
  return {law, row.mean, row.variance, MomentSource::exact};
}

LevelState pool_state(const EmpiricalSample& pool) {
  return {pool, pool.mean(), pool.variance(), MomentSource::pool_estimate};
}

}  // namespace

ExperimentResult run_bounds(const ExperimentConfig& cfg) {
  const TwoEffectModel tm = cfg.models();
  const int levels = std::max(cfg.horizon, 3);
  std::optional<PoolRun> pools;
  if (tm.x.dependent_perturbation() || tm.y.dependent_perturbation()) pools = run_pools(tm, cfg, 0, levels);
  const Moments mom{effect_moments(tm.x, pools ? &pools->x : nullptr, levels, cfg, 0),
                    effect_moments(tm.y, pools ? &pools->y : nullptr, levels, cfg, 1)};
  ExperimentResult res = bounds_from(tm, mom, levels);
  res.verdict = verdict(res.report, std::nullopt);
  return res;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const TwoEffectModel tm = cfg.models();
  const int horizon = cfg.horizon;
  const int levels = std::max(horizon, 3);  // the envelope fit needs at least four levels
  const bool want_exact = cfg.method != Method::pool;
  const bool want_pool = cfg.method != Method::exact;
  // beta at level n needs laws at n and variance at n + 1 <= horizon.
  const int pool_levels = std::max(levels, horizon + 1);

  std::vector<DiscreteDistribution> ex, ey;
  if (want_exact) {
    ex = propagate_exact_levels(tm.x, horizon, cfg.atom_cap);
    ey = propagate_exact_levels(tm.y, horizon, cfg.atom_cap);
  }
  std::vector<PoolRun> runs;
  if (want_pool)
    for (std::size_t r = 0; r < cfg.replicates; ++r) runs.push_back(run_pools(tm, cfg, r, pool_levels));

  const Moments mom{effect_moments(tm.x, want_pool ? &runs[0].x : nullptr, levels, cfg, 0),
                    effect_moments(tm.y, want_pool ? &runs[0].y : nullptr, levels, cfg, 1)};
  ExperimentResult res = bounds_from(tm, mom, levels);
  const RnSeries rn = rn_series(tm, mom.x, mom.y, horizon);

  auto fill_common = [&](CurveRow& row, int n) {
    const auto i = static_cast<std::size_t>(n);
    row.r_x = n < horizon ? rn.rows[i].r_x : kNaN;
    row.r_y = n < horizon ? rn.rows[i].r_y : kNaN;
    row.gap_ok = res.report.gap[i].ok;
    row.beta_n = kNaN;
  };

  auto beta_for = [&](int n, LevelState x, LevelState y) {
    const auto i = static_cast<std::size_t>(n) + 1;
    const double next = mom.x.state[i].variance + mom.y.state[i].variance;
    const BetaContext ctx{n, std::move(x), std::move(y), next, mom.x.source == MomentSource::exact &&
                                                                       mom.y.source == MomentSource::exact
                                                                   ? MomentSource::exact
                                                                   : MomentSource::pool_estimate};
    return beta_estimate(tm, ctx, cfg.beta_draws, cfg.seed, cfg.threads).beta;
  };

  for (int n = 0; n <= horizon; ++n) {
    const auto i = static_cast<std::size_t>(n);
    if (want_exact) {
      CurveRow row;
      row.n = n;
      row.method = Method::exact;
      row.d_n = distance_to_normal(convolve(ex[i], ey[i], cfg.atom_cap));
      row.stderr_d = kNaN;
      fill_common(row, n);
      if (cfg.beta_draws > 0 && n < horizon)
        row.beta_n = beta_for(n, exact_state(ex[i], mom.x.state[i]), exact_state(ey[i], mom.y.state[i]));
      res.curve.rows.push_back(row);
    }
    if (want_pool) {
      std::vector<double> d;
      for (const auto& run : runs) d.push_back(distance_to_normal(pair_pools(run.x[i], run.y[i], run.seed, n)));
      CurveRow row;
      row.n = n;
      row.method = Method::pool;
      const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
      row.d_n = mean;
      if (d.size() > 1) {
        double ss = 0.0;
        for (double v : d) ss += (v - mean) * (v - mean);
        row.stderr_d = std::sqrt(ss / static_cast<double>(d.size() - 1) / static_cast<double>(d.size()));
      } else {
        row.stderr_d = kNaN;
      }
      fill_common(row, n);
      if (cfg.beta_draws > 0 && n < horizon)
        row.beta_n = beta_for(n, pool_state(runs[0].x[i]), pool_state(runs[0].y[i]));
      res.curve.rows.push_back(row);
    }
  }

  res.curve.fit_method = want_exact ? Method::exact : Method::pool;
  const auto rows = qualifying_rows(res.curve, res.curve.fit_method, cfg.fit_min_level);
  if (rows.size() >= 3) res.curve.fit = fit_decay(rows);
  res.verdict = verdict(res.report, res.curve.fit);
  return res;
}

// ---------------------------------------------------------------------------
// Output

namespace {

std::string field(double v) { return std::isnan(v) ? std::string() : format_real(v); }

}  // namespace

std::string curve_csv(const DecayCurve& curve) {
  std::ostringstream os;
  os << "n,method,d_n,stderr,beta_n,r_x,r_y,gap_flag\n";
  for (const auto& r : curve.rows)
    os << r.n << ',' << to_string(r.method) << ',' << field(r.d_n) << ',' << field(r.stderr_d) << ','
       << field(r.beta_n) << ',' << field(r.r_x) << ',' << field(r.r_y) << ',' << (r.gap_ok ? 1 : 0) << '\n';
  return os.str();
}

std::string report_text(const ExperimentResult& result) {
  std::ostringstream os;
  os << to_key_value(result.report);
  if (result.curve.fit) {
    const auto& f = *result.curve.fit;
    os << "gamma_fit " << format_real(f.gamma_fit) << '\n';
    os << "gamma_fit_band " << format_real(f.gamma_lo) << ' ' << format_real(f.gamma_hi) << '\n';
    os << "c_fit " << format_real(f.c_fit) << '\n';
    os << "c_fit_band " << format_real(f.c_lo) << ' ' << format_real(f.c_hi) << '\n';
    os << "fit_method " << to_string(result.curve.fit_method) << '\n';
    os << "fit_rows " << f.rows_used << '\n';
  } else {
    os << "gamma_fit \n";
    os << "c_fit \n";
  }
  os << to_key_value(result.cx, "x_");
  os << to_key_value(result.cy, "y_");
  os << "verdict " << result.verdict << '\n';
  return os.str();
}

void emit_report(const ExperimentResult& result, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::io, "cannot create " + dir.string() + ": " + ec.message());
  auto write = [&](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(Errc::io, "cannot write " + p.string());
    out << text;
    if (!out) throw Error(Errc::io, "failed writing " + p.string());
  };
  write(dir / "curve.csv", curve_csv(result.curve));
  write(dir / "report.txt", report_text(result));
}

}  // namespace steinrec
