#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "steinrec/error.hpp"
#include "steinrec/harness.hpp"

using namespace steinrec;

namespace {

std::string model_json(const char* effect, const std::string& initial, const std::string& perturbation = "") {
  std::string s = std::string(R"({"effect": ")") + effect +
                  R"(", "k": 2, "coefficients": {"rule": "constant", "values": [1, 1], "normalize": true}, "initial": )" +
                  initial;
  if (!perturbation.empty()) s += R"(, "perturbation": )" + perturbation;
  return s + "}";
}

std::string config_json(const std::string& extra, const std::string& x, const std::string& y) {
  return "{" + extra + R"("models": [)" + x + ", " + y + "]}";
}

std::string clt_json(const std::string& extra = "") {
  return config_json(extra, model_json("x", R"({"kind": "rademacher"})"), model_json("y", R"({"kind": "rademacher"})"));
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return Errc::io;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(FitDecay, ExactGeometricInputs) {
  std::vector<std::pair<int, double>> rows;
  for (int n = 0; n <= 8; ++n) rows.emplace_back(n, std::pow(2.0, -n / 2.0));
  const auto f = fit_decay(rows);
  EXPECT_NEAR(f.gamma_fit, 1.0 / std::numbers::sqrt2, 1e-9);
  EXPECT_NEAR(f.c_fit, 1.0, 1e-9);
  EXPECT_EQ(f.rows_used, 9u);
  EXPECT_NEAR(f.gamma_lo, f.gamma_fit, 1e-9);
  EXPECT_NEAR(f.gamma_hi, f.gamma_fit, 1e-9);

  rows.clear();
  for (int n = 2; n <= 10; ++n) rows.emplace_back(n, 3.0 * std::pow(0.9, n));
  const auto g = fit_decay(rows);
  EXPECT_NEAR(g.gamma_fit, 0.9, 1e-12);
  EXPECT_NEAR(g.c_fit, 3.0, 1e-12);
}

TEST(FitDecay, NoisyInputs) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.01);
    std::vector<std::pair<int, double>> rows;
    for (int n = 0; n <= 8; ++n) rows.emplace_back(n, 2.0 * std::pow(0.75, n) * (1.0 + noise(rng)));
    const auto f = fit_decay(rows);
    EXPECT_NEAR(f.gamma_fit, 0.75, 0.02) << seed;
    EXPECT_LT(f.gamma_lo, f.gamma_fit);
    EXPECT_GT(f.gamma_hi, f.gamma_fit);
  }
}

TEST(FitDecay, Errors) {
  EXPECT_EQ(code_of([] { fit_decay({{0, 1.0}, {1, 0.5}}); }), Errc::out_of_range);
  EXPECT_EQ(code_of([] { fit_decay({{0, 1.0}, {1, 0.0}, {2, 0.25}}); }), Errc::out_of_range);
}

TEST(Config, ParsesClt) {
  const auto cfg = parse_config(clt_json(R"("horizon": 6, "seed": 42, "method": "both", "replicates": 3, )"));
  EXPECT_EQ(cfg.horizon, 6);
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.method, Method::both);
  EXPECT_EQ(cfg.replicates, 3u);
  ASSERT_TRUE(cfg.x && cfg.y);
  EXPECT_NEAR(cfg.x->coefficients(3)[0], 1.0 / std::numbers::sqrt2, 1e-15);
  EXPECT_EQ(cfg.y->initial(), DiscreteDistribution::rademacher());
}

TEST(Config, FullModelSchema) {
  const std::string x = R"({"effect": "x", "k": 3,
    "coefficients": {"rule": "per_level", "levels": [[1, 0.5, 0.25], [0.6, 0.6, 0.3]]},
    "initial": {"kind": "discrete", "atoms": [-1, 2], "probs": [2, 1]},
    "perturbation": {"kind": "independent", "law": {"kind": "uniform", "points": [-1, 0, 1]},
                     "scale": {"base": 0.2, "ratio": 0.5}}})";
  const std::string y = R"({"effect": "y", "k": 2, "coefficients": {"rule": "constant", "values": [0.8, 0.6]},
    "initial": {"kind": "bernoulli", "p": 0.25}})";
  const auto cfg = parse_config(config_json("", x, y));
  EXPECT_EQ(cfg.x->k(), 3);
  EXPECT_EQ(cfg.x->coefficients(0)[2], 0.25);
  EXPECT_EQ(cfg.x->coefficients(9)[0], 0.6);
  EXPECT_NEAR(cfg.x->initial().probs()[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(cfg.x->perturbation_moments(2).variance, 0.05 * 0.05 * 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(cfg.y->initial().mean(), 0.25, 1e-15);
  EXPECT_FALSE(cfg.y->has_perturbation());
}

TEST(Config, UnknownKeysAndBadValues) {
  const std::string rad = R"({"kind": "rademacher"})";
  EXPECT_EQ(code_of([&] { parse_config(clt_json(R"("horizn": 4, )")); }), Errc::config);
  EXPECT_EQ(code_of([&] {
              parse_config(config_json("", R"({"effect": "x", "k": 2, "coefficients": {"rule": "constant", "values": [1, 1]},
                 "initial": {"kind": "rademacher"}, "colour": 1})",
                                       model_json("y", rad)));
            }),
            Errc::config);
  EXPECT_EQ(code_of([&] { parse_config(config_json("", model_json("x", R"({"kind": "rademacher", "p": 1})"), model_json("y", rad))); }),
            Errc::config);
  EXPECT_EQ(code_of([&] { parse_config(config_json("", model_json("x", R"({"kind": "cauchy"})"), model_json("y", rad))); }),
            Errc::config);
  EXPECT_EQ(code_of([&] { parse_config(config_json("", model_json("x", rad), model_json("x", rad))); }), Errc::config);
  EXPECT_EQ(code_of([&] { parse_config(clt_json(R"("horizon": 1, )")); }), Errc::config);
  EXPECT_EQ(code_of([&] { parse_config(clt_json(R"("method": "magic", )")); }), Errc::config);
  EXPECT_EQ(code_of([&] { parse_config(clt_json(R"("pool_size": 10, )")); }), Errc::config);
  EXPECT_EQ(code_of([&] { parse_config(clt_json(R"("seed": "abc", )")); }), Errc::config);
  EXPECT_EQ(code_of([&] { parse_config("{not json"); }), Errc::config);
  EXPECT_EQ(code_of([&] {
              parse_config(config_json("", model_json("x", rad, R"({"kind": "dependent_quadratic", "epsilon": {"base": 0.1, "ratio": 0.5}})"),
                                       model_json("y", rad)));
            }),
            Errc::config);
  EXPECT_NO_THROW(parse_config(
      config_json(R"("method": "pool", )",
                  model_json("x", rad, R"({"kind": "dependent_quadratic", "epsilon": {"base": 0.1, "ratio": 0.5}})"),
                  model_json("y", rad))));
  EXPECT_EQ(code_of([&] { load_config("/nonexistent/config.json"); }), Errc::io);
}

TEST(Experiment, CltExact) {
  auto cfg = parse_config(clt_json(R"("horizon": 8, "seed": 1, )"));
  const auto res = run_experiment(cfg);
  ASSERT_EQ(res.curve.rows.size(), 9u);
  ASSERT_TRUE(res.curve.fit.has_value());
  EXPECT_GE(res.curve.fit->gamma_fit, 0.66);
  EXPECT_LE(res.curve.fit->gamma_fit, 0.76);
  EXPECT_EQ(res.curve.fit->rows_used, 7u);
  EXPECT_NEAR(res.report.gamma_total, 1.0 / std::numbers::sqrt2, 1e-9);
  EXPECT_EQ(res.verdict, "bound consistent");
  EXPECT_EQ(res.report.psi_xy, res.report.psi_yx);

  const double s = std::numbers::sqrt2;
  const DiscreteDistribution z0({-s, 0.0, s}, {0.25, 0.5, 0.25});
  EXPECT_NEAR(res.curve.rows[0].d_n, w1(z0, StandardNormal{}), 1e-14);
  for (const auto& row : res.curve.rows) {
    EXPECT_GE(row.d_n, 0.0);
    EXPECT_TRUE(std::isnan(row.stderr_d));
    EXPECT_TRUE(row.gap_ok);
    // d_n tracks 2^{-n/2}
    if (row.n >= 2) EXPECT_NEAR(row.d_n * std::pow(2.0, row.n / 2.0), res.curve.rows[2].d_n * 2.0, 0.1);
  }

  const auto again = run_experiment(cfg);
  EXPECT_EQ(curve_csv(again.curve), curve_csv(res.curve));
}

TEST(Experiment, PoolAgreesWithExactAtLevelFive) {
  auto cfg = parse_config(clt_json(R"("horizon": 5, "seed": 20240611, "method": "both", "pool_size": 100000, )"));
  const auto res = run_experiment(cfg);
  double exact = -1, pool = -1;
  for (const auto& row : res.curve.rows)
    if (row.n == 5) (row.method == Method::exact ? exact : pool) = row.d_n;
  ASSERT_GE(exact, 0.0);
  ASSERT_GE(pool, 0.0);
  EXPECT_LE(std::abs(pool - exact), 0.02);
}

TEST(Experiment, CsvIsIndependentOfThreads) {
  const std::string geo = R"({"kind": "independent", "law": {"kind": "rademacher"}, "scale": {"base": 0.2, "ratio": 0.5}})";
  const std::string text =
      config_json(R"("horizon": 3, "seed": 77, "method": "both", "pool_size": 20000, "replicates": 3, "beta_draws": 5000, )",
                  model_json("x", R"({"kind": "rademacher"})", geo),
                  model_json("y", R"({"kind": "uniform", "points": [-1, 0, 1]})", geo));
  auto cfg = parse_config(text);
  cfg.threads = 1;
  const std::string base = curve_csv(run_experiment(cfg).curve);
  for (unsigned t : {4u, 8u}) {
    cfg.threads = t;
    EXPECT_EQ(curve_csv(run_experiment(cfg).curve), base) << t;
  }
  cfg.seed = 78;
  EXPECT_NE(curve_csv(run_experiment(cfg).curve), base);
}

TEST(Experiment, GapViolationGivesNoClaim) {
  const std::string wide = R"({"kind": "discrete", "atoms": [-1.4142135623730951, 1.4142135623730951], "probs": [1, 1]})";
  const auto cfg = parse_config(config_json(R"("horizon": 6, )", model_json("x", wide),
                                            model_json("y", R"({"kind": "rademacher"})")));
  const auto res = run_experiment(cfg);
  EXPECT_FALSE(res.report.gap_ok);
  EXPECT_EQ(res.verdict, "hypotheses not met — no claim");
  for (const auto& row : res.curve.rows) EXPECT_FALSE(row.gap_ok);
}

TEST(Experiment, DependentPerturbationPoolRun) {
  const std::string rad = R"({"kind": "rademacher"})";
  const auto cfg = parse_config(config_json(
      R"("horizon": 4, "method": "pool", "pool_size": 20000, "seed": 5, "perturbation_draws": 20000, )",
      model_json("x", rad, R"({"kind": "dependent_quadratic", "epsilon": {"base": 0.3, "ratio": 0.5}})"),
      model_json("y", rad, R"({"kind": "dependent_quadratic", "epsilon": {"base": 0.3, "ratio": 0.5}})")));
  const auto res = run_experiment(cfg);
  EXPECT_EQ(res.curve.rows.size(), 5u);
  for (const auto& row : res.curve.rows) EXPECT_EQ(row.method, Method::pool);
  EXPECT_FALSE(res.verdict.empty());
}

TEST(Verdict, Logic) {
  RateReport r;
  r.phi_ok = r.psi_ok = r.gap_ok = true;
  r.gamma_total = 0.7;
  DecayFitResult f;
  f.gamma_fit = 0.74;
  EXPECT_EQ(verdict(r, f), "bound consistent");
  f.gamma_fit = 0.76;
  EXPECT_EQ(verdict(r, f), "bound inconsistent");
  EXPECT_EQ(verdict(r, std::nullopt), "insufficient rows for a fit — no claim");
  for (bool* flag : {&r.phi_ok, &r.psi_ok, &r.gap_ok}) {
    *flag = false;
    EXPECT_EQ(verdict(r, f), "hypotheses not met — no claim");
    *flag = true;
  }
}

TEST(Curve, QualifyingRows) {
  DecayCurve c;
  c.rows = {{0, Method::pool, 0.5, 0.01}, {1, Method::pool, 0.3, 0.01}, {2, Method::pool, 0.2, 0.01},
            {3, Method::pool, 0.05, 0.01}, {4, Method::pool, 0.1, NAN},    {2, Method::exact, 0.2, NAN}};
  const auto rows = qualifying_rows(c, Method::pool, 1);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].first, 1);
  EXPECT_EQ(rows[1].first, 2);
  EXPECT_EQ(rows[2].first, 4);
  EXPECT_EQ(qualifying_rows(c, Method::exact, 0).size(), 1u);
}

TEST(Output, CsvAndReportFiles) {
  auto cfg = parse_config(clt_json(R"("horizon": 4, )"));
  const auto res = run_experiment(cfg);
  const std::string csv = curve_csv(res.curve);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "n,method,d_n,stderr,beta_n,r_x,r_y,gap_flag");
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  std::getline(lines, line);
  EXPECT_EQ(line.substr(0, 10), "0,exact,0.");
  EXPECT_NE(line.find(",,,"), std::string::npos) << line;  // stderr and beta empty

  const auto dir = std::filesystem::temp_directory_path() / "steinrec_harness_test";
  std::filesystem::remove_all(dir);
  emit_report(res, dir);
  EXPECT_EQ(slurp(dir / "curve.csv"), csv);
  const std::string report = "\n" + slurp(dir / "report.txt");
  for (const char* key : {"phi_x2 ", "phi_x4 ", "phi_y2 ", "phi_y4 ", "psi_xy ", "psi_yx ", "gamma_beta ",
                          "gamma_x_single ", "gamma_y_single ", "gamma_total ", "gamma_fit ", "c_fit ", "verdict "})
    EXPECT_NE(report.find(std::string("\n") + key), std::string::npos) << key;
  EXPECT_NE(report.find("verdict bound consistent\n"), std::string::npos);
  std::filesystem::remove_all(dir);

  const auto blocked = std::filesystem::temp_directory_path() / "steinrec_blocked_file";
  std::ofstream(blocked) << "x";
  EXPECT_EQ(code_of([&] { emit_report(res, blocked / "sub"); }), Errc::io);
  std::filesystem::remove(blocked);
}

TEST(Bounds, RunBoundsOnly) {
  const auto res = run_bounds(parse_config(clt_json(R"("horizon": 8, )")));
  EXPECT_NEAR(res.report.gamma_total, 1.0 / std::numbers::sqrt2, 1e-9);
  EXPECT_TRUE(res.curve.rows.empty());
}
