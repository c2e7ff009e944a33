#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "steinrec/dist.hpp"
#include "steinrec/error.hpp"
#include "steinrec/numeric.hpp"
#include "steinrec/serialize.hpp"

using namespace steinrec;

namespace {

std::vector<double> vec(std::span<const double> s) { return {s.begin(), s.end()}; }

template <class Fn>
Errc code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return Errc::io;
}

DiscreteDistribution random_law(std::mt19937_64& rng, int atoms) {
  std::uniform_real_distribution<double> v(-5, 5), w(0.05, 1);
  std::vector<double> xs, ws;
  for (int i = 0; i < atoms; ++i) {
    xs.push_back(v(rng));
    ws.push_back(w(rng));
  }
  return make_discrete(xs, ws);
}

}  // namespace

TEST(MakeDiscrete, NormalizesWeights) {
  const std::vector<double> v{1, -1}, w{1, 1};
  const auto d = make_discrete(v, w);
  EXPECT_EQ(vec(d.atoms()), (std::vector<double>{-1, 1}));
  EXPECT_EQ(vec(d.probs()), (std::vector<double>{0.5, 0.5}));
}

TEST(MakeDiscrete, MergesDuplicates) {
  const std::vector<double> v{0, 0, 1}, w{1, 1, 2};
  const auto d = make_discrete(v, w);
  EXPECT_EQ(vec(d.atoms()), (std::vector<double>{0, 1}));
  EXPECT_EQ(vec(d.probs()), (std::vector<double>{0.5, 0.5}));
}

TEST(MakeDiscrete, SingleAtom) {
  const std::vector<double> v{3}, w{5};
  const auto d = make_discrete(v, w);
  EXPECT_EQ(vec(d.atoms()), (std::vector<double>{3}));
  EXPECT_EQ(vec(d.probs()), (std::vector<double>{1.0}));
}

TEST(MakeDiscrete, MergesWithinTolerance) {
  const std::vector<double> v{1.0, 1.0 + 5e-13, 2.0}, w{1, 1, 2};
  const auto d = make_discrete(v, w);
  EXPECT_EQ(d.size(), 2u);
  EXPECT_DOUBLE_EQ(d.probs()[0], 0.5);
}

TEST(MakeDiscrete, DistinctErrors) {
  const std::vector<double> empty;
  const std::vector<double> one{1.0};
  const std::vector<double> neg{-1.0};
  const std::vector<double> inf{INFINITY};
  const std::vector<double> zero{0.0};
  EXPECT_EQ(code_of([&] { make_discrete(empty, empty); }), Errc::empty_input);
  EXPECT_EQ(code_of([&] { make_discrete(one, neg); }), Errc::negative_weight);
  EXPECT_EQ(code_of([&] { make_discrete(inf, one); }), Errc::non_finite);
  EXPECT_EQ(code_of([&] { make_discrete(one, zero); }), Errc::zero_weight);
}

TEST(MakeDiscrete, IdempotentOnItsOutput) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 200; ++t) {
    const auto d = random_law(rng, 1 + t % 9);
    const auto again = make_discrete(d.atoms(), d.probs());
    EXPECT_EQ(d, again);
  }
}

TEST(DiscreteDistribution, ValidatingConstructorRejectsBadInput) {
  EXPECT_EQ(code_of([] { DiscreteDistribution({1, 0}, {0.5, 0.5}); }), Errc::out_of_range);
  EXPECT_EQ(code_of([] { DiscreteDistribution({0, 1}, {0.5, 0.6}); }), Errc::out_of_range);
  EXPECT_EQ(code_of([] { DiscreteDistribution({0, 1}, {1.0}); }), Errc::size_mismatch);
}

TEST(CentralMoment, Examples) {
  const auto r = DiscreteDistribution::rademacher();
  EXPECT_DOUBLE_EQ(central_moment(r, 2), 1.0);
  EXPECT_DOUBLE_EQ(central_moment(r, 4), 1.0);
  const std::vector<double> v{-1, 0, 1}, w{1, 1, 1};
  EXPECT_NEAR(central_moment(make_discrete(v, w), 2), 2.0 / 3.0, 1e-15);
  EXPECT_EQ(code_of([&] { central_moment(r, 5); }), Errc::unsupported_moment);
}

TEST(CentralMoment, FirstMomentVanishesAndVarianceNonNegative) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 200; ++t) {
    const auto d = random_law(rng, 1 + t % 7);
    EXPECT_NEAR(central_moment(d, 1), 0.0, 1e-14);
    const double v = central_moment(d, 2);
    EXPECT_GE(v, 0.0);
    if (d.size() == 1) EXPECT_EQ(v, 0.0);
    else EXPECT_GT(v, 0.0);
  }
}

TEST(Standardize, Examples) {
  const auto r = DiscreteDistribution::rademacher();
  EXPECT_EQ(standardize(r), r);

  const auto b5 = standardize(DiscreteDistribution({0, 1}, {0.5, 0.5}));
  EXPECT_NEAR(b5.atoms()[0], -1.0, 1e-15);
  EXPECT_NEAR(b5.atoms()[1], 1.0, 1e-15);

  const auto b2 = standardize(DiscreteDistribution({0, 1}, {0.8, 0.2}));
  EXPECT_NEAR(b2.atoms()[0], -0.5, 1e-15);
  EXPECT_NEAR(b2.atoms()[1], 2.0, 1e-15);
  EXPECT_DOUBLE_EQ(b2.probs()[0], 0.8);

  EXPECT_EQ(code_of([] { standardize(DiscreteDistribution::point_mass(2.0)); }), Errc::degenerate);
}

TEST(Standardize, UnitMomentsAndIdempotence) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    const auto d = random_law(rng, 2 + t % 7);
    const auto s = standardize(d);
    EXPECT_NEAR(s.mean(), 0.0, 1e-12);
    EXPECT_NEAR(central_moment(s, 2), 1.0, 1e-12);
    const auto s2 = standardize(s);
    ASSERT_EQ(s.size(), s2.size());
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(s.atoms()[i], s2.atoms()[i], 1e-12);
  }
}

TEST(CdfEval, Examples) {
  EXPECT_DOUBLE_EQ(cdf_eval(DiscreteDistribution::rademacher(), 0.0), 0.5);
  EXPECT_DOUBLE_EQ(cdf_eval(PiecewiseLinearCDF::uniform(-1, 1), 0.5), 0.75);
  EXPECT_DOUBLE_EQ(cdf_eval(StandardNormal{}, 0.0), 0.5);
  EXPECT_EQ(cdf_eval(StandardNormal{}, -INFINITY), 0.0);
  EXPECT_EQ(cdf_eval(DiscreteDistribution::rademacher(), INFINITY), 1.0);
  // right-continuous at atoms
  EXPECT_DOUBLE_EQ(cdf_eval(DiscreteDistribution::rademacher(), -1.0), 0.5);
  EXPECT_DOUBLE_EQ(cdf_eval(DiscreteDistribution::rademacher(), std::nextafter(-1.0, -2.0)), 0.0);
}

TEST(CdfEval, MonotoneOnRandomGrids) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> t(-7, 7);
  const std::vector<double> vals{-2.0, 0.3, 0.31, 4.0};
  const std::vector<Law> laws{random_law(rng, 5), PiecewiseLinearCDF({-1, 0, 2}, {0, 0.7, 1}),
                              EmpiricalSample(vals), StandardNormal{}};
  for (const auto& law : laws) {
    std::vector<double> grid(2000);
    for (double& g : grid) g = t(rng);
    std::sort(grid.begin(), grid.end());
    double prev = 0.0;
    for (double g : grid) {
      const double f = cdf_eval(law, g);
      EXPECT_GE(f, prev);
      EXPECT_LE(f, 1.0);
      prev = f;
    }
  }
}

TEST(Quantile, RightContinuousInverse) {
  const auto r = DiscreteDistribution::rademacher();
  EXPECT_EQ(r.quantile(0.25), -1.0);
  EXPECT_EQ(r.quantile(0.5), 1.0);  // jump level goes to the larger atom
  EXPECT_EQ(r.quantile(0.75), 1.0);
  const auto u = PiecewiseLinearCDF::uniform(-1, 1);
  EXPECT_DOUBLE_EQ(u.quantile(0.25), -0.5);
  EXPECT_NEAR(StandardNormal{}.quantile(0.975), 1.959963984540054, 1e-13);
}

TEST(StandardNormal, CdfAccuracy) {
  for (double t = -30; t <= 8; t += 0.37) {
    const double want = oracle::phi_cdf(t);
    EXPECT_NEAR(normal::cdf(t), want, 1e-14 * want) << t;
  }
}

TEST(StandardNormal, PdfAccuracy) {
  for (double t = -37; t <= 37; t += 0.41) {
    const long double tl = t;
    const double want = static_cast<double>(std::exp(-0.5L * tl * tl) / std::sqrt(2.0L * std::numbers::pi_v<long double>));
    EXPECT_NEAR(normal::pdf(t), want, 1e-14 * want) << t;
  }
}

TEST(StandardNormal, PrimitiveIdentity) {
  // int_0^t Phi = t Phi(t) + phi(t) - phi(0), against Simpson quadrature
  for (double t = -10; t <= 10; t += 0.5) {
    const double quad = (t >= 0 ? 1 : -1) * oracle::simpson(oracle::phi_cdf, std::min(0.0, t), std::max(0.0, t), 4000);
    const double closed = normal::cdf_primitive(t) - normal::pdf(0.0);
    EXPECT_NEAR(closed, quad, 1e-12) << t;
  }
}

TEST(StandardNormal, TailIntegrals) {
  for (double t : {-3.0, -0.5, 0.0, 0.7, 2.5}) {
    const double upper = oracle::simpson([](double s) { return 1.0 - oracle::phi_cdf(s); }, t, 40.0, 20000);
    EXPECT_NEAR(normal::upper_tail_integral(t), upper, 1e-11);
    EXPECT_NEAR(normal::cdf_integral(t, t + 1.3), oracle::simpson(oracle::phi_cdf, t, t + 1.3, 2000), 1e-13);
  }
}

TEST(PiecewiseLinear, MomentsOfUniform) {
  const auto u = PiecewiseLinearCDF::uniform(-1, 3);
  EXPECT_NEAR(u.mean(), 1.0, 1e-15);
  EXPECT_NEAR(u.variance(), 16.0 / 12.0, 1e-14);
  const auto s = u.scaled(-2.0);
  EXPECT_NEAR(s.min(), -6.0, 1e-15);
  EXPECT_NEAR(s.mean(), -2.0, 1e-14);
}

TEST(Convolve, EnumerationOracleAndCap) {
  const auto r = DiscreteDistribution::rademacher();
  const auto s = convolve(convolve(r, r), r);
  const auto want = oracle::enumerate_sum({1, 1, 1}, {{-1, 1}, {-1, 1}, {-1, 1}}, {{.5, .5}, {.5, .5}, {.5, .5}});
  ASSERT_EQ(s.size(), want.size());
  std::size_t i = 0;
  for (auto [v, p] : want) {
    EXPECT_NEAR(s.atoms()[i], v, 1e-15);
    EXPECT_NEAR(s.probs()[i], p, 1e-15);
    ++i;
  }
  EXPECT_EQ(code_of([&] { convolve(s, s, 10); }), Errc::cap_exceeded);
}

TEST(Empirical, SortsAndStandardizes) {
  const std::vector<double> v{3, 1, 2, 2};
  const EmpiricalSample e(v, {7, 1});
  EXPECT_EQ(vec(e.values()), (std::vector<double>{1, 2, 2, 3}));
  EXPECT_DOUBLE_EQ(e.cdf(2.0), 0.75);
  const auto z = e.standardized();
  EXPECT_NEAR(z.mean(), 0.0, 1e-15);
  EXPECT_NEAR(z.variance(), 1.0, 1e-15);
}

TEST(Serialize, RoundTripIsExact) {
  std::mt19937_64 rng(5);
  const std::vector<double> vals{0.1, 1.0 / 3.0, -2.5e-300};
  const std::vector<Law> laws{random_law(rng, 6), PiecewiseLinearCDF({-1, 1.0 / 7.0, 2}, {0, 0.3, 1}),
                              EmpiricalSample(vals, {42, 3}), StandardNormal{}};
  for (const auto& law : laws) {
    const std::string rec = to_record(law);
    EXPECT_EQ(from_record(rec), law) << rec;
  }
  EXPECT_EQ(code_of([] { from_record("discrete 1\n1 x\n"); }), Errc::parse);
  EXPECT_EQ(code_of([] { from_record("weird 0\n"); }), Errc::parse);
}
