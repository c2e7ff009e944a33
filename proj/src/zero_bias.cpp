#include "steinrec/zero_bias.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "steinrec/error.hpp"
#include "steinrec/numeric.hpp"

namespace steinrec {

namespace {

void check_unit_open(double v, const char* what) {
  if (!(v > 0.0 && v < 1.0)) throw Error(Errc::out_of_range, std::string(what) + " must lie in (0, 1)");
}

}  // namespace

PiecewiseLinearCDF zero_bias(const DiscreteDistribution& d) {
  const auto x = d.atoms();
  const auto p = d.probs();
  const double scale = std::max({1.0, std::abs(d.min()), std::abs(d.max())});
  const double mu = d.mean();
  if (std::abs(mu) > 1e-10 * scale)
    throw Error(Errc::nonzero_mean, "zero-bias needs a mean-zero law (mean " + std::to_string(mu) + ")");
  const double var = central_moment(d, 2);
  if (d.size() < 2 || !(var > 0.0)) throw Error(Errc::degenerate, "zero-bias needs positive variance");

  const std::size_t n = x.size();
  // tail[j] = sum_{i > j} x_i p_i, the density on (x_j, x_{j+1}) times var
  std::vector<double> tail(n - 1);
  KahanSum acc;
  for (std::size_t j = n - 1; j-- > 0;) {
    acc += x[j + 1] * p[j + 1];
    tail[j] = std::max(acc.value(), 0.0);
  }

  std::vector<double> f(n);
  KahanSum mass;
  f[0] = 0.0;
  for (std::size_t j = 0; j + 1 < n; ++j) {
    mass += (x[j + 1] - x[j]) * tail[j] / var;
    f[j + 1] = mass.value();
  }
  const double total = f.back();
  for (double& v : f) v /= total;
  f.back() = 1.0;
  return {std::vector<double>(x.begin(), x.end()), std::move(f)};
}

ZeroBiasCoupling ZeroBiasCoupling::of(const DiscreteDistribution& d) { return {d, zero_bias(d)}; }

CoupledPair couple_inverse_cdf(const ZeroBiasCoupling& c, double v) {
  check_unit_open(v, "coupling uniform");
  return {c.base.quantile(v), c.biased.quantile(v)};
}

// ---------------------------------------------------------------------------

SumComponents::SumComponents(std::vector<SumComponent> entries) : entries_(std::move(entries)) {
  if (entries_.size() < 2) throw Error(Errc::invalid_model, "a sum needs at least two components");
  KahanSum l2;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (!std::isfinite(e.coefficient)) throw Error(Errc::non_finite, "coefficient " + std::to_string(i));
    const double scale = std::max({1.0, std::abs(e.law.min()), std::abs(e.law.max())});
    if (std::abs(e.law.mean()) > 1e-10 * scale)
      throw Error(Errc::nonzero_mean, "component " + std::to_string(i) + " is not centered");
    if (std::abs(e.law.variance() - 1.0) > 1e-10)
      throw Error(Errc::out_of_range, "component " + std::to_string(i) + " does not have unit variance");
    l2 += e.coefficient * e.coefficient;
  }
  lambda_ = std::sqrt(l2.value());
  if (!(lambda_ > 0.0)) throw Error(Errc::degenerate, "all coefficients are zero");
}

double SumComponents::index_weight(std::size_t i) const {
  const double c = scaled_coefficient(i);
  return c * c;
}

DiscreteDistribution sum_law(const SumComponents& s, std::size_t atom_cap) {
  DiscreteDistribution acc = affine(s.entries()[0].law, s.scaled_coefficient(0));
  for (std::size_t i = 1; i < s.size(); ++i)
    acc = convolve(acc, affine(s.entries()[i].law, s.scaled_coefficient(i)), atom_cap);
  return acc;
}

PiecewiseLinearCDF sum_zero_bias_exact(const SumComponents& s, std::size_t breakpoint_cap) {
  struct Event {
    double at;
    double slope;
  };

  // atomic law of sum_{j != skip} c_j xi_j
  auto rest_law = [&](std::size_t skip) {
    std::optional<DiscreteDistribution> acc;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (j == skip || s.scaled_coefficient(j) == 0.0) continue;
      auto term = affine(s.entries()[j].law, s.scaled_coefficient(j));
      acc = acc ? convolve(*acc, term, breakpoint_cap) : term;
    }
    return acc ? *acc : DiscreteDistribution::point_mass(0.0);
  };

  std::vector<Event> events;
  std::size_t projected = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double c = s.scaled_coefficient(i);
    const double w = c * c;
    if (w == 0.0) continue;
    const PiecewiseLinearCDF biased = zero_bias(s.entries()[i].law).scaled(c);
    const DiscreteDistribution rest = rest_law(i);
    projected += 2 * rest.size() * (biased.breakpoints().size() - 1);
    if (projected > 2 * breakpoint_cap)
      throw Error(Errc::cap_exceeded, "zero-biased sum needs more than " + std::to_string(breakpoint_cap) +
                                          " breakpoints; use the sampling path");
    const auto bx = biased.breakpoints();
    const auto bf = biased.cdf_values();
    for (std::size_t r = 0; r < rest.size(); ++r) {
      const double shift = rest.atoms()[r];
      const double q = w * rest.probs()[r];
      for (std::size_t k = 0; k + 1 < bx.size(); ++k) {
        const double slope = q * (bf[k + 1] - bf[k]) / (bx[k + 1] - bx[k]);
        if (slope == 0.0) continue;
        events.push_back({bx[k] + shift, slope});
        events.push_back({bx[k + 1] + shift, -slope});
      }
    }
  }
  if (events.empty()) throw Error(Errc::degenerate, "zero-biased sum has no mass");

  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.at < b.at; });

  std::vector<double> xs;
  std::vector<double> fs;
  xs.reserve(events.size());
  fs.reserve(events.size());
  KahanSum slope;
  KahanSum cdf;
  std::size_t e = 0;
  while (e < events.size()) {
    const double at = events[e].at;
    if (!xs.empty()) {
      const double width = at - xs.back();
      cdf += std::max(slope.value(), 0.0) * width;
    }
    xs.push_back(at);
    fs.push_back(fs.empty() ? 0.0 : std::max(cdf.value(), fs.back()));
    while (e < events.size() && events[e].at - at <= kMergeTolerance) slope += events[e++].slope;
  }
  const double total = fs.back();
  if (!(total > 0.0)) throw Error(Errc::degenerate, "zero-biased sum has no mass");
  for (double& f : fs) f = std::min(f / total, 1.0);
  fs.back() = 1.0;
  return {std::move(xs), std::move(fs)};
}

// ---------------------------------------------------------------------------

SumZeroBiasSampler::SumZeroBiasSampler(const SumComponents& s) {
  couplings_.reserve(s.size());
  KahanSum cum;
  for (std::size_t i = 0; i < s.size(); ++i) {
    couplings_.push_back(ZeroBiasCoupling::of(s.entries()[i].law));
    coef_.push_back(s.scaled_coefficient(i));
    cum += s.index_weight(i);
    cumulative_.push_back(cum.value());
  }
  for (double& c : cumulative_) c /= cumulative_.back();
  cumulative_.back() = 1.0;
}

std::size_t SumZeroBiasSampler::select_index(double selector) const {
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), selector);
  if (it == cumulative_.end()) return cumulative_.size() - 1;
  return static_cast<std::size_t>(it - cumulative_.begin());
}

CoupledPair SumZeroBiasSampler::draw(std::span<const double> u, double selector) const {
  if (u.size() != couplings_.size())
    throw Error(Errc::dimension_mismatch, "expected " + std::to_string(couplings_.size()) + " uniforms, got " +
                                              std::to_string(u.size()));
  for (double v : u) check_unit_open(v, "component uniform");
  check_unit_open(selector, "index selector");

  const std::size_t chosen = select_index(selector);
  KahanSum plain;
  KahanSum biased;
  for (std::size_t i = 0; i < couplings_.size(); ++i) {
    const double x = couplings_[i].base.quantile(u[i]);
    plain += coef_[i] * x;
    biased += coef_[i] * (i == chosen ? couplings_[i].biased.quantile(u[i]) : x);
  }
  return {plain.value(), biased.value()};
}

CoupledPair sum_zero_bias_sample(const SumComponents& s, std::span<const double> u, double selector) {
  return SumZeroBiasSampler(s).draw(u, selector);
}

}  // namespace steinrec
