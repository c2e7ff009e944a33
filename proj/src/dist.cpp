#include "steinrec/dist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>

#include <boost/math/special_functions/erf.hpp>

#include "steinrec/error.hpp"
#include "steinrec/numeric.hpp"

namespace steinrec {

namespace {

double ipow(double x, int p) {
  double r = 1.0;
  for (int i = 0; i < p; ++i) r *= x;
  return r;
}

// Sorted (value, weight) pairs in, merged atoms out. Weights are left
// unnormalized.
void merge_sorted(std::vector<std::pair<double, double>>& pairs, std::vector<double>& atoms,
                  std::vector<double>& weights) {
  atoms.clear();
  weights.clear();
  atoms.reserve(pairs.size());
  weights.reserve(pairs.size());
  for (const auto& [x, w] : pairs) {
    if (w == 0.0) continue;
    if (!atoms.empty() && x - atoms.back() <= kMergeTolerance) {
      weights.back() += w;
    } else {
      atoms.push_back(x);
      weights.push_back(w);
    }
  }
}

void normalize(std::vector<double>& weights) {
  KahanSum total;
  for (double w : weights) total += w;
  const double s = total.value();
  // Already-normalized input is left bit-for-bit untouched, which makes
  // make_discrete idempotent.
  if (std::abs(s - 1.0) <= 4.0 * std::numeric_limits<double>::epsilon()) return;
  for (double& w : weights) w /= s;
}

DiscreteDistribution from_pairs(std::vector<std::pair<double, double>> pairs) {
  std::sort(pairs.begin(), pairs.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<double> atoms, weights;
  merge_sorted(pairs, atoms, weights);
  if (atoms.empty()) throw Error(Errc::zero_weight, "every atom has zero weight");
  normalize(weights);
  return DiscreteDistribution(std::move(atoms), std::move(weights));
}

}  // namespace

// ---------------------------------------------------------------------------
// DiscreteDistribution

DiscreteDistribution::DiscreteDistribution(std::vector<double> atoms, std::vector<double> probs)
    : atoms_(std::move(atoms)), probs_(std::move(probs)) {
  if (atoms_.empty()) throw Error(Errc::empty_input, "discrete law needs at least one atom");
  if (atoms_.size() != probs_.size())
    throw Error(Errc::size_mismatch, "atoms and probabilities differ in length");
  KahanSum total;
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    if (!std::isfinite(atoms_[i]) || !std::isfinite(probs_[i]))
      throw Error(Errc::non_finite, "atom " + std::to_string(i));
    if (i > 0 && !(atoms_[i] > atoms_[i - 1]))
      throw Error(Errc::out_of_range, "atoms must be strictly increasing");
    if (!(probs_[i] > 0.0) || probs_[i] > 1.0)
      throw Error(Errc::out_of_range, "probabilities must lie in (0, 1]");
    total += probs_[i];
  }
  if (std::abs(total.value() - 1.0) > 1e-12)
    throw Error(Errc::out_of_range, "probabilities must sum to one");

  cumulative_.resize(probs_.size());
  KahanSum run;
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    run += probs_[i];
    cumulative_[i] = std::min(run.value(), 1.0);
  }
  cumulative_.back() = 1.0;
}

DiscreteDistribution DiscreteDistribution::point_mass(double x) { return {{x}, {1.0}}; }

DiscreteDistribution DiscreteDistribution::rademacher() { return {{-1.0, 1.0}, {0.5, 0.5}}; }

double DiscreteDistribution::mean() const { return raw_moment(1); }

double DiscreteDistribution::variance() const { return central_moment(*this, 2); }

double DiscreteDistribution::raw_moment(int p) const {
  if (p < 0) throw Error(Errc::unsupported_moment, std::to_string(p));
  KahanSum s;
  for (std::size_t i = 0; i < atoms_.size(); ++i) s += probs_[i] * ipow(atoms_[i], p);
  return s.value();
}

double DiscreteDistribution::cdf(double t) const {
  if (std::isnan(t)) return NAN;
  const auto it = std::upper_bound(atoms_.begin(), atoms_.end(), t);
  if (it == atoms_.begin()) return 0.0;
  return cumulative_[static_cast<std::size_t>(it - atoms_.begin()) - 1];
}

double DiscreteDistribution::quantile(double v) const {
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), v);
  if (it == cumulative_.end()) return atoms_.back();
  return atoms_[static_cast<std::size_t>(it - cumulative_.begin())];
}

DiscreteDistribution make_discrete(std::span<const double> values, std::span<const double> weights) {
  if (values.empty() || weights.empty()) throw Error(Errc::empty_input, "no values given");
  if (values.size() != weights.size())
    throw Error(Errc::size_mismatch, "values and weights differ in length");
  std::vector<std::pair<double, double>> pairs;
  pairs.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) throw Error(Errc::non_finite, "value " + std::to_string(i));
    if (std::isnan(weights[i]) || std::isinf(weights[i]))
      throw Error(Errc::non_finite, "weight " + std::to_string(i));
    if (weights[i] < 0.0) throw Error(Errc::negative_weight, "weight " + std::to_string(i));
    pairs.emplace_back(values[i], weights[i]);
  }
  return from_pairs(std::move(pairs));
}

double central_moment(const DiscreteDistribution& d, int p) {
  if (p < 1 || p > 4) throw Error(Errc::unsupported_moment, "central moment order " + std::to_string(p));
  const double mu = d.mean();
  KahanSum s;
  const auto atoms = d.atoms();
  const auto probs = d.probs();
  for (std::size_t i = 0; i < atoms.size(); ++i) s += probs[i] * ipow(atoms[i] - mu, p);
  return s.value();
}

DiscreteDistribution standardize(const DiscreteDistribution& d) {
  const double var = central_moment(d, 2);
  if (!(var > 0.0)) throw Error(Errc::degenerate, "cannot standardize a law with zero variance");
  const double mu = d.mean();
  const double sd = std::sqrt(var);
  std::vector<double> atoms(d.atoms().begin(), d.atoms().end());
  for (double& x : atoms) x = (x - mu) / sd;
  // An affine map with positive slope keeps order; collisions are impossible
  // unless atoms were within rounding of each other, which make_discrete
  // already excludes.
  return {std::move(atoms), std::vector<double>(d.probs().begin(), d.probs().end())};
}

DiscreteDistribution affine(const DiscreteDistribution& d, double c, double shift) {
  if (!std::isfinite(c) || !std::isfinite(shift)) throw Error(Errc::non_finite, "affine map");
  if (c == 0.0) return DiscreteDistribution::point_mass(shift);
  std::vector<std::pair<double, double>> pairs;
  pairs.reserve(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) pairs.emplace_back(c * d.atoms()[i] + shift, d.probs()[i]);
  return from_pairs(std::move(pairs));
}

DiscreteDistribution convolve(const DiscreteDistribution& a, const DiscreteDistribution& b,
                              std::size_t atom_cap) {
  const std::size_t n = a.size() * b.size();
  if (n > atom_cap)
    throw Error(Errc::cap_exceeded, std::to_string(a.size()) + " x " + std::to_string(b.size()) +
                                        " candidate atoms exceed cap " + std::to_string(atom_cap));
  std::vector<std::pair<double, double>> pairs;
  pairs.reserve(n);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      pairs.emplace_back(a.atoms()[i] + b.atoms()[j], a.probs()[i] * b.probs()[j]);
  return from_pairs(std::move(pairs));
}

// ---------------------------------------------------------------------------
// PiecewiseLinearCDF

PiecewiseLinearCDF::PiecewiseLinearCDF(std::vector<double> breakpoints, std::vector<double> cdf_values)
    : x_(std::move(breakpoints)), f_(std::move(cdf_values)) {
  if (x_.size() < 2) throw Error(Errc::empty_input, "piecewise-linear CDF needs two breakpoints");
  if (x_.size() != f_.size()) throw Error(Errc::size_mismatch, "breakpoints and CDF values differ in length");
  for (std::size_t i = 0; i < x_.size(); ++i) {
    if (!std::isfinite(x_[i]) || !std::isfinite(f_[i])) throw Error(Errc::non_finite, "breakpoint " + std::to_string(i));
    if (i > 0 && !(x_[i] > x_[i - 1])) throw Error(Errc::out_of_range, "breakpoints must be strictly increasing");
    if (i > 0 && f_[i] < f_[i - 1]) throw Error(Errc::out_of_range, "CDF values must be non-decreasing");
  }
  if (std::abs(f_.front()) > 1e-12 || std::abs(f_.back() - 1.0) > 1e-12)
    throw Error(Errc::out_of_range, "CDF must run from 0 to 1");
  f_.front() = 0.0;
  f_.back() = 1.0;
  for (double& v : f_) v = std::clamp(v, 0.0, 1.0);
}

PiecewiseLinearCDF PiecewiseLinearCDF::uniform(double a, double b) { return {{a, b}, {0.0, 1.0}}; }

double PiecewiseLinearCDF::cdf(double t) const {
  if (std::isnan(t)) return NAN;
  if (t <= x_.front()) return 0.0;
  if (t >= x_.back()) return 1.0;
  const auto it = std::upper_bound(x_.begin(), x_.end(), t);
  const std::size_t j = static_cast<std::size_t>(it - x_.begin());
  const double w = (t - x_[j - 1]) / (x_[j] - x_[j - 1]);
  return f_[j - 1] + w * (f_[j] - f_[j - 1]);
}

double PiecewiseLinearCDF::quantile(double v) const {
  const auto it = std::upper_bound(f_.begin(), f_.end(), v);
  if (it == f_.end()) return x_.back();
  const std::size_t j = static_cast<std::size_t>(it - f_.begin());
  if (j == 0) return x_.front();
  const double w = (v - f_[j - 1]) / (f_[j] - f_[j - 1]);
  return x_[j - 1] + w * (x_[j] - x_[j - 1]);
}

double PiecewiseLinearCDF::raw_moment(int p) const {
  if (p < 0) throw Error(Errc::unsupported_moment, std::to_string(p));
  KahanSum s;
  for (std::size_t j = 0; j + 1 < x_.size(); ++j) {
    const double mass = f_[j + 1] - f_[j];
    if (mass == 0.0) continue;
    // E U^p for U uniform on [a, b] = sum_{i=0..p} a^i b^(p-i) / (p + 1)
    const double a = x_[j], b = x_[j + 1];
    double acc = 0.0;
    for (int i = 0; i <= p; ++i) acc += ipow(a, i) * ipow(b, p - i);
    s += mass * acc / (p + 1);
  }
  return s.value();
}

double PiecewiseLinearCDF::variance() const {
  const double mu = mean();
  KahanSum s;
  for (std::size_t j = 0; j + 1 < x_.size(); ++j) {
    const double a = x_[j] - mu, b = x_[j + 1] - mu;
    s += (f_[j + 1] - f_[j]) * (a * a + a * b + b * b) / 3.0;
  }
  return s.value();
}

PiecewiseLinearCDF PiecewiseLinearCDF::scaled(double c) const {
  if (c == 0.0 || !std::isfinite(c)) throw Error(Errc::degenerate, "scale factor must be finite and nonzero");
  std::vector<double> x(x_.size()), f(f_.size());
  if (c > 0) {
    for (std::size_t i = 0; i < x_.size(); ++i) x[i] = c * x_[i];
    f = f_;
  } else {
    const std::size_t n = x_.size();
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = c * x_[n - 1 - i];
      f[i] = 1.0 - f_[n - 1 - i];
    }
  }
  return {std::move(x), std::move(f)};
}

// ---------------------------------------------------------------------------
// EmpiricalSample

EmpiricalSample::EmpiricalSample(std::vector<double> values, SeedProvenance provenance)
    : values_(std::move(values)), provenance_(provenance) {
  if (values_.empty()) throw Error(Errc::empty_input, "empirical sample is empty");
  for (double v : values_)
    if (!std::isfinite(v)) throw Error(Errc::non_finite, "sample value");
  if (!std::is_sorted(values_.begin(), values_.end())) std::sort(values_.begin(), values_.end());
}

double EmpiricalSample::raw_moment(int p) const {
  if (p < 0) throw Error(Errc::unsupported_moment, std::to_string(p));
  KahanSum s;
  for (double v : values_) s += ipow(v, p);
  return s.value() / static_cast<double>(values_.size());
}

double EmpiricalSample::mean() const { return raw_moment(1); }

double EmpiricalSample::central_moment(int p) const {
  if (p < 1 || p > 4) throw Error(Errc::unsupported_moment, std::to_string(p));
  const double mu = mean();
  KahanSum s;
  for (double v : values_) s += ipow(v - mu, p);
  return s.value() / static_cast<double>(values_.size());
}

double EmpiricalSample::variance() const { return central_moment(2); }

double EmpiricalSample::cdf(double t) const {
  if (std::isnan(t)) return NAN;
  const auto it = std::upper_bound(values_.begin(), values_.end(), t);
  return static_cast<double>(it - values_.begin()) / static_cast<double>(values_.size());
}

double EmpiricalSample::quantile(double v) const {
  const double n = static_cast<double>(values_.size());
  const double idx = std::floor(v * n);
  if (idx < 0) return values_.front();
  if (idx >= n) return values_.back();
  return values_[static_cast<std::size_t>(idx)];
}

EmpiricalSample EmpiricalSample::standardized() const {
  if (values_.size() < 2) throw Error(Errc::degenerate, "standardization needs at least two values");
  const double var = variance();
  if (!(var > 0.0)) throw Error(Errc::degenerate, "sample has zero variance");
  const double mu = mean();
  const double sd = std::sqrt(var);
  std::vector<double> out(values_);
  for (double& v : out) v = (v - mu) / sd;
  return {std::move(out), provenance_};
}

// ---------------------------------------------------------------------------
// StandardNormal

double normal::quantile(double p) {
  if (!(p > 0.0)) return -INFINITY;
  if (!(p < 1.0)) return INFINITY;
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double normal::raw_moment(int p) {
  if (p < 0) throw Error(Errc::unsupported_moment, std::to_string(p));
  if (p % 2 == 1) return 0.0;
  double r = 1.0;
  for (int k = p - 1; k > 1; k -= 2) r *= k;
  return r;
}

double StandardNormal::cdf(double t) const { return normal::cdf(t); }
double StandardNormal::quantile(double v) const { return normal::quantile(v); }
double StandardNormal::raw_moment(int p) const { return normal::raw_moment(p); }

double cdf_eval(const Law& law, double t) {
  return std::visit([t](const auto& l) { return l.cdf(t); }, law);
}

double quantile_eval(const Law& law, double v) {
  return std::visit([v](const auto& l) { return l.quantile(v); }, law);
}

}  // namespace steinrec
