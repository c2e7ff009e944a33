#pragma once

#include <cmath>
#include <numbers>

namespace steinrec {

/// Neumaier-compensated accumulator. All moment and integral sums in the
/// library go through this.
class KahanSum {
 public:
  KahanSum() = default;
  explicit KahanSum(double init) : sum_(init) {}

  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  KahanSum& operator+=(double x) noexcept {
    add(x);
    return *this;
  }

  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

namespace normal {

inline constexpr double inv_sqrt_2pi = 0.3989422804014326779399460599343819;

/// Standard normal density. The rounding error of t*t is folded back in so
/// the tails keep full relative accuracy.
inline double pdf(double t) noexcept {
  const double q = t * t;
  const double e = std::fma(t, t, -q);
  return inv_sqrt_2pi * std::exp(-0.5 * q) * (1.0 - 0.5 * e);
}

namespace detail {

inline constexpr double inv_sqrt2_hi = 0.7071067811865476;
inline constexpr double inv_sqrt2_lo = -4.833646656726457e-17;

// erfc(x) at x = s / sqrt(2), correcting for the rounding of the argument:
// erfc(h + l) ~ erfc(h) - l * 2/sqrt(pi) * exp(-h^2).
inline double erfc_scaled(double s) noexcept {
  const double h = s * inv_sqrt2_hi;
  const double l = std::fma(s, inv_sqrt2_hi, -h) + s * inv_sqrt2_lo;
  return std::erfc(h) - l * (2.0 * std::numbers::inv_sqrtpi) * std::exp(-h * h);
}

}  // namespace detail

/// Standard normal CDF via erfc, which avoids the cancellation in
/// 0.5 * (1 + erf(x)).
inline double cdf(double t) noexcept {
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  return 0.5 * detail::erfc_scaled(-t);
}

/// Upper tail 1 - Phi(t).
inline double sf(double t) noexcept {
  if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
  return 0.5 * detail::erfc_scaled(t);
}

/// Antiderivative of Phi with limit 0 at -inf: t*Phi(t) + phi(t).
inline double cdf_primitive(double t) noexcept {
  if (t == -INFINITY) return 0.0;
  return t * cdf(t) + pdf(t);
}

/// Integral of Phi over [a, b]. For negative arguments the lower-tail
/// form is used directly; for positive ones we integrate 1 - Phi instead so
/// neither branch subtracts two numbers of size |t|.
inline double cdf_integral(double a, double b) noexcept {
  // int_a^b Phi = (b - a) - int_a^b (1 - Phi)
  auto upper_tail_primitive = [](double t) {  // int_t^inf (1 - Phi)
    return pdf(t) - t * sf(t);
  };
  if (b <= 0.0) return cdf_primitive(b) - cdf_primitive(a);
  if (a >= 0.0) return (b - a) - (upper_tail_primitive(a) - upper_tail_primitive(b));
  return cdf_integral(a, 0.0) + cdf_integral(0.0, b);
}

/// int_t^inf (1 - Phi(s)) ds = E(Z - t)^+.
inline double upper_tail_integral(double t) noexcept { return pdf(t) - t * sf(t); }

/// int_-inf^t Phi(s) ds = E(t - Z)^+.
inline double lower_tail_integral(double t) noexcept { return cdf_primitive(t); }

double quantile(double p);

/// E Z^p for the standard normal, p >= 0.
double raw_moment(int p);

}  // namespace normal
}  // namespace steinrec
