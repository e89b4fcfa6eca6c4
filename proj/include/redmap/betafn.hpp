#ifndef REDMAP_BETAFN_HPP
#define REDMAP_BETAFN_HPP

// Regularized incomplete beta function I_{a,b}(x), its density, its inverse,
// and the logarithmic-derivative helpers J = I'/I and h = I''/I' used by the
// curvature analysis of the map.

#include <cmath>
#include <limits>
#include <string>

#include "redmap/errors.hpp"

namespace redmap {

namespace detail {

inline double log_gamma(double x) {
#if defined(__GLIBC__)
  int sign = 0;
  return ::lgamma_r(x, &sign);  // std::lgamma writes the global signgam
#else
  return std::lgamma(x);
#endif
}

}  // namespace detail

/// Shape pair (alpha, beta) of the beta distribution. Both strictly positive.
class BetaShape {
 public:
  BetaShape(double alpha, double beta) : alpha_(alpha), beta_(beta) {
    if (!(alpha > 0.0) || !(beta > 0.0) || !std::isfinite(alpha) || !std::isfinite(beta)) {
      throw DomainError("beta shape parameters must be positive and finite (alpha=" +
                        std::to_string(alpha) + ", beta=" + std::to_string(beta) + ")");
    }
    log_beta_ = detail::log_gamma(alpha) + detail::log_gamma(beta) - detail::log_gamma(alpha + beta);
  }

  double alpha() const noexcept { return alpha_; }
  double beta() const noexcept { return beta_; }

  /// ln B(alpha, beta), cached at construction.
  double log_beta() const noexcept { return log_beta_; }

  /// Shape with the roles of alpha and beta exchanged.
  BetaShape swapped() const { return BetaShape(beta_, alpha_); }

  friend bool operator==(const BetaShape& l, const BetaShape& r) noexcept {
    return l.alpha_ == r.alpha_ && l.beta_ == r.beta_;
  }

 private:
  double alpha_;
  double beta_;
  double log_beta_;
};

namespace detail {

// Modified Lentz evaluation of the continued fraction for I_{a,b}(x).
// Converges rapidly for x < (a+1)/(a+b+2).
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 20000;
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 2.0 * std::numeric_limits<double>::epsilon();

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double dm = m;
    const double m2 = 2.0 * dm;
    double aa = dm * (b - dm) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + dm) * (qab + dm) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) <= kEps) return h;
  }
  throw NonConvergence("incomplete beta continued fraction did not converge (a=" +
                       std::to_string(a) + ", b=" + std::to_string(b) +
                       ", x=" + std::to_string(x) + ")");
}

// I_{a,b}(x) for x in the open interval, using the cached log-beta.
inline double reg_inc_beta_open(double x, double a, double b, double log_beta) {
  const double log_front = a * std::log(x) + b * std::log1p(-x) - log_beta;
  double value;
  if (x < (a + 1.0) / (a + b + 2.0)) {
    value = std::exp(log_front) * beta_continued_fraction(a, b, x) / a;
  } else {
    value = 1.0 - std::exp(log_front) * beta_continued_fraction(b, a, 1.0 - x) / b;
  }
  if (value < 0.0) return 0.0;
  if (value > 1.0) return 1.0;
  return value;
}

inline double density_open(double x, double a, double b, double log_beta) {
  return std::exp((a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - log_beta);
}

inline double endpoint_density(double exponent_plus_one, double log_beta) {
  if (exponent_plus_one < 1.0) return std::numeric_limits<double>::infinity();
  if (exponent_plus_one > 1.0) return 0.0;
  return std::exp(-log_beta);
}

// Solves I_{a,b}(x) = p on (0, x_hi], where I_{a,b}(x_hi) >= p, by safeguarded
// Newton iteration on t = ln x. Working in ln x resolves roots far below the
// spacing of doubles near 0, which happens for shape parameters well below 1.
// Returns 0 when the root lies below the smallest normal double.
inline double lower_tail_inverse(double p, double a, double b, double log_beta, double x_hi) {
  constexpr int kMaxIterations = 200;
  const double t_floor = std::log(std::numeric_limits<double>::min());

  auto residual = [&](double t) { return reg_inc_beta_open(std::exp(t), a, b, log_beta) - p; };

  double lo = t_floor;
  double hi = std::log(x_hi);
  if (residual(lo) >= 0.0) return 0.0;

  // Small-x asymptote I(x) ~ x^a / (a B(a,b)) as the starting point.
  double t = (std::log(p) + std::log(a) + log_beta) / a;
  if (!(t > lo && t < hi)) t = 0.5 * (lo + hi);

  double previous_abs = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    const double x = std::exp(t);
    const double f = reg_inc_beta_open(x, a, b, log_beta) - p;
    if (f == 0.0 || std::fabs(f) <= 1e-15 * p) return x;
    if (f > 0.0) {
      hi = t;
    } else {
      lo = t;
    }
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::fmax(1.0, std::fabs(t))) {
      return x;
    }
    const double slope = density_open(x, a, b, log_beta) * x;  // dI/dt
    double next = t - f / slope;
    const bool newton_ok = std::isfinite(next) && next > lo && next < hi &&
                           std::fabs(f) < 0.5 * previous_abs;
    if (!newton_ok) next = 0.5 * (lo + hi);
    previous_abs = std::fabs(f);
    if (next == t) return x;
    t = next;
  }
  return std::exp(t);
}

}  // namespace detail

/// I_{alpha,beta}(x). Exactly 0 at x = 0 and 1 at x = 1.
inline double reg_inc_beta(double x, const BetaShape& shape) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw DomainError("reg_inc_beta: x must lie in [0,1], got " + std::to_string(x));
  }
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  return detail::reg_inc_beta_open(x, shape.alpha(), shape.beta(), shape.log_beta());
}

/// I'_{alpha,beta}(x) = x^{alpha-1} (1-x)^{beta-1} / B(alpha,beta).
/// At an endpoint with a negative exponent the value is +infinity.
inline double reg_inc_beta_deriv(double x, const BetaShape& shape) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw DomainError("reg_inc_beta_deriv: x must lie in [0,1], got " + std::to_string(x));
  }
  if (x == 0.0) return detail::endpoint_density(shape.alpha(), shape.log_beta());
  if (x == 1.0) return detail::endpoint_density(shape.beta(), shape.log_beta());
  return detail::density_open(x, shape.alpha(), shape.beta(), shape.log_beta());
}

/// Inverse of I_{alpha,beta}: the x in [0,1] with I(x) = p.
///
/// The lower and upper tails are solved separately (the upper one through
/// I_{a,b}(x) = 1 - I_{b,a}(1-x)) so that both ends keep relative accuracy.
/// When the exact root is closer to 1 than the double spacing allows, the
/// result saturates at 1; likewise at 0 below the smallest normal double.
inline double inv_reg_inc_beta(double p, const BetaShape& shape) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw DomainError("inv_reg_inc_beta: p must lie in [0,1], got " + std::to_string(p));
  }
  if (p == 0.0) return 0.0;
  if (p == 1.0) return 1.0;
  const double a = shape.alpha();
  const double b = shape.beta();
  const double pivot_x = a / (a + b);
  const double pivot_p = detail::reg_inc_beta_open(pivot_x, a, b, shape.log_beta());
  if (p <= pivot_p) {
    return detail::lower_tail_inverse(p, a, b, shape.log_beta(), pivot_x);
  }
  const double y = detail::lower_tail_inverse(1.0 - p, b, a, shape.log_beta(), b / (a + b));
  return 1.0 - y;
}

/// J(x) = I'(x) / I(x), the logarithmic derivative of I. Positive on (0,1).
inline double log_ratio_J(double x, const BetaShape& shape) {
  if (!(x > 0.0 && x < 1.0)) {
    throw DomainError("log_ratio_J: x must lie in (0,1), got " + std::to_string(x));
  }
  return reg_inc_beta_deriv(x, shape) / reg_inc_beta(x, shape);
}

/// h(x) = (alpha-1)/x - (beta-1)/(1-x) = I''(x) / I'(x).
inline double ratio_h(double x, const BetaShape& shape) {
  if (!(x > 0.0 && x < 1.0)) {
    throw DomainError("ratio_h: x must lie in (0,1), got " + std::to_string(x));
  }
  return (shape.alpha() - 1.0) / x - (shape.beta() - 1.0) / (1.0 - x);
}

}  // namespace redmap

#endif  // REDMAP_BETAFN_HPP
