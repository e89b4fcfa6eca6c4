#ifndef REDMAP_EQUILIBRIUM_HPP
#define REDMAP_EQUILIBRIUM_HPP

// Fixed point of the map, its local stability, closed forms for beta = 1, and
// the bifurcation points of w, A1 and A2 (where f'(q*) = -1).

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>

#include "redmap/betafn.hpp"
#include "redmap/errors.hpp"
#include "redmap/model.hpp"

namespace redmap {

struct Equilibrium {
  double q_star = 0;
  double z_star = 0;
  double f_prime_at_star = 0;  ///< 1 - m_slope * w
  double m_slope = 0;          ///< w-independent factor, > 1
  bool locally_stable = false; ///< f'(q*) > -1
  double residual = 0;         ///< |A1/sqrt(I(z*)) - (q* + A2)|
  int iterations = 0;
};

namespace detail {

inline Equilibrium make_equilibrium(const DerivedModel& m, double z_star, int iterations) {
  Equilibrium eq;
  eq.z_star = z_star;
  eq.q_star = m.q_of(z_star);
  eq.m_slope = 1.0 + core_gain(z_star, m);
  eq.f_prime_at_star = 1.0 - eq.m_slope * m.w();
  eq.locally_stable = eq.f_prime_at_star > -1.0;
  eq.residual = std::fabs(m.a1 / std::sqrt(reg_inc_beta(z_star, m.shape())) - (eq.q_star + m.a2));
  eq.iterations = iterations;
  return eq;
}

inline void require_fixed_point(const DerivedModel& m) {
  if (!m.has_fixed_point) {
    std::ostringstream msg;
    msg << "no fixed point: A1 = " << m.a1 << " >= A2 + q_max = " << m.a2 + m.q_max();
    throw NoFixedPoint(msg.str());
  }
}

}  // namespace detail

/// Unique fixed point q* in (theta_l, theta_r).
///
/// Bisection on the strictly decreasing residual A1/sqrt(I(z)) - (q(z) + A2)
/// over [z(theta_l), z(theta_r)]. The midpoint is geometric while the bracket
/// spans more than a factor of two, so tiny z* (shape parameters near 0) are
/// resolved to full relative precision. The result does not depend on w.
inline Equilibrium fixed_point(const DerivedModel& m) {
  detail::require_fixed_point(m);
  auto residual = [&](double z) {
    return m.a1 / std::sqrt(reg_inc_beta(z, m.shape())) - (m.q_of(z) + m.a2);
  };

  double lo = m.z_l;
  double hi = m.z_r;
  if (lo == 0.0) {
    lo = std::numeric_limits<double>::min();
    if (residual(lo) <= 0.0) {
      throw NonConvergence("fixed point lies below double resolution of z");
    }
  }

  int iterations = 0;
  constexpr int kMaxIterations = 2000;
  while (iterations < kMaxIterations) {
    ++iterations;
    const double mid = (hi > 2.0 * lo) ? std::sqrt(lo) * std::sqrt(hi) : lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    if (residual(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double z_star = std::fabs(residual(lo)) <= std::fabs(residual(hi)) ? lo : hi;
  Equilibrium eq = detail::make_equilibrium(m, z_star, iterations);
  if (!(eq.residual <= 1e-8 * (eq.q_star + m.a2))) {
    throw NonConvergence("fixed point residual " + std::to_string(eq.residual) +
                         " above tolerance");
  }
  return eq;
}

/// Positive root z of z^{a/2+1} + nu (A2 + q_min) z^{a/2} - nu A1 = 0, the
/// fixed-point equation when beta = 1. Uses the sinh form of the cubic root
/// for a = 1 and the quadratic formula for a = 2; safeguarded Newton
/// otherwise. The root may exceed 1, in which case there is no fixed point.
inline double beta1_equilibrium_z(double alpha, double nu, double a1, double a2, double q_min) {
  const double c = nu * (a2 + q_min);
  if (alpha == 1.0) {
    // Cubic s^3 + c s - nu A1 = 0 in s = z^{1/2}.
    const double k = a2 + q_min;
    const double arg = -(3.0 * a1 / (2.0 * k)) * std::sqrt(3.0 / (nu * k));
    const double s = -2.0 * std::sqrt(c / 3.0) * std::sinh(std::asinh(arg) / 3.0);
    return s * s;
  }
  if (alpha == 2.0) {
    const double k = a2 + q_min;
    return 0.5 * nu * (std::sqrt(k * k + 4.0 * a1 / nu) - k);
  }
  const double e = 0.5 * alpha;
  auto phi = [&](double z) { return std::pow(z, e) * (z + c) - nu * a1; };
  auto dphi = [&](double z) { return e * std::pow(z, e - 1.0) * (z + c) + std::pow(z, e); };
  double lo = 0.0;
  double hi = 1.0;
  while (phi(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
  }
  double z = 0.5 * (lo + hi);
  for (int iter = 0; iter < 500; ++iter) {
    const double f = phi(z);
    if (f == 0.0) return z;
    if (f > 0.0) {
      hi = z;
    } else {
      lo = z;
    }
    double next = z - f / dphi(z);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::fabs(next - z) <= 4.0 * std::numeric_limits<double>::epsilon() * z) return next;
    z = next;
  }
  return z;
}

/// Fixed point for beta = 1 from the closed-form / polynomial route, with
/// m = 1 + alpha nu A1 / (2 z*^{alpha/2+1}). Independent of reg_inc_beta.
inline Equilibrium fixed_point_closed_beta1(const DerivedModel& m) {
  if (m.shape().beta() != 1.0) {
    throw PreconditionViolation("fixed_point_closed_beta1 requires beta = 1");
  }
  detail::require_fixed_point(m);
  const double alpha = m.shape().alpha();
  const double z = beta1_equilibrium_z(alpha, m.nu, m.a1, m.a2, m.q_min());
  Equilibrium eq;
  eq.z_star = z;
  eq.q_star = m.q_of(z);
  eq.m_slope = 1.0 + alpha * m.nu * m.a1 / (2.0 * std::pow(z, 0.5 * alpha + 1.0));
  eq.f_prime_at_star = 1.0 - eq.m_slope * m.w();
  eq.locally_stable = eq.f_prime_at_star > -1.0;
  eq.residual = std::fabs(m.a1 / std::pow(z, 0.5 * alpha) - (eq.q_star + m.a2));
  return eq;
}

/// Turning point of the core for beta = 1, if it lies inside the core:
/// z_c = (alpha nu w A1 / (2 (1-w)))^{2/(alpha+2)}.
inline std::optional<double> critical_point_beta1(const DerivedModel& m) {
  if (m.shape().beta() != 1.0) {
    throw PreconditionViolation("critical_point_beta1 requires beta = 1");
  }
  const double alpha = m.shape().alpha();
  const double w = m.w();
  const double z_c = std::pow(alpha * m.nu * w * m.a1 / (2.0 * (1.0 - w)), 2.0 / (alpha + 2.0));
  if (m.z_l < z_c && z_c < m.z_r) return m.q_of(z_c);
  return std::nullopt;
}

enum class BifurcationParameter { W, A1, A2 };
enum class BifurcationStrategy { ClosedForm, SelfConsistentLoop, BisectionFallback };

inline const char* to_string(BifurcationParameter p) {
  switch (p) {
    case BifurcationParameter::W: return "w";
    case BifurcationParameter::A1: return "A1";
    case BifurcationParameter::A2: return "A2";
  }
  return "?";
}

inline const char* to_string(BifurcationStrategy s) {
  switch (s) {
    case BifurcationStrategy::ClosedForm: return "closed_form";
    case BifurcationStrategy::SelfConsistentLoop: return "self_consistent_loop";
    case BifurcationStrategy::BisectionFallback: return "bisection_fallback";
  }
  return "?";
}

struct BifurcationPoint {
  BifurcationParameter parameter = BifurcationParameter::W;
  double value = 0;
  double residual = 0;  ///< |f'(q*) + 1| at value (W: gap between the two formulas)
  int iterations = 0;
  BifurcationStrategy strategy = BifurcationStrategy::ClosedForm;
  std::string trace;    ///< loop / bracket log
};

/// w_bif = 2 / m. Residual is the gap to the equivalent form
/// 2 / (1 + (nu/2)(q* + A2) I(z*)^{-1} I'(z*)), obtained by substituting
/// A1 = (q* + A2) sqrt(I(z*)).
inline BifurcationPoint w_bifurcation(const DerivedModel& m) {
  const Equilibrium eq = fixed_point(m);
  BifurcationPoint bp;
  bp.parameter = BifurcationParameter::W;
  bp.value = 2.0 / eq.m_slope;
  const double value = reg_inc_beta(eq.z_star, m.shape());
  const double deriv = reg_inc_beta_deriv(eq.z_star, m.shape());
  const double alt = 2.0 / (1.0 + 0.5 * m.nu * (eq.q_star + m.a2) * deriv / value);
  bp.residual = std::fabs(bp.value - alt);
  bp.strategy = BifurcationStrategy::ClosedForm;
  return bp;
}

struct BifurcationOptions {
  double loop_rel_tol = 1e-6;
  int max_loop_iterations = 500;
  double scan_step = 0.005;        ///< bracket scan step, fraction of the start value
  double scan_max_factor = 20.0;   ///< upper scan limit, multiple of the start value
};

namespace detail {

struct ConstantBifurcationProblem {
  BifurcationParameter parameter;
  double start;
  double lower_limit;  // exclusive
  double upper_limit;  // exclusive
  std::function<DerivedModel(double)> rebuild;
  // Next iterate of the self-consistency loop given the model and its equilibrium.
  std::function<double(const DerivedModel&, const Equilibrium&)> loop_map;
};

// f'(q*) + 1 as a function of the swept constant.
inline double slope_defect(const ConstantBifurcationProblem& pb, double x) {
  const DerivedModel model = pb.rebuild(x);
  return fixed_point(model).f_prime_at_star + 1.0;
}

inline double bisect_defect(const ConstantBifurcationProblem& pb, double lo, double hi,
                            double f_lo, int& iterations) {
  for (int i = 0; i < 200 && hi - lo > 1e-13 * std::fabs(hi); ++i) {
    ++iterations;
    const double mid = 0.5 * (lo + hi);
    const double f_mid = slope_defect(pb, mid);
    if ((f_mid > 0.0) == (f_lo > 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

inline std::optional<double> defect_or_empty(const ConstantBifurcationProblem& pb, double x) {
  try {
    const double d = slope_defect(pb, x);
    if (std::isfinite(d)) return d;
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

inline BifurcationPoint solve_constant_bifurcation(const ConstantBifurcationProblem& pb,
                                                   const BifurcationOptions& opt) {
  std::ostringstream trace;
  trace.precision(10);
  BifurcationPoint bp;
  bp.parameter = pb.parameter;
  int iterations = 0;

  // Self-consistency loop x -> q*(x) -> x_bif(x).
  double x = pb.start;
  std::optional<double> loop_result;
  double previous_step = std::numeric_limits<double>::infinity();
  int growing_steps = 0;
  for (int k = 1; k <= opt.max_loop_iterations; ++k) {
    ++iterations;
    double next;
    try {
      const DerivedModel model = pb.rebuild(x);
      next = pb.loop_map(model, fixed_point(model));
    } catch (const std::exception& e) {
      trace << "loop " << k << ": " << e.what() << "\n";
      break;
    }
    trace << "loop " << k << ": " << x << " -> " << next << "\n";
    if (!std::isfinite(next) || !(next > pb.lower_limit && next < pb.upper_limit)) {
      trace << "loop left the valid range\n";
      break;
    }
    const double step = std::fabs(next - x);
    if (step <= opt.loop_rel_tol * std::fabs(x)) {
      loop_result = next;
      break;
    }
    growing_steps = step > previous_step ? growing_steps + 1 : 0;
    if (growing_steps >= 20) {
      trace << "loop diverging\n";
      break;
    }
    previous_step = step;
    x = next;
  }

  if (loop_result) {
    // Polish to f'(q*) = -1 with a local bracket around the loop limit.
    const double x0 = *loop_result;
    const auto f0 = defect_or_empty(pb, x0);
    if (f0 && *f0 != 0.0) {
      for (double delta = 1e-7; delta <= 1e-2; delta *= 10.0) {
        const double a = x0 * (1.0 - delta);
        const double b = x0 * (1.0 + delta);
        const auto fa = defect_or_empty(pb, a);
        const auto fb = defect_or_empty(pb, b);
        if (fa && fb && (*fa > 0.0) != (*fb > 0.0)) {
          bp.value = bisect_defect(pb, a, b, *fa, iterations);
          break;
        }
      }
    }
    if (bp.value == 0.0) bp.value = x0;
    bp.strategy = BifurcationStrategy::SelfConsistentLoop;
  } else {
    // Nearest sign change of f'(q*) + 1 around the start value, then bisection.
    const auto f_start = defect_or_empty(pb, pb.start);
    if (!f_start) {
      throw NonConvergence("bifurcation solver: start value is not a valid model", trace.str());
    }
    const double step = opt.scan_step * pb.start;
    const double upper = std::min(pb.upper_limit, opt.scan_max_factor * pb.start);
    double prev_lo = pb.start, f_prev_lo = *f_start;
    double prev_hi = pb.start, f_prev_hi = *f_start;
    bool lo_open = true, hi_open = true;
    std::optional<std::pair<double, double>> bracket;
    double f_bracket_lo = 0.0;
    for (int k = 1; (lo_open || hi_open) && !bracket; ++k) {
      if (lo_open) {
        const double xl = pb.start - k * step;
        if (!(xl > pb.lower_limit)) {
          lo_open = false;
        } else if (const auto fl = defect_or_empty(pb, xl)) {
          ++iterations;
          if ((*fl > 0.0) != (f_prev_lo > 0.0)) {
            bracket = std::make_pair(xl, prev_lo);
            f_bracket_lo = *fl;
            break;
          }
          prev_lo = xl;
          f_prev_lo = *fl;
        }
      }
      if (hi_open) {
        const double xh = pb.start + k * step;
        if (!(xh < upper)) {
          hi_open = false;
        } else if (const auto fh = defect_or_empty(pb, xh)) {
          ++iterations;
          if ((*fh > 0.0) != (f_prev_hi > 0.0)) {
            bracket = std::make_pair(prev_hi, xh);
            f_bracket_lo = f_prev_hi;
            break;
          }
          prev_hi = xh;
          f_prev_hi = *fh;
        }
      }
    }
    if (!bracket) {
      throw NonConvergence(std::string("no bifurcation point of ") + to_string(pb.parameter) +
                               " found in the scanned range",
                           trace.str());
    }
    trace << "bracket [" << bracket->first << ", " << bracket->second << "]\n";
    bp.value = bisect_defect(pb, bracket->first, bracket->second, f_bracket_lo, iterations);
    bp.strategy = BifurcationStrategy::BisectionFallback;
  }

  bp.iterations = iterations;
  bp.residual = std::fabs(slope_defect(pb, bp.value));
  bp.trace = trace.str();
  return bp;
}

}  // namespace detail

/// Bifurcation point of A1 with everything else held fixed: the A1 at which
/// f'(q*) = -1. Tries the loop A1 -> q* -> (4-2w)/(nu w I^{-3/2} I') first; if
/// that does not settle, brackets the root of f'(q*) + 1 nearest to the
/// current A1 and bisects.
inline BifurcationPoint a1_bifurcation(const DerivedModel& m, const BifurcationOptions& opt = {}) {
  detail::ConstantBifurcationProblem pb;
  pb.parameter = BifurcationParameter::A1;
  pb.start = m.a1;
  pb.lower_limit = 0.0;
  pb.upper_limit = m.a2 + m.q_max();
  pb.rebuild = [m](double a1) { return model_from_constants(a1, m.a2, m.buffer, m.control); };
  pb.loop_map = [](const DerivedModel& model, const Equilibrium& eq) {
    const double w = model.w();
    const double value = reg_inc_beta(eq.z_star, model.shape());
    const double deriv = reg_inc_beta_deriv(eq.z_star, model.shape());
    return (4.0 - 2.0 * w) / (model.nu * w * deriv / (value * std::sqrt(value)));
  };
  return detail::solve_constant_bifurcation(pb, opt);
}

/// Bifurcation point of A2; loop A2 -> q* -> (4-2w)/(nu w I^{-1} I') - q*.
inline BifurcationPoint a2_bifurcation(const DerivedModel& m, const BifurcationOptions& opt = {}) {
  detail::ConstantBifurcationProblem pb;
  pb.parameter = BifurcationParameter::A2;
  pb.start = m.a2;
  pb.lower_limit = std::max(0.0, m.a1 - m.q_max());
  pb.upper_limit = std::numeric_limits<double>::infinity();
  pb.rebuild = [m](double a2) { return model_from_constants(m.a1, a2, m.buffer, m.control); };
  pb.loop_map = [](const DerivedModel& model, const Equilibrium& eq) {
    const double w = model.w();
    const double value = reg_inc_beta(eq.z_star, model.shape());
    const double deriv = reg_inc_beta_deriv(eq.z_star, model.shape());
    return (4.0 - 2.0 * w) / (model.nu * w * deriv / value) - eq.q_star;
  };
  return detail::solve_constant_bifurcation(pb, opt);
}

/// N = sqrt(p_max) A1 / K, the connection count matching a given A1.
inline double connections_for_a1(double a1, double tcp_constant, double p_max) {
  return std::sqrt(p_max) * a1 / tcp_constant;
}

/// d = A2 M / C, the round-trip delay matching a given A2.
inline double rtt_for_a2(double a2, double packet_size, double capacity) {
  return a2 * packet_size / capacity;
}

}  // namespace redmap

#endif  // REDMAP_EQUILIBRIUM_HPP
