#ifndef REDMAP_MODEL_HPP
#define REDMAP_MODEL_HPP

// The generalized RED map
//
//   f(q) = (1-w) q + w B                          0 <= q <= theta_l
//   f(q) = (1-w) q + w (A1 / sqrt(I(z(q))) - A2)  theta_l < q < theta_r
//   f(q) = (1-w) q                                theta_r <= q <= B
//
// with z(q) = (q - q_min) / (q_max - q_min) and I the regularized incomplete
// beta function. Alpha = beta = 1 gives the classic linear RED drop profile.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>

#include "redmap/betafn.hpp"
#include "redmap/errors.hpp"

namespace redmap {

/// Physical network constants. Units are documentation only.
struct SystemParams {
  double connections;   ///< N, number of TCP connections
  double tcp_constant;  ///< K, between 1 and sqrt(8/3) (usually sqrt(3/2))
  double capacity;      ///< C, link capacity [kB/s]
  double rtt;           ///< d, round-trip propagation delay [s]
  double packet_size;   ///< M, packet size [kB]
  double buffer;        ///< B, buffer size [packets]

  void validate() const {
    auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
    if (!positive(connections) || !positive(capacity) || !positive(rtt) ||
        !positive(packet_size) || !positive(buffer)) {
      throw DomainError("system parameters N, C, d, M, B must be positive and finite");
    }
    if (!(tcp_constant >= 1.0 && tcp_constant <= std::sqrt(8.0 / 3.0))) {
      throw DomainError("TCP constant K must lie in [1, sqrt(8/3)], got " +
                        std::to_string(tcp_constant));
    }
  }

  /// A1 = N K / sqrt(p_max).
  double a1(double p_max) const { return connections * tcp_constant / std::sqrt(p_max); }
  /// A2 = C d / M.
  double a2() const { return capacity * rtt / packet_size; }
};

/// Tunable control knobs.
struct ControlParams {
  double p_max;  ///< maximum drop probability, (0,1]
  double q_min;  ///< lower queue threshold
  double q_max;  ///< upper queue threshold
  double w;      ///< averaging weight, (0,1)
  BetaShape shape;

  void validate(double buffer) const {
    if (!(p_max > 0.0 && p_max <= 1.0)) {
      throw DomainError("p_max must lie in (0,1], got " + std::to_string(p_max));
    }
    if (!(q_min >= 0.0 && q_min < q_max && q_max <= buffer)) {
      throw DomainError("queue thresholds must satisfy 0 <= q_min < q_max <= B");
    }
    if (!(w > 0.0 && w < 1.0)) {
      throw DomainError("averaging weight w must lie in (0,1), got " + std::to_string(w));
    }
  }
};

/// Validated, ready-to-evaluate map. Build with derive_model() or
/// model_from_constants(); the fields are then mutually consistent.
struct DerivedModel {
  double a1 = 0;       ///< A1 = N K / sqrt(p_max)
  double a2 = 0;       ///< A2 = C d / M
  double nu = 0;       ///< 1 / (q_max - q_min)
  double theta_l = 0;  ///< left threshold
  double theta_r = 0;  ///< right threshold
  double z_l = 0;      ///< z(theta_l), kept separately since it can be tiny
  double z_r = 0;      ///< z(theta_r)
  double p1 = 0;       ///< (A1 / (A2 + B))^2
  double p2 = 0;       ///< (A1 / A2)^2, may exceed 1
  bool continuous_at_theta_r = true;  ///< A1 <= A2
  bool has_fixed_point = true;        ///< A1 < A2 + q_max
  double buffer = 0;                  ///< B
  ControlParams control{1.0, 0.0, 1.0, 0.5, BetaShape(1.0, 1.0)};
  /// Source of A1/A2; empty when the constants were given directly.
  std::optional<SystemParams> system;

  double w() const noexcept { return control.w; }
  double q_min() const noexcept { return control.q_min; }
  double q_max() const noexcept { return control.q_max; }
  const BetaShape& shape() const noexcept { return control.shape; }

  /// (A1 - A2)^+, the jump of f at theta_r.
  double jump() const noexcept { return std::max(a1 - a2, 0.0); }

  double z_of(double q) const noexcept { return nu * (q - control.q_min); }
  double q_of(double z) const noexcept { return z / nu + control.q_min; }
};

/// Builds the map from explicit A1, A2. Used by derive_model and by sweeps
/// that treat A1 or A2 as primitive axes.
inline DerivedModel model_from_constants(double a1, double a2, double buffer,
                                         const ControlParams& ctl) {
  if (!(a1 > 0.0) || !(a2 > 0.0) || !std::isfinite(a1) || !std::isfinite(a2)) {
    throw DomainError("A1 and A2 must be positive and finite");
  }
  if (!(buffer > 0.0)) throw DomainError("buffer size B must be positive");
  ctl.validate(buffer);
  if (!(a1 < a2 + buffer)) {
    std::ostringstream msg;
    msg << "A1 = " << a1 << " must be below A2 + B = " << a2 + buffer
        << " (A2 = " << a2 << ", B = " << buffer << "); the map has no dynamical core";
    throw ConstraintViolation(msg.str(), a1, a2, buffer);
  }

  DerivedModel m;
  m.a1 = a1;
  m.a2 = a2;
  m.buffer = buffer;
  m.control = ctl;
  m.nu = 1.0 / (ctl.q_max - ctl.q_min);
  m.p1 = (a1 / (a2 + buffer)) * (a1 / (a2 + buffer));
  m.p2 = (a1 / a2) * (a1 / a2);
  m.z_l = inv_reg_inc_beta(m.p1, ctl.shape);
  m.z_r = m.p2 <= 1.0 ? inv_reg_inc_beta(m.p2, ctl.shape) : 1.0;
  const double span = ctl.q_max - ctl.q_min;
  m.theta_l = span * m.z_l + ctl.q_min;
  m.theta_r = m.p2 < 1.0 ? span * m.z_r + ctl.q_min : ctl.q_max;
  m.continuous_at_theta_r = a1 <= a2;
  m.has_fixed_point = a1 < a2 + ctl.q_max;
  if (!(m.z_l < m.z_r) || !(m.theta_l < m.theta_r)) {
    throw ConsistencyError("thresholds theta_l and theta_r are not separable in double precision");
  }
  return m;
}

inline DerivedModel derive_model(const SystemParams& sys, const ControlParams& ctl) {
  sys.validate();
  ctl.validate(sys.buffer);
  DerivedModel m = model_from_constants(sys.a1(ctl.p_max), sys.a2(), sys.buffer, ctl);
  m.system = sys;
  return m;
}

/// Same model with a different averaging weight (thresholds do not depend on w).
inline DerivedModel with_weight(const DerivedModel& m, double w) {
  DerivedModel out = m;
  out.control.w = w;
  out.control.validate(m.buffer);
  return out;
}

enum class Branch { Left, Core, Right };

inline Branch branch_of(double q, const DerivedModel& m) noexcept {
  if (q <= m.theta_l) return Branch::Left;
  if (q < m.theta_r) return Branch::Core;
  return Branch::Right;
}

namespace detail {

inline void check_state(double q, const DerivedModel& m, const char* op) {
  if (!(q >= 0.0 && q <= m.buffer)) {
    throw DomainError(std::string(op) + ": q must lie in [0,B], got " + std::to_string(q));
  }
}

// (nu A1 / 2) I'(z) I(z)^{-3/2}; the factor that sets the core slope.
inline double core_gain(double z, const DerivedModel& m) {
  const double value = reg_inc_beta(z, m.shape());
  const double deriv = reg_inc_beta_deriv(z, m.shape());
  if (std::isinf(deriv) || value == 0.0) return std::numeric_limits<double>::infinity();
  return 0.5 * m.nu * m.a1 * deriv / (value * std::sqrt(value));
}

inline double core_value(double q, const DerivedModel& m) {
  const double z = std::clamp(m.z_of(q), 0.0, 1.0);
  const double w = m.w();
  return (1.0 - w) * q + w * (m.a1 / std::sqrt(reg_inc_beta(z, m.shape())) - m.a2);
}

}  // namespace detail

/// Evaluates f(q). Images outside [0,B] by more than 1e-9 B raise
/// ConsistencyError; smaller excursions are rounding and get clamped.
inline double map_f(double q, const DerivedModel& m) {
  detail::check_state(q, m, "map_f");
  const double w = m.w();
  double image;
  switch (branch_of(q, m)) {
    case Branch::Left:
      image = (1.0 - w) * q + w * m.buffer;
      break;
    case Branch::Core:
      image = detail::core_value(q, m);
      break;
    case Branch::Right:
    default:
      image = (1.0 - w) * q;
      break;
  }
  const double slack = 1e-9 * m.buffer;
  if (!(image >= -slack && image <= m.buffer + slack)) {
    throw ConsistencyError("map_f: image " + std::to_string(image) + " of q = " +
                           std::to_string(q) + " leaves [0,B]");
  }
  return std::clamp(image, 0.0, m.buffer);
}

/// f(theta_r-) = f(theta_r) + w (A1 - A2)^+.
inline double map_f_left_limit(const DerivedModel& m) {
  return (1.0 - m.w()) * m.theta_r + m.w() * m.jump();
}

/// f'(q) on the branch containing q. At the thresholds this is the derivative
/// of the outer branch; use f_prime_right_theta_l / f_prime_left_theta_r for
/// the core side. Returns -infinity where the core slope diverges.
inline double f_prime(double q, const DerivedModel& m) {
  detail::check_state(q, m, "f_prime");
  const double w = m.w();
  if (branch_of(q, m) != Branch::Core) return 1.0 - w;
  return 1.0 - w * (1.0 + detail::core_gain(std::clamp(m.z_of(q), 0.0, 1.0), m));
}

/// f'_+(theta_l), the core-side slope at the left threshold.
inline double f_prime_right_theta_l(const DerivedModel& m) {
  return 1.0 - m.w() * (1.0 + detail::core_gain(m.z_l, m));
}

/// f'(theta_r-), the core-side slope at the right threshold. -infinity when
/// A1 >= A2 and beta < 1.
inline double f_prime_left_theta_r(const DerivedModel& m) {
  return 1.0 - m.w() * (1.0 + detail::core_gain(m.z_r, m));
}

/// f''(q) on the open core,
/// (w nu^2 A1 / 4) I^{-3/2} I' [3 J - 2 h].
inline double f_second(double q, const DerivedModel& m) {
  if (!(q > m.theta_l && q < m.theta_r)) {
    throw DomainError("f_second: q must lie in the open core (theta_l, theta_r)");
  }
  const double z = m.z_of(q);
  const double value = reg_inc_beta(z, m.shape());
  const double deriv = reg_inc_beta_deriv(z, m.shape());
  const double curvature = 3.0 * deriv / value - 2.0 * ratio_h(z, m.shape());
  return 0.25 * m.w() * m.nu * m.nu * m.a1 * deriv / (value * std::sqrt(value)) * curvature;
}

struct Envelope {
  double lower;
  double upper;
};

/// Affine bounds sandwiching f on the core:
/// (1-w) q + w (A1-A2)^+ < f(q) < (1-w) q + w B.
inline Envelope envelope_bounds(double q, const DerivedModel& m) {
  const double w = m.w();
  return {(1.0 - w) * q + w * m.jump(), (1.0 - w) * q + w * m.buffer};
}

/// Weight below which the core branch is increasing and above which it is
/// decreasing (for monotone cores).
inline double w_mon(const DerivedModel& m) {
  const double width = m.theta_r - m.theta_l;
  return width / (width + m.buffer - m.jump());
}

/// Largest weight for which a decreasing core keeps (theta_l, theta_r)
/// invariant.
inline double w_inv(const DerivedModel& m) {
  const double width = m.theta_r - m.theta_l;
  const double first = width / (m.buffer - m.theta_l);
  const double denom = m.theta_r - m.jump();
  const double second = denom > 0.0 ? width / denom : std::numeric_limits<double>::infinity();
  return std::min(first, second);
}

}  // namespace redmap

#endif  // REDMAP_MODEL_HPP
