#ifndef REDMAP_STABILITY_HPP
#define REDMAP_STABILITY_HPP

// Shape of the core branch, convexity, invariance of the core interval, and
// a decision procedure that certifies global stability of q* on [0, B].
//
// Every certificate is built from sufficient conditions. A failed condition
// therefore yields Undecided; No is reserved for a locally unstable fixed
// point (f'(q*) < -1) or a map without a fixed point.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "redmap/betafn.hpp"
#include "redmap/equilibrium.hpp"
#include "redmap/errors.hpp"
#include "redmap/model.hpp"

namespace redmap {

enum class ConvexityStatus { ProvenConvex, NumericallyConvex, NotConvex, Unknown };

enum class ConvexityRule {
  Beta1Family,  ///< beta = 1, any alpha
  RegionA,      ///< beta < 1, alpha < 1, z <= (alpha-1)/(alpha+beta-2)
  RegionB,      ///< beta >= 1, alpha <= 1
  RegionC,      ///< beta > 1, alpha > 1, z >= (alpha-1)/(alpha+beta-2)
  RatioBoundA,  ///< alpha <= beta, z(theta_r) <= alpha/(alpha+beta)
  RatioBoundB,  ///< alpha > beta, z(theta_r) <= (alpha+2)/(alpha+beta+4)
  Scan          ///< sign of 3J - 2h on a core grid
};

struct ConvexityCertificate {
  ConvexityStatus status = ConvexityStatus::Unknown;
  ConvexityRule rule = ConvexityRule::Scan;

  bool convex() const noexcept {
    return status == ConvexityStatus::ProvenConvex || status == ConvexityStatus::NumericallyConvex;
  }
};

enum class ShapeKind { Increasing, Decreasing, UnimodalMin, UnimodalMax, Multimodal, Indeterminate };
enum class ShapeEvidence { ConvexityCertificate, NumericScan };

struct ShapeClass {
  ShapeKind kind = ShapeKind::Indeterminate;
  std::optional<double> q_c;  ///< turning point, unimodal shapes only
  ShapeEvidence evidence = ShapeEvidence::NumericScan;
  int sign_changes = 0;
};

/// One inequality of a certificate. `passed` is the verdict of the inequality
/// named in `name`; value and bound are its two sides.
struct Condition {
  std::string name;
  double value = 0;
  double bound = 0;
  bool passed = false;
};

struct InvarianceResult {
  bool invariant = false;
  std::vector<Condition> conditions;
};

enum class Verdict { Yes, No, Undecided };

/// Criterion that produced a Yes verdict.
enum class Theorem {
  MonotoneIncreasing,      ///< increasing core, invariant interval
  MonotoneDecreasing,      ///< decreasing core, f' > -1 on a grid, w <= w_inv
  DecreasingConvex,        ///< decreasing convex core, f'(theta_l+) >= -1, w <= w_inv
  UnimodalLeft,            ///< minimum at q_c <= q*
  UnimodalRight,           ///< minimum at q_c > q*, (A1-A2)+ < q*
  UnimodalRightLargeJump,  ///< minimum at q_c > q*, q* <= (A1-A2)+ < q_max
  UnimodalRightConvex,     ///< convex core, minimum at q_c > q*, (A1-A2)+ < q*
  None
};

struct StabilityCertificate {
  Verdict globally_stable = Verdict::Undecided;
  Theorem theorem = Theorem::None;
  std::vector<Condition> conditions_checked;
  bool two_cycle_endpoint_excluded = false;  ///< theta_l + theta_r != B
  ConvexityCertificate convexity;
  ShapeClass shape;
  std::optional<Equilibrium> equilibrium;
  std::string note;
};

inline const char* to_string(ConvexityStatus s) {
  switch (s) {
    case ConvexityStatus::ProvenConvex: return "proven_convex";
    case ConvexityStatus::NumericallyConvex: return "numerically_convex";
    case ConvexityStatus::NotConvex: return "not_convex";
    case ConvexityStatus::Unknown: return "unknown";
  }
  return "?";
}

inline const char* to_string(ConvexityRule r) {
  switch (r) {
    case ConvexityRule::Beta1Family: return "beta1_family";
    case ConvexityRule::RegionA: return "region_a";
    case ConvexityRule::RegionB: return "region_b";
    case ConvexityRule::RegionC: return "region_c";
    case ConvexityRule::RatioBoundA: return "ratio_bound_a";
    case ConvexityRule::RatioBoundB: return "ratio_bound_b";
    case ConvexityRule::Scan: return "scan";
  }
  return "?";
}

inline const char* to_string(ShapeKind k) {
  switch (k) {
    case ShapeKind::Increasing: return "increasing";
    case ShapeKind::Decreasing: return "decreasing";
    case ShapeKind::UnimodalMin: return "unimodal_min";
    case ShapeKind::UnimodalMax: return "unimodal_max";
    case ShapeKind::Multimodal: return "multimodal";
    case ShapeKind::Indeterminate: return "indeterminate";
  }
  return "?";
}

inline const char* to_string(ShapeEvidence e) {
  return e == ShapeEvidence::ConvexityCertificate ? "convexity_certificate" : "numeric_scan";
}

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Yes: return "yes";
    case Verdict::No: return "no";
    case Verdict::Undecided: return "undecided";
  }
  return "?";
}

inline const char* to_string(Theorem t) {
  switch (t) {
    case Theorem::MonotoneIncreasing: return "monotone_increasing";
    case Theorem::MonotoneDecreasing: return "monotone_decreasing";
    case Theorem::DecreasingConvex: return "decreasing_convex";
    case Theorem::UnimodalLeft: return "unimodal_left";
    case Theorem::UnimodalRight: return "unimodal_right";
    case Theorem::UnimodalRightLargeJump: return "unimodal_right_large_jump";
    case Theorem::UnimodalRightConvex: return "unimodal_right_convex";
    case Theorem::None: return "none";
  }
  return "?";
}

namespace detail {

constexpr int kConvexityGrid = 2048;
constexpr int kShapeGrid = 4096;
constexpr double kSignTolerance = 1e-12;

// Interior point i (1..n-1) of an n-cell partition of [z_l, z_r].
inline double grid_z(const DerivedModel& m, int i, int n) {
  return m.z_l + (m.z_r - m.z_l) * static_cast<double>(i) / n;
}

inline double curvature_sign_function(double z, const BetaShape& shape) {
  return 3.0 * log_ratio_J(z, shape) - 2.0 * ratio_h(z, shape);
}

inline double f_prime_at_z(double z, const DerivedModel& m) {
  return 1.0 - m.w() * (1.0 + core_gain(z, m));
}

inline int sign_of(double v, double scale) {
  if (v > kSignTolerance * scale) return 1;
  if (v < -kSignTolerance * scale) return -1;
  return 0;
}

// Root of f' between two core points of opposite sign.
inline double bisect_f_prime(const DerivedModel& m, double z_lo, double z_hi) {
  const bool lo_positive = f_prime_at_z(z_lo, m) > 0.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (z_lo + z_hi);
    if (mid <= z_lo || mid >= z_hi) break;
    if ((f_prime_at_z(mid, m) > 0.0) == lo_positive) {
      z_lo = mid;
    } else {
      z_hi = mid;
    }
  }
  return m.q_of(0.5 * (z_lo + z_hi));
}

inline Condition make_condition(std::string name, double value, double bound, bool passed) {
  return Condition{std::move(name), value, bound, passed};
}

}  // namespace detail

/// Convexity of the core branch. Tries the analytic regions first, each of
/// which must cover the whole core z-range; falls back to the sign of
/// 3J - 2h on a 2048-cell grid.
inline ConvexityCertificate certify_convexity(const DerivedModel& m) {
  const double a = m.shape().alpha();
  const double b = m.shape().beta();
  auto proven = [](ConvexityRule r) { return ConvexityCertificate{ConvexityStatus::ProvenConvex, r}; };

  if (b == 1.0) return proven(ConvexityRule::Beta1Family);
  if (b >= 1.0 && a <= 1.0) return proven(ConvexityRule::RegionB);
  if (b < 1.0 && a < 1.0 && m.z_r <= (a - 1.0) / (a + b - 2.0)) return proven(ConvexityRule::RegionA);
  if (b > 1.0 && a > 1.0 && m.z_l >= (a - 1.0) / (a + b - 2.0)) return proven(ConvexityRule::RegionC);
  if (a <= b && m.z_r <= a / (a + b)) return proven(ConvexityRule::RatioBoundA);
  if (a > b && m.z_r <= (a + 2.0) / (a + b + 4.0)) return proven(ConvexityRule::RatioBoundB);

  std::vector<double> values;
  values.reserve(detail::kConvexityGrid);
  double scale = 0.0;
  for (int i = 1; i < detail::kConvexityGrid; ++i) {
    const double z = detail::grid_z(m, i, detail::kConvexityGrid);
    if (!(z > 0.0 && z < 1.0)) continue;
    const double v = detail::curvature_sign_function(z, m.shape());
    if (!std::isfinite(v)) return {ConvexityStatus::Unknown, ConvexityRule::Scan};
    values.push_back(v);
    scale = std::max(scale, std::fabs(v));
  }
  bool any_negative = false;
  bool all_positive = !values.empty();
  for (double v : values) {
    const int s = detail::sign_of(v, scale);
    if (s < 0) any_negative = true;
    if (s <= 0) all_positive = false;
  }
  if (any_negative) return {ConvexityStatus::NotConvex, ConvexityRule::Scan};
  if (all_positive) return {ConvexityStatus::NumericallyConvex, ConvexityRule::Scan};
  return {ConvexityStatus::Unknown, ConvexityRule::Scan};
}

/// Shape of f on (theta_l, theta_r).
///
/// Under convexity f' is increasing, so the one-sided slopes at the two
/// thresholds decide the shape. Otherwise f' is sampled on a 4096-cell grid
/// (endpoints included, the -infinity slope at theta_r counting as negative)
/// and its sign changes are counted.
inline ShapeClass classify_shape(const DerivedModel& m, const ConvexityCertificate& conv) {
  ShapeClass out;
  const double slope_l = f_prime_right_theta_l(m);
  const double slope_r = f_prime_left_theta_r(m);

  if (conv.convex() && std::isfinite(slope_r)) {
    out.evidence = ShapeEvidence::ConvexityCertificate;
    if (slope_l >= 0.0) {
      out.kind = ShapeKind::Increasing;
    } else if (slope_r <= 0.0) {
      out.kind = ShapeKind::Decreasing;
    } else {
      out.kind = ShapeKind::UnimodalMin;
      out.sign_changes = 1;
      out.q_c = detail::bisect_f_prime(m, m.z_l, m.z_r);
    }
    return out;
  }

  out.evidence = ShapeEvidence::NumericScan;
  const int n = detail::kShapeGrid;
  std::vector<double> zs;
  std::vector<double> slopes;
  zs.reserve(n + 1);
  slopes.reserve(n + 1);
  zs.push_back(m.z_l);
  slopes.push_back(slope_l);
  for (int i = 1; i < n; ++i) {
    const double z = detail::grid_z(m, i, n);
    zs.push_back(z);
    slopes.push_back(detail::f_prime_at_z(z, m));
  }
  zs.push_back(m.z_r);
  slopes.push_back(slope_r);

  double scale = 0.0;
  for (std::size_t i = 1; i + 1 < slopes.size(); ++i) {
    if (std::isnan(slopes[i]) || std::isinf(slopes[i])) {
      out.kind = ShapeKind::Indeterminate;
      return out;
    }
    scale = std::max(scale, std::fabs(slopes[i]));
  }
  if (std::isnan(slope_l) || std::isnan(slope_r)) {
    out.kind = ShapeKind::Indeterminate;
    return out;
  }

  // Sign sequence without zeros; remember where each change happens.
  int first_sign = 0;
  int previous_sign = 0;
  std::size_t previous_index = 0;
  std::vector<std::pair<std::size_t, std::size_t>> changes;
  for (std::size_t i = 0; i < slopes.size(); ++i) {
    const int s = std::isinf(slopes[i]) ? (slopes[i] > 0 ? 1 : -1) : detail::sign_of(slopes[i], scale);
    if (s == 0) continue;
    if (first_sign == 0) first_sign = s;
    if (previous_sign != 0 && s != previous_sign) changes.emplace_back(previous_index, i);
    previous_sign = s;
    previous_index = i;
  }
  out.sign_changes = static_cast<int>(changes.size());
  if (first_sign == 0) {
    out.kind = ShapeKind::Indeterminate;
  } else if (changes.empty()) {
    out.kind = first_sign > 0 ? ShapeKind::Increasing : ShapeKind::Decreasing;
  } else if (changes.size() == 1) {
    out.kind = first_sign < 0 ? ShapeKind::UnimodalMin : ShapeKind::UnimodalMax;
    out.q_c = detail::bisect_f_prime(m, zs[changes[0].first], zs[changes[0].second]);
  } else {
    out.kind = ShapeKind::Multimodal;
  }
  return out;
}

/// Invariance of (theta_l, theta_r) for the given shape.
inline InvarianceResult check_invariance(const DerivedModel& m, const ShapeClass& shape) {
  using detail::make_condition;
  InvarianceResult out;
  const double width = m.theta_r - m.theta_l;
  switch (shape.kind) {
    case ShapeKind::Increasing:
      out.conditions.push_back(
          make_condition("(A1-A2)+ < q_max", m.jump(), m.q_max(), m.jump() < m.q_max()));
      break;
    case ShapeKind::Decreasing: {
      const double bound = w_inv(m);
      out.conditions.push_back(make_condition("w <= w_inv", m.w(), bound, m.w() <= bound));
      break;
    }
    case ShapeKind::UnimodalMin: {
      const double bound = width / (m.buffer - m.theta_l);
      const double f_qc = map_f(*shape.q_c, m);
      out.conditions.push_back(make_condition("w <= (theta_r-theta_l)/(B-theta_l)", m.w(), bound,
                                              m.w() <= bound));
      out.conditions.push_back(make_condition("f(q_c) > theta_l", f_qc, m.theta_l, f_qc > m.theta_l));
      out.conditions.push_back(make_condition("A1 <= A2 + q_max", m.a1, m.a2 + m.q_max(),
                                              m.a1 <= m.a2 + m.q_max()));
      break;
    }
    case ShapeKind::UnimodalMax: {
      const double bound = width / m.theta_r;
      const double f_qc = map_f(*shape.q_c, m);
      out.conditions.push_back(make_condition("f(q_c) < theta_r", f_qc, m.theta_r, f_qc < m.theta_r));
      out.conditions.push_back(
          make_condition("w <= (theta_r-theta_l)/theta_r", m.w(), bound, m.w() <= bound));
      break;
    }
    case ShapeKind::Multimodal:
    case ShapeKind::Indeterminate:
      throw Unsupported(std::string("no invariance criterion for a ") + to_string(shape.kind) +
                        " core");
  }
  out.invariant = std::all_of(out.conditions.begin(), out.conditions.end(),
                              [](const Condition& c) { return c.passed; });
  return out;
}

namespace detail {

// Smallest f' over [theta_l, q_hi] on a 4096-cell grid, one-sided slope at
// theta_l included.
inline double min_f_prime_on(const DerivedModel& m, double q_hi) {
  double lowest = f_prime_right_theta_l(m);
  const double z_hi = m.z_of(q_hi);
  for (int i = 1; i <= kShapeGrid; ++i) {
    const double z = m.z_l + (z_hi - m.z_l) * static_cast<double>(i) / kShapeGrid;
    const double s = (i == kShapeGrid && q_hi >= m.theta_r) ? f_prime_left_theta_r(m)
                                                            : f_prime_at_z(z, m);
    lowest = std::min(lowest, s);
  }
  return lowest;
}

inline bool all_passed(const std::vector<Condition>& conditions) {
  return std::all_of(conditions.begin(), conditions.end(), [](const Condition& c) { return c.passed; });
}

}  // namespace detail

/// Global-stability certificate for q* on [0, B].
inline StabilityCertificate certify_global_stability(const DerivedModel& m) {
  using detail::make_condition;
  StabilityCertificate cert;
  auto& conds = cert.conditions_checked;
  const double width = m.theta_r - m.theta_l;

  conds.push_back(make_condition("A1 < A2 + q_max", m.a1, m.a2 + m.q_max(), m.has_fixed_point));
  cert.two_cycle_endpoint_excluded =
      std::fabs(m.theta_l + m.theta_r - m.buffer) > 1e-12 * m.buffer;
  if (!m.has_fixed_point) {
    cert.globally_stable = Verdict::No;
    cert.note = "no fixed point";
    return cert;
  }

  Equilibrium eq;
  try {
    eq = fixed_point(m);
  } catch (const NonConvergence& e) {
    cert.note = std::string("fixed point not resolvable: ") + e.what();
    return cert;
  }
  cert.equilibrium = eq;
  conds.push_back(make_condition("f'(q*) >= -1", eq.f_prime_at_star, -1.0, eq.f_prime_at_star >= -1.0));
  if (eq.f_prime_at_star < -1.0) {
    cert.globally_stable = Verdict::No;
    cert.note = "fixed point is locally unstable";
    return cert;
  }

  conds.push_back(make_condition("theta_l + theta_r != B", m.theta_l + m.theta_r, m.buffer,
                                 cert.two_cycle_endpoint_excluded));
  if (!cert.two_cycle_endpoint_excluded) {
    cert.note = "{theta_l, theta_r} may be a 2-cycle";
    return cert;
  }

  cert.convexity = certify_convexity(m);
  cert.shape = classify_shape(m, cert.convexity);
  const bool convex = cert.convexity.convex() &&
                      cert.shape.evidence == ShapeEvidence::ConvexityCertificate;
  const double slope_l = f_prime_right_theta_l(m);
  const double left_bound = width / (m.buffer - m.theta_l);

  auto accept = [&](Theorem t, const std::vector<Condition>& extra) {
    conds.insert(conds.end(), extra.begin(), extra.end());
    if (detail::all_passed(extra)) {
      cert.globally_stable = Verdict::Yes;
      cert.theorem = t;
      return true;
    }
    return false;
  };

  switch (cert.shape.kind) {
    case ShapeKind::Increasing: {
      accept(Theorem::MonotoneIncreasing, {make_condition("(A1-A2)+ < q_max", m.jump(), m.q_max(),
                                              m.jump() < m.q_max())});
      break;
    }
    case ShapeKind::Decreasing: {
      const double bound = w_inv(m);
      if (convex &&
          accept(Theorem::DecreasingConvex,
                 {make_condition("f'(theta_l+) >= -1", slope_l, -1.0, slope_l >= -1.0),
                  make_condition("w <= w_inv", m.w(), bound, m.w() <= bound)})) {
        break;
      }
      if (!convex) {
        const double lowest = detail::min_f_prime_on(m, m.theta_r);
        accept(Theorem::MonotoneDecreasing, {make_condition("min f' on core > -1", lowest, -1.0, lowest > -1.0),
                                 make_condition("w <= w_inv", m.w(), bound, m.w() <= bound)});
      }
      break;
    }
    case ShapeKind::UnimodalMin: {
      const double q_c = *cert.shape.q_c;
      if (q_c <= eq.q_star) {
        accept(Theorem::UnimodalLeft,
               {make_condition("w <= (theta_r-theta_l)/(B-theta_l)", m.w(), left_bound,
                               m.w() <= left_bound),
                make_condition("q_c <= q*", q_c, eq.q_star, true),
                make_condition("A1 <= A2 + q_max", m.a1, m.a2 + m.q_max(),
                               m.a1 <= m.a2 + m.q_max())});
        break;
      }
      const double jump = m.jump();
      if (jump < eq.q_star) {
        if (convex) {
          const double w1 = std::min(
              left_bound, (eq.q_star - m.theta_l + std::max(m.theta_l - jump, 0.0) / eq.m_slope) /
                              (eq.q_star - jump));
          if (accept(Theorem::UnimodalRightConvex,
                     {make_condition("f'(theta_l+) >= -1", slope_l, -1.0, slope_l >= -1.0),
                      make_condition("w <= w1", m.w(), w1, m.w() <= w1)})) {
            break;
          }
        }
        const double w3 = std::min(left_bound, (eq.q_star - m.theta_l) / (eq.q_star - jump));
        const double lowest = convex ? slope_l : detail::min_f_prime_on(m, q_c);
        accept(Theorem::UnimodalRight,
               {make_condition("min f' on (theta_l, q_c) > -1", lowest, -1.0, lowest > -1.0),
                make_condition("w <= min{(theta_r-theta_l)/(B-theta_l), (q*-theta_l)/(q*-(A1-A2)+)}",
                               m.w(), w3, m.w() <= w3)});
      } else {
        // (A1-A2)+ = q* exactly is routed here.
        const double lowest = convex ? slope_l : detail::min_f_prime_on(m, q_c);
        accept(Theorem::UnimodalRightLargeJump,
               {make_condition("(A1-A2)+ < q_max", jump, m.q_max(), jump < m.q_max()),
                make_condition("min f' on (theta_l, q_c) > -1", lowest, -1.0, lowest > -1.0),
                make_condition("w <= (theta_r-theta_l)/(B-theta_l)", m.w(), left_bound,
                               m.w() <= left_bound)});
        if (jump == eq.q_star) cert.note = "(A1-A2)+ equals q*; large-jump criterion used";
      }
      break;
    }
    case ShapeKind::UnimodalMax:
    case ShapeKind::Multimodal:
    case ShapeKind::Indeterminate:
      cert.note = std::string("no stability criterion for a ") + to_string(cert.shape.kind) + " core";
      break;
  }
  return cert;
}

}  // namespace redmap

#endif  // REDMAP_STABILITY_HPP
