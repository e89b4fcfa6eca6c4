#ifndef REDMAP_TESTS_SUPPORT_HPP
#define REDMAP_TESTS_SUPPORT_HPP

#include <optional>
#include <random>

#include "redmap/equilibrium.hpp"
#include "redmap/model.hpp"
#include "redmap/presets.hpp"

namespace testing_support {

struct RandomModelOptions {
  double shape_lo = 0.05;
  double shape_hi = 5.0;
  double w_lo = 0.01;
  double w_hi = 0.99;
  bool require_fixed_point = false;
  std::optional<double> beta{};  ///< fixed beta, e.g. 1 for closed-form checks
  std::optional<double> alpha{};
};

/// Valid random model; retries until construction succeeds. With
/// require_fixed_point, q* must also be resolvable in double precision.
inline redmap::DerivedModel random_model(std::mt19937_64& rng, const RandomModelOptions& opt = {}) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto between = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  for (;;) {
    const double buffer = between(500.0, 4000.0);
    const double q_min = between(0.0, 0.4) * buffer;
    const double q_max = between(q_min + 0.1 * buffer, buffer);
    redmap::SystemParams sys{between(200.0, 4000.0), between(1.0, 1.63), between(1e5, 5e5),
                             between(0.005, 0.03), 1.0, buffer};
    const double alpha = opt.alpha.value_or(between(opt.shape_lo, opt.shape_hi));
    const double beta = opt.beta.value_or(between(opt.shape_lo, opt.shape_hi));
    redmap::ControlParams ctl{between(0.05, 1.0), q_min, q_max, between(opt.w_lo, opt.w_hi),
                              redmap::BetaShape(alpha, beta)};
    try {
      redmap::DerivedModel m = redmap::derive_model(sys, ctl);
      if (opt.require_fixed_point) {
        if (!m.has_fixed_point) continue;
        redmap::fixed_point(m);
      }
      return m;
    } catch (const redmap::ConstraintViolation&) {
    } catch (const redmap::ConsistencyError&) {
    } catch (const redmap::NonConvergence&) {
    }
  }
}

inline redmap::DerivedModel reference_model(double alpha = 1.0, double beta = 1.0, double w = 0.15,
                                            double p_max = 1.0) {
  redmap::ControlParams ctl = redmap::presets::reference_control(alpha, beta);
  ctl.w = w;
  ctl.p_max = p_max;
  return redmap::derive_model(redmap::presets::reference_system(), ctl);
}

}  // namespace testing_support

#endif  // REDMAP_TESTS_SUPPORT_HPP
