#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <tuple>

#include "redmap/equilibrium.hpp"
#include "redmap/presets.hpp"
#include "redmap/sweep.hpp"
#include "support.hpp"

using namespace redmap;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using testing_support::random_model;
using testing_support::reference_model;

TEST_CASE("fixed point of the reference models") {
  const Equilibrium eq = fixed_point(reference_model());
  CHECK_THAT(eq.z_star, WithinRel(0.2431141736751859, 1e-12));
  CHECK_THAT(eq.q_star, WithinRel(743.1141736751859, 1e-12));
  CHECK_THAT(eq.m_slope, WithinRel(10.450527100518859, 1e-10));
  CHECK(eq.locally_stable);

  const Equilibrium g = fixed_point(reference_model(0.5, 0.2));
  CHECK_THAT(g.z_star, WithinRel(0.39493360346173787, 1e-11));
  CHECK_THAT(g.m_slope, WithinRel(4.9530096380052749, 1e-9));

  const DerivedModel m = reference_model();
  CHECK(eq.q_star > m.theta_l);
  CHECK(eq.q_star < m.theta_r);
  CHECK_THAT(map_f(eq.q_star, m), WithinAbs(eq.q_star, 1e-9 * m.buffer));
}

TEST_CASE("alpha = 2, beta = 1 quadratic root") {
  const DerivedModel m = reference_model(2.0, 1.0);
  const double k = m.a2 + m.q_min();
  const double z = 0.5 * m.nu * (std::sqrt(k * k + 4.0 * m.a1 / m.nu) - k);
  CHECK_THAT(fixed_point(m).z_star, WithinRel(z, 1e-12));
}

TEST_CASE("no fixed point when A1 >= A2 + q_max") {
  const ControlParams ctl = presets::reference_control();
  const DerivedModel edge = model_from_constants(3852.0 + 1500.0, 3852.0, 2000.0, ctl);
  CHECK_THROWS_AS(fixed_point(edge), NoFixedPoint);
  CHECK_THROWS_AS(w_bifurcation(edge), NoFixedPoint);
  // z* = 1 solves the polynomial at the boundary.
  CHECK_THAT(beta1_equilibrium_z(1.0, edge.nu, edge.a1, edge.a2, edge.q_min()), WithinRel(1.0, 1e-12));
  CHECK_THAT(beta1_equilibrium_z(2.0, edge.nu, edge.a1, edge.a2, edge.q_min()), WithinRel(1.0, 1e-12));
  CHECK_THAT(beta1_equilibrium_z(0.5, edge.nu, edge.a1, edge.a2, edge.q_min()), WithinRel(1.0, 1e-12));
}

TEST_CASE("fixed point does not depend on w") {
  std::mt19937_64 rng(51);
  for (int i = 0; i < 100; ++i) {
    const DerivedModel m = random_model(rng, {.require_fixed_point = true});
    double lo = m.buffer, hi = 0.0;
    for (int k = 1; k <= 10; ++k) {
      const double q = fixed_point(with_weight(m, k / 11.0)).q_star;
      lo = std::min(lo, q);
      hi = std::max(hi, q);
    }
    CHECK(hi - lo <= 1e-9 * m.buffer);
  }
}

TEST_CASE("equilibrium identity and residual") {
  std::mt19937_64 rng(52);
  for (int i = 0; i < 500; ++i) {
    const DerivedModel m = random_model(rng, {.require_fixed_point = true});
    const Equilibrium eq = fixed_point(m);
    const double rebuilt = (eq.q_star + m.a2) * std::sqrt(reg_inc_beta(eq.z_star, m.shape()));
    CHECK_THAT(rebuilt, WithinRel(m.a1, 1e-8));
    CHECK(eq.m_slope > 1.0);
    CHECK_THAT(eq.f_prime_at_star, WithinAbs(1.0 - eq.m_slope * m.w(), 1e-15));
    CHECK(eq.locally_stable == (eq.f_prime_at_star > -1.0));
  }
}

TEST_CASE("beta = 1 closed forms agree with the generic solver") {
  std::mt19937_64 rng(53);
  for (double alpha : {0.5, 1.0, 2.0, 3.0}) {
    for (int i = 0; i < 100; ++i) {
      const DerivedModel m = random_model(rng, {.require_fixed_point = true, .beta = 1.0, .alpha = alpha});
      const Equilibrium generic = fixed_point(m);
      const Equilibrium closed = fixed_point_closed_beta1(m);
      CAPTURE(alpha, m.a1, m.a2, m.q_min(), m.q_max());
      CHECK_THAT(generic.z_star, WithinRel(closed.z_star, 1e-9));
      CHECK_THAT(generic.q_star, WithinRel(closed.q_star, 1e-9));

      const double z = closed.z_star;
      const double power = std::pow(z, alpha / 2 + 1);
      const double w_closed = 4 * power / (2 * power + alpha * m.nu * m.a1);
      CHECK_THAT(w_bifurcation(m).value, WithinRel(w_closed, 1e-9));
    }
  }
  CHECK_THROWS_AS(fixed_point_closed_beta1(reference_model(0.5, 0.2)), PreconditionViolation);
}

TEST_CASE("w bifurcation point") {
  const DerivedModel m = reference_model();
  const BifurcationPoint bp = w_bifurcation(m);
  CHECK(bp.parameter == BifurcationParameter::W);
  CHECK_THAT(bp.value, WithinRel(0.19137790666087089, 1e-10));
  CHECK_THAT(bp.value, WithinAbs(0.2, 0.05));
  CHECK(bp.residual <= 1e-10);
  CHECK_THAT(fixed_point(with_weight(m, bp.value)).f_prime_at_star, WithinAbs(-1.0, 1e-8));

  const BifurcationPoint g = w_bifurcation(reference_model(0.5, 0.2));
  CHECK_THAT(g.value, WithinRel(0.40379489364479811, 1e-9));
  CHECK_THAT(g.value, WithinAbs(0.4, 0.05));

  std::mt19937_64 rng(54);
  for (int i = 0; i < 300; ++i) {
    const DerivedModel r = random_model(rng, {.require_fixed_point = true});
    const BifurcationPoint p = w_bifurcation(r);
    CHECK(p.residual <= 1e-10 * p.value);
    if (p.value < 1.0) {
      CHECK_THAT(fixed_point(with_weight(r, p.value)).f_prime_at_star, WithinAbs(-1.0, 1e-8));
    }
  }
}

TEST_CASE("A1 bifurcation point") {
  for (auto [alpha, beta, expected] : {std::tuple{1.0, 1.0, 1950.0}, {0.5, 0.2, 1450.0}}) {
    const DerivedModel m = reference_model(alpha, beta);
    const BifurcationPoint bp = a1_bifurcation(m);
    CAPTURE(alpha, beta, bp.value, to_string(bp.strategy), bp.trace);
    CHECK(bp.parameter == BifurcationParameter::A1);
    CHECK_THAT(bp.value, WithinAbs(expected, 100.0));
    const DerivedModel rebuilt = model_from_constants(bp.value, m.a2, m.buffer, m.control);
    CHECK_THAT(fixed_point(rebuilt).f_prime_at_star, WithinAbs(-1.0, 1e-6));
    CHECK(bp.residual <= 1e-6);
  }
  CHECK_THAT(a1_bifurcation(reference_model()).value, WithinRel(1945.083071, 1e-8));
  CHECK_THAT(a1_bifurcation(reference_model(0.5, 0.2)).value, WithinRel(1413.467001, 1e-8));
}

TEST_CASE("A2 bifurcation point") {
  for (auto [alpha, beta, expected] : {std::tuple{1.0, 1.0, 4350.0}, {0.5, 0.2, 5750.0}}) {
    const DerivedModel m = reference_model(alpha, beta);
    const BifurcationPoint bp = a2_bifurcation(m);
    CAPTURE(alpha, beta, bp.value, to_string(bp.strategy), bp.trace);
    CHECK(bp.parameter == BifurcationParameter::A2);
    CHECK_THAT(bp.value, WithinAbs(expected, 200.0));
    const DerivedModel rebuilt = model_from_constants(m.a1, bp.value, m.buffer, m.control);
    CHECK_THAT(fixed_point(rebuilt).f_prime_at_star, WithinAbs(-1.0, 1e-6));
  }
  CHECK_THAT(a2_bifurcation(reference_model()).value, WithinRel(4317.973587, 1e-8));
  CHECK_THAT(a2_bifurcation(reference_model(0.5, 0.2)).value, WithinRel(5774.003225, 1e-8));
}

TEST_CASE("bifurcation values map back to physical parameters") {
  CHECK_THAT(connections_for_a1(2265.695, 1.2247, 1.0), WithinRel(1850.0, 1e-6));
  CHECK_THAT(connections_for_a1(4531.39, 1.2247, 0.25), WithinRel(1850.0, 1e-6));
  CHECK_THAT(rtt_for_a2(3852.0, 1.0, 321000.0), WithinRel(0.012, 1e-12));
}

TEST_CASE("critical point for beta = 1") {
  const DerivedModel m = reference_model();
  const auto q_c = critical_point_beta1(m);
  REQUIRE(q_c.has_value());
  CHECK_THAT(m.z_of(*q_c), WithinAbs(0.342, 0.001));
  CHECK_THAT(*q_c, WithinAbs(842.0, 1.0));
  CHECK(f_prime(*q_c - 1.0, m) < 0.0);
  CHECK(f_prime(*q_c + 1.0, m) > 0.0);

  // alpha = 2: z_c = sqrt(nu w A1 / (1 - w)).
  const DerivedModel two = reference_model(2.0, 1.0, 0.05);
  const double z2 = std::sqrt(two.nu * 0.05 * two.a1 / 0.95);
  const auto q2 = critical_point_beta1(two);
  if (two.z_l < z2 && z2 < two.z_r) {
    REQUIRE(q2.has_value());
    CHECK_THAT(two.z_of(*q2), WithinRel(z2, 1e-12));
  } else {
    CHECK_FALSE(q2.has_value());
  }
  CHECK_FALSE(critical_point_beta1(reference_model(1.0, 1.0, 0.9)).has_value());
}

TEST_CASE("orbits on both sides of w_bif") {
  for (auto [alpha, beta] : {std::pair{1.0, 1.0}, {0.5, 0.2}}) {
    const DerivedModel m = reference_model(alpha, beta);
    const double w_bif = w_bifurcation(m).value;
    const Equilibrium eq = fixed_point(m);
    CAPTURE(alpha, beta, w_bif);

    const Orbit below = simulate_orbit(with_weight(m, 0.95 * w_bif), 100.0, 5000, 4900);
    const AttractorSummary s_below = summarize_attractor(below);
    CHECK(s_below.kind == AttractorKind::FixedPoint);
    CHECK_THAT(below.samples.back(), WithinAbs(eq.q_star, 1e-6 * m.buffer));

    const Orbit above = simulate_orbit(with_weight(m, 1.05 * w_bif), 100.0, 5000, 4900);
    const AttractorSummary s_above = summarize_attractor(above);
    CAPTURE(static_cast<int>(s_above.kind), s_above.period, s_above.spread);
    CHECK(s_above.kind == AttractorKind::Cycle);
    CHECK(s_above.period == 2);
  }
}
