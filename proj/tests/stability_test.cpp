#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "redmap/presets.hpp"
#include "redmap/stability.hpp"
#include "redmap/sweep.hpp"
#include "support.hpp"

using namespace redmap;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using testing_support::random_model;
using testing_support::reference_model;

namespace {

DerivedModel par2_model(double a1, double alpha, double beta, double w = 0.15) {
  ControlParams ctl = presets::reference_control(alpha, beta);
  ctl.w = w;
  return model_from_constants(a1, 3852.0, 2000.0, ctl);
}

double curvature(double z, const BetaShape& s) { return 3.0 * log_ratio_J(z, s) - 2.0 * ratio_h(z, s); }

// Decreasing convex core (alpha = 2, beta = 1, A1 = 5000) with f'(theta_l+) = -0.5.
DerivedModel decreasing_convex_model() {
  const DerivedModel m = par2_model(5000.0, 2.0, 1.0);
  return with_weight(m, 1.5 / (1.0 + detail::core_gain(m.z_l, m)));
}

}  // namespace

TEST_CASE("convexity rules") {
  CHECK(certify_convexity(reference_model()).rule == ConvexityRule::Beta1Family);
  CHECK(certify_convexity(reference_model(3.0, 1.0)).status == ConvexityStatus::ProvenConvex);
  const ConvexityCertificate b = certify_convexity(reference_model(0.5, 2.0));
  CHECK(b.status == ConvexityStatus::ProvenConvex);
  CHECK(b.rule == ConvexityRule::RegionB);
  CHECK(b.convex());

  // alpha = 1, beta = 0.01 with z(theta_r) ~ 0.456 <= 3/(beta+5).
  const DerivedModel small = par2_model(300.0, 1.0, 0.01);
  CHECK(small.z_r <= 3.0 / 5.01);
  const ConvexityCertificate r = certify_convexity(small);
  CHECK(r.status == ConvexityStatus::ProvenConvex);
  CHECK(r.rule == ConvexityRule::RatioBoundB);

  // Same shape with the core reaching z = 1: 3J - 2h changes sign inside.
  const ConvexityCertificate wide = certify_convexity(reference_model(1.0, 0.01));
  CHECK(wide.status == ConvexityStatus::NotConvex);
  CHECK(wide.rule == ConvexityRule::Scan);
  CHECK_FALSE(wide.convex());
}

TEST_CASE("convexity boundary for alpha = 1, beta = 0.01") {
  const BetaShape s(1.0, 0.01);
  CHECK(curvature(0.5, s) > 0.0);
  CHECK(curvature(0.9, s) < 0.0);
  double lo = 0.5, hi = 0.9;
  for (int i = 0; i < 100; ++i) {
    const double mid = 0.5 * (lo + hi);
    (curvature(mid, s) > 0.0 ? lo : hi) = mid;
  }
  CHECK_THAT(lo, WithinAbs(0.7769, 0.001));
  CHECK_THAT(lo, WithinRel(0.77771339949381676, 1e-9));
  CHECK(3.0 / 5.01 < lo);
  CHECK_THAT(3.0 / 5.01, WithinRel(0.59880239520958084, 1e-15));
}

TEST_CASE("shape classification examples") {
  const ShapeClass inc = classify_shape(reference_model(0.9, 0.9, 0.03), certify_convexity(reference_model(0.9, 0.9, 0.03)));
  CHECK(inc.kind == ShapeKind::Increasing);

  const DerivedModel ref = reference_model();
  const ShapeClass uni = classify_shape(ref, certify_convexity(ref));
  CHECK(uni.kind == ShapeKind::UnimodalMin);
  CHECK(uni.evidence == ShapeEvidence::ConvexityCertificate);
  REQUIRE(uni.q_c.has_value());
  CHECK_THAT(*uni.q_c, WithinRel(*critical_point_beta1(ref), 1e-9));

  const DerivedModel jump = par2_model(5000.0, 1.0, 1.0, 0.22);
  CHECK_FALSE(jump.continuous_at_theta_r);
  CHECK(classify_shape(jump, certify_convexity(jump)).kind == ShapeKind::UnimodalMin);

  const DerivedModel bimodal = reference_model(0.2, 0.05, 0.3);
  const ShapeClass multi = classify_shape(bimodal, certify_convexity(bimodal));
  CHECK(multi.kind == ShapeKind::Multimodal);
  CHECK(multi.sign_changes >= 2);
  CHECK(multi.evidence == ShapeEvidence::NumericScan);

  const DerivedModel dec = decreasing_convex_model();
  CHECK(classify_shape(dec, certify_convexity(dec)).kind == ShapeKind::Decreasing);
}

TEST_CASE("invariance conditions") {
  const DerivedModel inc = reference_model(0.9, 0.9, 0.03);
  const InvarianceResult a = check_invariance(inc, classify_shape(inc, certify_convexity(inc)));
  CHECK(a.invariant);
  REQUIRE(a.conditions.size() == 1);
  CHECK(a.conditions[0].name == "(A1-A2)+ < q_max");

  const DerivedModel dec = decreasing_convex_model();
  const InvarianceResult b = check_invariance(dec, classify_shape(dec, certify_convexity(dec)));
  CHECK(dec.w() <= w_inv(dec));
  CHECK(b.invariant);

  // A turning point whose image falls below theta_l.
  const DerivedModel heavy = reference_model(1.0, 1.0, 0.9);
  ShapeClass forced;
  forced.kind = ShapeKind::UnimodalMin;
  forced.q_c = heavy.theta_r - 1.0;
  REQUIRE(map_f(*forced.q_c, heavy) < heavy.theta_l - 1.0);
  const InvarianceResult c = check_invariance(heavy, forced);
  CHECK_FALSE(c.invariant);
  bool found = false;
  for (const auto& cond : c.conditions) {
    if (cond.name == "f(q_c) > theta_l") {
      found = true;
      CHECK_FALSE(cond.passed);
    }
  }
  CHECK(found);

  const DerivedModel bimodal = reference_model(0.2, 0.05, 0.3);
  CHECK_THROWS_AS(check_invariance(bimodal, classify_shape(bimodal, certify_convexity(bimodal))), Unsupported);
}

TEST_CASE("global stability certificates") {
  const StabilityCertificate inc = certify_global_stability(reference_model(0.9, 0.9, 0.03));
  CHECK(inc.globally_stable == Verdict::Yes);
  CHECK(inc.theorem == Theorem::MonotoneIncreasing);
  CHECK(inc.two_cycle_endpoint_excluded);

  const DerivedModel dec = decreasing_convex_model();
  CHECK_THAT(f_prime_right_theta_l(dec), WithinAbs(-0.5, 1e-12));
  const StabilityCertificate d = certify_global_stability(dec);
  CHECK(d.globally_stable == Verdict::Yes);
  CHECK(d.theorem == Theorem::DecreasingConvex);

  const StabilityCertificate ref = certify_global_stability(reference_model());
  CHECK(ref.shape.kind == ShapeKind::UnimodalMin);
  CHECK(ref.globally_stable != Verdict::No);

  for (auto [alpha, beta] : {std::pair{1.0, 1.0}, {0.5, 0.2}}) {
    const DerivedModel m = reference_model(alpha, beta);
    const double w_bif = w_bifurcation(m).value;
    const StabilityCertificate above = certify_global_stability(with_weight(m, 1.05 * w_bif));
    CHECK(above.globally_stable == Verdict::No);
    for (const auto& c : above.conditions_checked) {
      if (c.name == "f'(q*) >= -1") CHECK_FALSE(c.passed);
    }
  }

  const DerivedModel none = par2_model(3852.0 + 1500.0, 1.0, 1.0);
  const StabilityCertificate n = certify_global_stability(none);
  CHECK(n.globally_stable == Verdict::No);
  CHECK_FALSE(n.equilibrium.has_value());
}

TEST_CASE("two-cycle endpoint caveat") {
  // alpha = beta = 1: theta_l + theta_r = 2 q_min + nu^{-1}(p1 + p2); choose B to close the sum.
  ControlParams ctl = presets::reference_control();
  ctl.w = 0.05;
  const double a1 = 2265.695, a2 = 3852.0;
  double lo = 1500.0, hi = 1600.0;
  auto gap = [&](double b) {
    const DerivedModel m = model_from_constants(a1, a2, b, ctl);
    return m.theta_l + m.theta_r - b;
  };
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    ((gap(mid) > 0.0) == (gap(lo) > 0.0) ? lo : hi) = mid;
  }
  const DerivedModel m = model_from_constants(a1, a2, lo, ctl);
  const StabilityCertificate cert = certify_global_stability(m);
  CHECK_FALSE(cert.two_cycle_endpoint_excluded);
  CHECK(cert.globally_stable == Verdict::Undecided);
}

TEST_CASE("certified models converge from every start") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int certified = 0, counterexamples = 0;
  while (certified < 500) {
    const DerivedModel m = random_model(rng, {.require_fixed_point = true});
    const StabilityCertificate cert = certify_global_stability(m);
    if (cert.globally_stable != Verdict::Yes) continue;
    ++certified;
    CHECK(cert.two_cycle_endpoint_excluded);
    for (const auto& c : cert.conditions_checked) CHECK(c.passed);

    if (cert.theorem == Theorem::UnimodalRightConvex) {
      const double q = cert.equilibrium->q_star;
      const double w3 = std::min((m.theta_r - m.theta_l) / (m.buffer - m.theta_l),
                                 (q - m.theta_l) / (q - m.jump()));
      for (const auto& c : cert.conditions_checked) {
        if (c.name == "w <= w1") CHECK(c.bound >= w3);
      }
    }

    for (int k = 0; k < 64; ++k) {
      double q = m.buffer * unit(rng);
      for (int n = 0; n < 5000; ++n) q = map_f(q, m);
      if (std::fabs(q - cert.equilibrium->q_star) > 1e-6 * m.buffer) {
        ++counterexamples;
        break;
      }
    }
  }
  CHECK(counterexamples == 0);
}

TEST_CASE("proven convexity holds numerically") {
  std::mt19937_64 rng(77);
  int proven = 0;
  for (int i = 0; i < 600; ++i) {
    const DerivedModel m = random_model(rng);
    const ConvexityCertificate c = certify_convexity(m);
    if (c.status != ConvexityStatus::ProvenConvex) continue;
    ++proven;
    const int n = 4096;
    const double hq = (m.theta_r - m.theta_l) / n;
    int negative = 0;
    for (int k = 1; k + 1 < n; ++k) {
      const double q = m.theta_l + k * hq;
      const double second = map_f(q + hq, m) - 2.0 * map_f(q, m) + map_f(q - hq, m);
      if (second < -1e-9) ++negative;
    }
    CAPTURE(m.shape().alpha(), m.shape().beta(), to_string(c.rule));
    CHECK(negative == 0);
  }
  CHECK(proven > 100);
}

TEST_CASE("ratio bound certificate for alpha = 1, beta = 0.01") {
  std::mt19937_64 rng(78);
  std::uniform_real_distribution<double> a1(50.0, 3000.0);
  int certified = 0;
  for (int i = 0; i < 400; ++i) {
    const DerivedModel m = par2_model(a1(rng), 1.0, 0.01);
    const ConvexityCertificate c = certify_convexity(m);
    if (c.status != ConvexityStatus::ProvenConvex) continue;
    ++certified;
    CHECK(c.rule == ConvexityRule::RatioBoundB);
    for (int k = 1; k < 2048; ++k) {
      const double z = m.z_l + (m.z_r - m.z_l) * k / 2048.0;
      CHECK(curvature(z, m.shape()) > 0.0);
    }
  }
  CHECK(certified > 0);
}

TEST_CASE("increasing shape matches the w_mon threshold") {
  std::mt19937_64 rng(79);
  int checked = 0;
  for (int i = 0; i < 3000; ++i) {
    const DerivedModel m = random_model(rng);
    const ConvexityCertificate c = certify_convexity(m);
    if (!c.convex()) continue;
    const ShapeClass s = classify_shape(m, c);
    if (s.kind != ShapeKind::Increasing && s.kind != ShapeKind::Decreasing) continue;
    ++checked;
    CAPTURE(m.w(), w_mon(m), to_string(s.kind));
    CHECK((s.kind == ShapeKind::Increasing) == (m.w() < w_mon(m)));
  }
  CHECK(checked > 100);
}

TEST_CASE("turning point consistency") {
  std::mt19937_64 rng(80);
  int checked = 0;
  for (int i = 0; i < 2000; ++i) {
    const DerivedModel m = random_model(rng);
    const ShapeClass s = classify_shape(m, certify_convexity(m));
    if (s.kind != ShapeKind::UnimodalMin && s.kind != ShapeKind::UnimodalMax) continue;
    REQUIRE(s.q_c.has_value());
    const double q = *s.q_c;
    if (!(q >= m.theta_l && q <= m.theta_r)) {
      CAPTURE(q, m.theta_l, m.theta_r, m.w(), m.shape().alpha(), m.shape().beta());
      FAIL("q_c outside the core");
    }
    // Turning point within rounding of an endpoint.
    if (q == m.theta_l || q == m.theta_r) continue;
    const double z = m.z_of(q);
    const double f2 = f_second(q, m);
    const double expected = 0.5 * (1.0 - m.w()) * m.nu * curvature(z, m.shape());
    // At q_c, 1 - w - f' = 1 - w.
    if (std::fabs(f_prime(q, m)) < 1e-9 * (1.0 - m.w() - f_prime(q, m))) {
      ++checked;
      CHECK_THAT(f2, WithinRel(expected, 1e-8));
    }
  }
  CHECK(checked > 50);
}

TEST_CASE("second derivative has no interval of zeros") {
  std::mt19937_64 rng(81);
  for (int i = 0; i < 300; ++i) {
    const DerivedModel m = random_model(rng);
    const int n = 4096;
    int run = 0, longest = 0;
    for (int k = 1; k < n; ++k) {
      const double q = m.theta_l + (m.theta_r - m.theta_l) * k / n;
      if (!(q > m.theta_l && q < m.theta_r)) continue;
      run = f_second(q, m) == 0.0 ? run + 1 : 0;
      longest = std::max(longest, run);
    }
    CHECK(longest < 16);
  }
}
