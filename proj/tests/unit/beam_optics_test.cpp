#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mzi/optics/gaussian_beam.hpp"
#include "mzi/optics/interference.hpp"
#include "support/oracles.hpp"

namespace {

using namespace mzi::optics;
using mzi::testing::PlainBeam;

constexpr double kLambda = 632e-6;
constexpr double kR = 0.71;
constexpr double kFov = 6.0;
constexpr int kPixels = 64;

GaussianBeam collimated(double radius = kR) { return GaussianBeam{ComplexQ::from_radius(radius, kFlat, kLambda)}; }

PlainBeam plain(const GaussianBeam& b) {
  return {b.q.radius(), b.q.inverse_curvature(), b.center.x, b.center.y, b.tilt.x, b.tilt.y, b.amplitude};
}

TEST(ComplexQTest, PaperRadiusAndWavelength) {
  const auto q = ComplexQ::from_radius(0.71, kFlat, kLambda);
  EXPECT_EQ(q.inverse_q().real(), 0.0);
  // lambda / (pi r^2) = 632e-6 / (pi * 0.5041)
  EXPECT_NEAR(q.inverse_q().imag(), -3.9907e-4, 1e-8);
  EXPECT_NEAR(q.radius(), 0.71, 1e-14);
}

TEST(ComplexQTest, CollapsesToUnitRatio) {
  const auto q = ComplexQ::from_radius(1.0, kFlat, kPi * 1e-3);
  EXPECT_DOUBLE_EQ(q.inverse_q().imag(), -1e-3);
}

TEST(ComplexQTest, RoundTripsRadiusAndCurvature) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> radius(0.05, 5.0);
  std::uniform_real_distribution<double> curvature(50.0, 1e5);
  std::bernoulli_distribution flip(0.5);
  for (int i = 0; i < 100; ++i) {
    const double r = radius(rng);
    const double rho = flip(rng) ? curvature(rng) : -curvature(rng);
    const auto q = ComplexQ::from_radius(r, rho, kLambda);
    EXPECT_NEAR(q.radius() / r, 1.0, 1e-12);
    EXPECT_NEAR(q.curvature() / rho, 1.0, 1e-12);
  }
}

TEST(ComplexQTest, RejectsNonPositiveRadius) {
  EXPECT_THROW(ComplexQ::from_radius(0.0, kFlat, kLambda), DomainError);
  EXPECT_THROW(ComplexQ::from_radius(-1.0, kFlat, kLambda), DomainError);
  EXPECT_THROW(ComplexQ::from_radius(1.0, 0.0, kLambda), DomainError);
}

TEST(AbcdTest, ElementaryMatrices) {
  const Abcd f0 = abcd_free(0.0);
  EXPECT_EQ(f0.a, 1.0);
  EXPECT_EQ(f0.b, 0.0);
  EXPECT_EQ(f0.c, 0.0);
  EXPECT_EQ(f0.d, 1.0);
  const Abcd lens = abcd_lens(50.0);
  EXPECT_DOUBLE_EQ(lens.c, -0.02);
  EXPECT_THROW(abcd_lens(0.0), DomainError);
}

TEST(AbcdTest, ConfocalTelescopeKeepsCollimation) {
  // lens - 2f - lens alone is [[-1, 2f], [0, -1]]; wrapped in f of free space
  // on each side the full 4f segment is -identity.
  const Abcd core = abcd_compose(abcd_lens(50.0), abcd_compose(abcd_free(100.0), abcd_lens(50.0)));
  EXPECT_NEAR(core.a, -1.0, 1e-15);
  EXPECT_NEAR(core.c, 0.0, 1e-15);
  const Abcd full = abcd_compose(abcd_free(50.0), abcd_compose(core, abcd_free(50.0)));
  EXPECT_NEAR(full.b, 0.0, 1e-12);
  const auto in = collimated().q;
  const auto out = propagate(in, full);
  EXPECT_LT(std::abs(out.inverse_curvature()), 1e-15);
  EXPECT_NEAR(out.radius() / kR, 1.0, 1e-12);
}

TEST(AbcdTest, DeterminantOfPairsIsOne) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(-500.0, 500.0);
  std::uniform_real_distribution<double> focal(10.0, 500.0);
  std::bernoulli_distribution pick(0.5);
  auto element = [&] { return pick(rng) ? abcd_lens(pick(rng) ? focal(rng) : -focal(rng)) : abcd_free(dist(rng)); };
  for (int trial = 0; trial < 200; ++trial) {
    EXPECT_NEAR(abcd_compose(element(), element()).det(), 1.0, 1e-12);
  }
}

TEST(AbcdTest, DeterminantPreservedUnderLongChains) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> dist(0.0, 300.0);
  std::uniform_real_distribution<double> focal(20.0, 300.0);
  for (int trial = 0; trial < 50; ++trial) {
    Abcd m;
    for (int k = 0; k < 10; ++k) m = abcd_compose(abcd_lens(focal(rng)), abcd_compose(abcd_free(dist(rng)), m));
    const double scale = std::max(std::abs(m.a * m.d), std::abs(m.b * m.c));
    EXPECT_NEAR(m.det(), 1.0, 1e-13 * std::max(1.0, scale));
  }
}

TEST(PropagateTest, FreeZeroIsIdentity) {
  const auto q = ComplexQ::from_radius(0.5, 300.0, kLambda);
  const auto out = propagate(q, abcd_free(0.0));
  EXPECT_EQ(out.inverse_q(), q.inverse_q());
}

// Over 100 mm the radius grows by sqrt(1 + (d/zR)^2) - 1 ~ 8e-4, not less.
TEST(PropagateTest, CollimatedOverHundredMillimetres) {
  const double d = 100.0;
  const double z_rayleigh = kPi * kR * kR / kLambda;
  const auto out = propagate(collimated().q, abcd_free(d));
  EXPECT_NEAR(out.radius() / kR, std::sqrt(1.0 + (d / z_rayleigh) * (d / z_rayleigh)), 1e-12);
  EXPECT_LT(out.radius() / kR - 1.0, 1e-3);
  EXPECT_NEAR(out.curvature(), d + z_rayleigh * z_rayleigh / d, 1e-9 * out.curvature());
  EXPECT_GT(out.curvature(), 100.0 * d);
}

TEST(PropagateTest, CompositionLaw) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(0.0, 300.0);
  std::uniform_real_distribution<double> f(20.0, 200.0);
  for (int i = 0; i < 50; ++i) {
    const auto q = ComplexQ::from_radius(0.3 + 0.01 * i, 1000.0 + i, kLambda);
    const Abcd m1 = abcd_compose(abcd_free(d(rng)), abcd_lens(f(rng)));
    const Abcd m2 = abcd_compose(abcd_lens(-f(rng)), abcd_free(d(rng)));
    const auto stepwise = propagate(propagate(q, m1), m2);
    const auto joint = propagate(q, abcd_compose(m2, m1));
    EXPECT_NEAR(std::abs(stepwise.inverse_q() - joint.inverse_q()) / std::abs(joint.inverse_q()), 0.0, 1e-10);
  }
}

TEST(PropagateTest, SingularMapReported) {
  const Abcd degenerate{0.0, 0.0, 1.0, 0.0};
  EXPECT_THROW(propagate(collimated().q, degenerate), FocalSingularity);
}

// A collimated beam behind a thin lens has 1/rho = 1/f at z = f; the flat
// waist forms slightly earlier, at f / (1 + (f/zR)^2). Cross-checked with a
// brute-force Fresnel integral of the field behind the lens.
TEST(PropagateTest, FocusMatchesFresnelIntegral) {
  const double f = 50.0;
  const double k = 2.0 * kPi / kLambda;
  const auto behind_lens = propagate(collimated().q, abcd_lens(f));
  const auto at_f = propagate(behind_lens, abcd_free(f));

  auto field = [&](double x) { return std::exp(-x * x / (kR * kR)) * std::polar(1.0, 0.5 * k * x * x / f); };
  const double probe = 0.5 * at_f.radius();
  const auto u0 = mzi::testing::fresnel_1d(field, k, f, 0.0, 4.0, 200000);
  const auto u1 = mzi::testing::fresnel_1d(field, k, f, probe, 4.0, 200000);
  const double fresnel_inv_rho = -2.0 * std::arg(u1 / u0) / (k * probe * probe);
  EXPECT_NEAR(fresnel_inv_rho, at_f.inverse_curvature(), 1e-3 * std::abs(at_f.inverse_curvature()));
  const double fresnel_radius_ratio = std::abs(u1 / u0);
  EXPECT_NEAR(fresnel_radius_ratio, std::exp(-0.25), 1e-3);

  const double z_rayleigh = kPi * kR * kR / kLambda;
  const double waist = f / (1.0 + (f / z_rayleigh) * (f / z_rayleigh));
  EXPECT_LT(std::abs(propagate(behind_lens, abcd_free(waist)).inverse_curvature()), 1e-9);
}

TEST(RenderFrameTest, IdenticalBeamsInterfere) {
  const auto beam = collimated();
  const Frame bright = render_frame(beam, beam, 0.0, kFov, kPixels);
  const Frame dark = render_frame(beam, beam, kPi, kFov, kPixels);
  const Frame single = render_frame(beam, GaussianBeam{beam.q, {}, {}, 1e-300}, 0.0, kFov, kPixels);
  ASSERT_EQ(bright.pixels.size(), 64u * 64u);
  for (std::size_t i = 0; i < bright.pixels.size(); ++i) {
    EXPECT_NEAR(bright.pixels[i], 4.0 * single.pixels[i], 1e-12);
    EXPECT_LT(dark.pixels[i], 1e-20);
    EXPECT_GE(bright.pixels[i], 0.0);
  }
}

TEST(RenderFrameTest, FarOffsetBeamDoesNotOverlapCentre) {
  const auto upper = collimated();
  auto lower = collimated();
  lower.center.x = 5.0 * kR;
  auto alone = collimated();
  alone.amplitude = 1e-300;
  for (double phase : {0.0, 1.0, 2.5}) {
    const Frame f = render_frame(upper, lower, phase, 10.0, kPixels);
    const Frame u = render_frame(upper, alone, phase, 10.0, kPixels);
    EXPECT_NEAR(f.at(32, 32), u.at(32, 32), 1e-6);
  }
}

TEST(VisibilitySweepTest, Extremes) {
  const std::vector<SweepSample> flat{{0.0, 5.0}, {1.0, 5.0}, {2.0, 5.0}};
  EXPECT_EQ(visibility_from_sweep(flat), 0.0);
  const std::vector<SweepSample> full{{0.0, 0.0}, {1.0, 10.0}};
  EXPECT_EQ(visibility_from_sweep(full), 1.0);
  const std::vector<SweepSample> dark{{0.0, 0.0}, {1.0, 0.0}};
  EXPECT_THROW(visibility_from_sweep(dark), UndefinedVisibility);
  const std::vector<SweepSample> one{{0.0, 1.0}};
  EXPECT_THROW(visibility_from_sweep(one), DomainError);
}

TEST(VisibilityTest, OffsetMatchesGaussianOverlapAndQuadrature) {
  const double k = 2.0 * kPi / kLambda;
  for (double d : {0.0, 0.25 * kR, 0.5 * kR, kR, 1.5 * kR}) {
    const auto upper = collimated();
    auto lower = collimated();
    lower.center.x = d;
    const double expected = std::exp(-d * d / (2.0 * kR * kR));
    const double quad = mzi::testing::quadrature_visibility(plain(upper), plain(lower), k, 6.0, 400);
    EXPECT_NEAR(quad, expected, 1e-9);
    EXPECT_NEAR(visibility_analytic(upper, lower), expected, 1e-12);
    EXPECT_NEAR(visibility_dense_sweep(upper, lower, kFov, kPixels), expected, 1e-3);
  }
}

TEST(VisibilityTest, TiltMatchesFourierAndQuadrature) {
  const double k = 2.0 * kPi / kLambda;
  for (double kx : {0.0, 1.0, 2.0, 3.0, 5.0}) {
    const auto upper = collimated();
    auto lower = collimated();
    lower.tilt.x = kx;
    const double expected = std::exp(-kx * kx * kR * kR / 8.0);
    const double quad = mzi::testing::quadrature_visibility(plain(upper), plain(lower), k, 6.0, 400);
    EXPECT_NEAR(quad, expected, 1e-9);
    EXPECT_NEAR(visibility_analytic(upper, lower), expected, 1e-12);
    EXPECT_NEAR(visibility_dense_sweep(upper, lower, kFov, kPixels), expected, 1e-3);
  }
}

TEST(VisibilityTest, SweepAgreesWithClosedFormOnRandomPairs) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> radius(0.55, 0.9);
  std::uniform_real_distribution<double> offset(-0.8, 0.8);
  std::uniform_real_distribution<double> tilt(-6.0, 6.0);
  std::uniform_real_distribution<double> inv_rho(-3e-3, 3e-3);
  std::uniform_real_distribution<double> amp(0.7, 1.3);
  const double k = 2.0 * kPi / kLambda;
  for (int i = 0; i < 200; ++i) {
    GaussianBeam upper{ComplexQ::from_radius(radius(rng), kFlat, kLambda)};
    const double rl = radius(rng);
    GaussianBeam lower{ComplexQ({inv_rho(rng), -kLambda / (kPi * rl * rl)}, kLambda)};
    lower.center = {offset(rng), offset(rng)};
    lower.tilt = {tilt(rng), tilt(rng)};
    upper.amplitude = amp(rng);
    lower.amplitude = amp(rng);
    const double analytic = visibility_analytic(upper, lower);
    EXPECT_NEAR(visibility_dense_sweep(upper, lower, kFov, kPixels), analytic, 1e-3) << "pair " << i;
    if (i < 10) {
      EXPECT_NEAR(mzi::testing::quadrature_visibility(plain(upper), plain(lower), k, 6.0, 400), analytic, 1e-8);
    }
  }
}

TEST(VisibilityTest, MonotoneInOffset) {
  double previous = 2.0;
  for (int i = 0; i <= 60; ++i) {
    auto lower = collimated();
    lower.center.x = 3.0 * kR * i / 60.0;
    const double v = visibility_dense_sweep(collimated(), lower, kFov, kPixels);
    EXPECT_LE(v, previous + 1e-12);
    previous = v;
  }
}

TEST(InterferenceFieldsTest, PeriodicAndEnergyConserving) {
  auto lower = collimated(0.65);
  lower.center = {0.2, -0.1};
  lower.tilt = {1.5, -0.7};
  const InterferenceFields fields(collimated(), lower, kFov, kPixels);
  for (double phase : {0.0, 0.7, 2.0, 5.5}) {
    const double a = fields.frame(phase).total();
    const double b = fields.frame(phase + 2.0 * kPi).total();
    EXPECT_NEAR(a, b, 1e-9 * a);
  }
  constexpr int kPhases = 256;
  double mean = 0.0;
  for (int j = 0; j < kPhases; ++j) mean += fields.frame(2.0 * kPi * j / kPhases).total();
  mean /= kPhases;
  const double expected = power(collimated()) + power(lower);
  EXPECT_NEAR(mean / expected, 1.0, 1e-6);
}

TEST(SensorTotalsTest, FactoredSumEqualsRenderedFrame) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    auto lower = collimated(0.5 + 0.4 * std::abs(u(rng)));
    lower.center = {u(rng), u(rng)};
    lower.tilt = {4.0 * u(rng), 4.0 * u(rng)};
    lower.q = propagate(lower.q, abcd_free(200.0 * u(rng)));
    const InterferenceFields fields(collimated(), lower, kFov, kPixels);
    const SensorTotals totals(collimated(), lower, kFov, kPixels);
    for (double phase : {0.0, 1.3, 4.0}) {
      const double expected = fields.frame(phase).total();
      EXPECT_NEAR(totals.total(phase), expected, 1e-10 * (totals.upper_power() + totals.lower_power()));
    }
  }
}

TEST(DetectorVisibilityTest, MatchesClosedFormWhereCameraCannot) {
  // Steep relative tilt: fringes finer than the camera pitch, and an offset
  // that pushes the lower beam past the camera edge.
  auto lower = collimated(0.3);
  lower.center = {2.8, -0.4};
  lower.tilt = {60.0, -20.0};
  const double exact = visibility_analytic(collimated(), lower);
  EXPECT_NEAR(detector_visibility(collimated(), lower), exact, 2e-3 * std::max(exact, 1e-3));
  auto aligned = collimated();
  EXPECT_NEAR(detector_visibility(aligned, aligned), 1.0, 1e-9);
}

TEST(GaussianBeamTest, RejectsNonParaxialTilt) {
  auto beam = collimated();
  beam.tilt.x = 0.06 * beam.wavenumber();
  EXPECT_THROW(validate(beam), DomainError);
  beam.tilt.x = 0.0;
  beam.amplitude = 2.5;
  EXPECT_THROW(validate(beam), DomainError);
}

}  // namespace
