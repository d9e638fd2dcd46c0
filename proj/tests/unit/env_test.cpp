#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mzi/env/interferometer_env.hpp"
#include "mzi/optics/interference.hpp"
#include "support/oracles.hpp"

namespace {

using namespace mzi::env;
using mzi::optics::kPi;

EnvConfig quiet_config() {
  EnvConfig cfg;
  cfg.randomization = RandomizationConfig::disabled();
  cfg.actuator_noise = false;
  return cfg;
}

ControlState random_state(std::mt19937_64& rng) {
  ControlState c;
  for (std::size_t i = 0; i < kControls; ++i) {
    c.values[i] = std::uniform_real_distribution<double>(-kControlBounds[i], kControlBounds[i])(rng);
  }
  return c;
}

PhysicalAction delta(std::size_t index, double value) {
  PhysicalAction a;
  a.deltas[index] = value;
  return a;
}

TEST(DeriveBeamsTest, AlignedStateGivesIdenticalBeams) {
  const SetupGeometry g;
  const BeamPair b = derive_beams(ControlState{}, g, g.nominal_radius);
  EXPECT_EQ(b.lower.center.x, 0.0);
  EXPECT_EQ(b.lower.tilt.x, 0.0);
  EXPECT_NEAR(std::abs(b.lower.q.inverse_q() - b.upper.q.inverse_q()), 0.0, 1e-15);
  EXPECT_GT(mzi::optics::visibility_analytic(b.upper, b.lower), 1.0 - 1e-12);
}

TEST(DeriveBeamsTest, ConfocalIdentity) {
  const SetupGeometry g;
  const auto q_in = mzi::optics::ComplexQ::from_radius(g.nominal_radius, mzi::optics::kFlat, g.wavelength);
  const auto lower = derive_beams(ControlState{}, g, g.nominal_radius).lower.q;
  EXPECT_LT(std::abs(lower.radius() - q_in.radius()) / q_in.radius(), 1e-9);
  EXPECT_LT(std::abs(lower.inverse_curvature() - q_in.inverse_curvature()), 1e-12);
}

TEST(DeriveBeamsTest, MirrorTiltMatchesRayTrace) {
  const SetupGeometry g;
  ControlState c;
  c.values[0] = 1e-4;
  const BeamPair b = derive_beams(c, g, g.nominal_radius);
  const double k = b.lower.wavenumber();
  EXPECT_NEAR(b.lower.tilt.x / k, 2e-4, 1e-15);
  EXPECT_NEAR(b.lower.center.x, 0.06, 1e-12);
  const auto ray = mzi::testing::trace_chief_ray(1e-4, 0.0, g.mirror2_to_bs2, g.bs2_to_camera);
  EXPECT_NEAR(b.lower.center.x / ray.offset, 1.0, 1e-7);
  EXPECT_NEAR(b.lower.tilt.x / k / ray.angle, 1.0, 1e-12);
  EXPECT_EQ(b.lower.center.y, 0.0);
}

TEST(DeriveBeamsTest, RandomStatesMatchRayTrace) {
  const SetupGeometry g;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 500; ++i) {
    const ControlState c = random_state(rng);
    const BeamPair b = derive_beams(c, g, g.nominal_radius);
    const double k = b.lower.wavenumber();
    const auto rx = mzi::testing::trace_chief_ray(c.mirror_x(), c.splitter_x(), g.mirror2_to_bs2, g.bs2_to_camera);
    const auto ry = mzi::testing::trace_chief_ray(c.mirror_y(), c.splitter_y(), g.mirror2_to_bs2, g.bs2_to_camera);
    // Small-angle model vs exact tangents differ by ~ L * angle^3 / 3, at most
    // about 5e-5 mm for the extreme tilts.
    EXPECT_NEAR(b.lower.center.x, rx.offset, 1e-4);
    EXPECT_NEAR(b.lower.center.y, ry.offset, 1e-4);
    EXPECT_NEAR(b.lower.tilt.x / k, rx.angle, 1e-14);
    EXPECT_NEAR(b.lower.tilt.y / k, ry.angle, 1e-14);
  }
}

TEST(DeriveBeamsTest, DetectorSweepAgreesWithClosedFormEverywhere) {
  const SetupGeometry g;
  std::mt19937_64 rng(17);
  for (int i = 0; i < 2000; ++i) {
    const ControlState c = random_state(rng);
    const double r = std::uniform_real_distribution<double>(0.568, 0.852)(rng);
    const BeamPair b = derive_beams(c, g, r);
    EXPECT_NEAR(mzi::optics::detector_visibility(b.upper, b.lower),
                mzi::optics::visibility_analytic(b.upper, b.lower), 2e-3);
  }
}

TEST(DeriveBeamsTest, LensOffsetChangesRadius) {
  const SetupGeometry g;
  ControlState c;
  c.values[4] = 7.5;
  const BeamPair b = derive_beams(c, g, g.nominal_radius);
  EXPECT_GT(std::abs(b.lower.q.radius() - b.upper.q.radius()), 1e-3);
  EXPECT_LT(mzi::optics::visibility_analytic(b.upper, b.lower), 1.0);
}

TEST(DeriveBeamsTest, OutOfBoundsRejected) {
  ControlState c;
  c.values[3] = 1e-3;
  EXPECT_THROW(derive_beams(c, SetupGeometry{}, 0.71), BoundsError);
}

TEST(RewardTest, TableValues) {
  EXPECT_EQ(alignment_reward(0.0), 0.0);
  EXPECT_NEAR(alignment_reward(0.5), 0.5 + std::log(2.0), 1e-15);
  EXPECT_NEAR(alignment_reward(0.9), 3.2026, 1e-4);
  EXPECT_NEAR(alignment_reward(0.99), 5.5952, 1e-4);
  EXPECT_TRUE(std::isfinite(alignment_reward(1.0)));
}

TEST(RewardTest, MonotoneInVisibility) {
  double previous = -1.0;
  for (int i = 0; i <= 10000; ++i) {
    const double r = alignment_reward(i / 10000.0 * (1.0 - 1e-9));
    EXPECT_GT(r, previous);
    previous = r;
  }
}

TEST(EnvResetTest, SeedDeterminism) {
  InterferometerEnv a{EnvConfig{}};
  InterferometerEnv b{EnvConfig{}};
  const auto ra = a.reset(42);
  const auto rb = b.reset(42);
  EXPECT_EQ(ra.observation.data, rb.observation.data);
  EXPECT_EQ(a.control_state(), b.control_state());
  const auto rc = b.reset(43);
  EXPECT_NE(ra.observation.data, rc.observation.data);
}

TEST(EnvResetTest, UniformOverBoundsBox) {
  EnvConfig cfg = quiet_config();
  cfg.obs_mode = ObsMode::kVector;
  InterferometerEnv env(cfg);
  constexpr int kResets = 10000;
  std::array<std::vector<double>, kControls> samples;
  for (int i = 0; i < kResets; ++i) {
    const auto r = env.reset(1000 + static_cast<std::uint64_t>(i));
    for (std::size_t k = 0; k < kControls; ++k) samples[k].push_back(env.control_state().values[k]);
    EXPECT_GE(r.info.visibility_noiseless, 0.0);
    EXPECT_LE(r.info.visibility_noiseless, 1.0);
  }
  for (std::size_t k = 0; k < kControls; ++k) {
    const double b = kControlBounds[k];
    const double d = mzi::testing::ks_statistic(samples[k], [b](double x) { return (x + b) / (2.0 * b); });
    EXPECT_LT(d, mzi::testing::ks_critical_1pct(kResets)) << "control " << k;
  }
}

TEST(EnvStepTest, BoundaryViolationTerminates) {
  InterferometerEnv env(quiet_config());
  ControlState start;
  start.values[0] = 2.5e-3;
  env.reset_to(1, start);
  const auto r = env.step(delta(0, 2e-4));
  EXPECT_TRUE(r.done);
  EXPECT_TRUE(r.info.terminated_unsafe);
  EXPECT_EQ(r.reward, -0.04);
  EXPECT_EQ(env.control_state(), start);
  EXPECT_THROW(env.step(PhysicalAction{}), LifecycleError);
}

TEST(EnvStepTest, RandomViolationsLeaveStateUnchanged) {
  std::mt19937_64 rng(77);
  InterferometerEnv env{EnvConfig{}};
  for (int trial = 0; trial < 200; ++trial) {
    env.reset(static_cast<std::uint64_t>(trial));
    const ControlState before = env.control_state();
    const std::size_t k = rng() % kControls;
    PhysicalAction a;
    for (std::size_t i = 0; i < kControls; ++i) {
      a.deltas[i] = std::uniform_real_distribution<double>(-0.1, 0.1)(rng) * kControlBounds[i];
    }
    const double sign = (rng() & 1) ? 1.0 : -1.0;
    a.deltas[k] = sign * kControlBounds[k] - before.values[k] + sign * 1e-6 * kControlBounds[k];
    const auto r = env.step(a);
    EXPECT_TRUE(r.info.terminated_unsafe);
    EXPECT_EQ(r.reward, -0.04);
    EXPECT_EQ(env.control_state(), before);
  }
}

TEST(EnvStepTest, NonFiniteActionIsUnsafe) {
  InterferometerEnv env(quiet_config());
  env.reset(3);
  const auto r = env.step(delta(2, std::nan("")));
  EXPECT_TRUE(r.info.terminated_unsafe);
}

TEST(EnvStepTest, ZeroActionFixedPoint) {
  InterferometerEnv env(quiet_config());
  env.reset(9);
  const double v0 = env.visibility();
  for (int i = 0; i < 10; ++i) {
    const auto r = env.step(PhysicalAction{});
    EXPECT_NEAR(r.info.visibility_noiseless, v0, 1e-12);
  }
}

TEST(EnvStepTest, AlignmentCompleteness) {
  std::mt19937_64 rng(8);
  InterferometerEnv env(quiet_config());
  for (int trial = 0; trial < 100; ++trial) {
    env.reset(static_cast<std::uint64_t>(trial));
    // One or two in-range moves back to the origin.
    PhysicalAction half;
    PhysicalAction rest;
    for (std::size_t i = 0; i < kControls; ++i) {
      half.deltas[i] = -0.5 * env.control_state().values[i];
    }
    env.step(half);
    for (std::size_t i = 0; i < kControls; ++i) rest.deltas[i] = -env.control_state().values[i];
    const auto r = env.step(rest);
    EXPECT_FALSE(r.info.terminated_unsafe);
    EXPECT_GT(r.info.visibility_noiseless, 1.0 - 1e-9);
  }
}

TEST(EnvStepTest, StateNeverLeavesBoxUnderNoise) {
  std::mt19937_64 rng(10);
  EnvConfig cfg;
  cfg.obs_mode = ObsMode::kVector;
  InterferometerEnv env(cfg);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int ep = 0; ep < 30; ++ep) {
    env.reset(static_cast<std::uint64_t>(ep));
    while (!env.done()) {
      PhysicalAction a;
      for (std::size_t i = 0; i < kControls; ++i) a.deltas[i] = u(rng) * kControlBounds[i];
      env.step(a);
      EXPECT_TRUE(env.control_state().within_bounds());
    }
  }
}

TEST(EnvStepTest, EpisodeEndsExactlyAtHorizon) {
  EnvConfig cfg;
  cfg.obs_mode = ObsMode::kVector;
  InterferometerEnv env(cfg);
  env.reset(11);
  for (int t = 1; t <= 100; ++t) {
    const auto r = env.step(PhysicalAction{});
    EXPECT_EQ(r.done, t == 100) << "step " << t;
    EXPECT_EQ(r.info.truncated, t == 100);
    EXPECT_EQ(r.info.step, t);
  }
  EXPECT_THROW(env.step(PhysicalAction{}), LifecycleError);
}

TEST(EnvStepTest, RewardInvariants) {
  std::mt19937_64 rng(12);
  InterferometerEnv env{EnvConfig{}};
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (int ep = 0; ep < 5; ++ep) {
    env.reset(static_cast<std::uint64_t>(ep));
    while (!env.done()) {
      PhysicalAction a;
      for (std::size_t i = 0; i < kControls; ++i) a.deltas[i] = u(rng) * kControlBounds[i];
      const auto r = env.step(a);
      if (r.info.terminated_unsafe) {
        EXPECT_TRUE(r.done);
        EXPECT_EQ(r.reward, -0.04);
      } else {
        EXPECT_EQ(r.reward, alignment_reward(r.info.visibility_noiseless));
        EXPECT_GE(r.reward, 0.0);
      }
    }
  }
}

TEST(ObservationTest, ShapeAndRange) {
  InterferometerEnv env{EnvConfig{}};
  const auto r = env.reset(4);
  EXPECT_EQ(r.observation.frames, 16);
  EXPECT_EQ(r.observation.size, 64);
  ASSERT_EQ(r.observation.data.size(), 16u * 64u * 64u);
  for (float v : r.observation.data) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(ObservationTest, AlignedSpotBlinksWithSawtooth) {
  const SetupGeometry g;
  const BeamPair beams = derive_beams(ControlState{}, g, g.nominal_radius);
  const auto rand = RandomizationConfig::disabled();
  Rng rng(1);
  const StepDraws draws = draw_step(rand, rng);
  const Observation obs = render_observation(beams, draws, rand, 6.0, 64, 4.0);
  const double pitch = 6.0 / 64.0;
  for (int j = 0; j < 16; ++j) {
    const double phi = sawtooth_phase(j / 16.0, 0.5);
    const auto frame = obs.frame(j);
    for (int iy = 0; iy < 64; iy += 7) {
      for (int ix = 0; ix < 64; ix += 5) {
        const double x = -3.0 + (ix + 0.5) * pitch;
        const double y = -3.0 + (iy + 0.5) * pitch;
        const double envelope = std::exp(-2.0 * (x * x + y * y) / (0.71 * 0.71));
        const double expected = (2.0 + 2.0 * std::cos(phi)) * envelope / 4.0;
        EXPECT_NEAR(frame[static_cast<std::size_t>(iy * 64 + ix)], expected, 1e-6);
      }
    }
  }
}

TEST(ObservationTest, PhaseNoiseFollowsDrawnOffsets) {
  const SetupGeometry g;
  const BeamPair beams = derive_beams(ControlState{}, g, g.nominal_radius);
  auto rand = RandomizationConfig::disabled();
  rand.phase_noise = true;
  Rng rng(2);
  const StepDraws draws = draw_step(rand, rng);
  const Observation noisy = render_observation(beams, draws, rand, 6.0, 64, 4.0);
  const Observation smooth =
      render_observation(beams, draw_step(RandomizationConfig::disabled(), rng), RandomizationConfig::disabled(), 6.0, 64, 4.0);
  const std::size_t centre = 32 * 64 + 32;
  const double pitch = 6.0 / 64.0;
  const double env_c = std::exp(-2.0 * 2.0 * (0.5 * pitch) * (0.5 * pitch) / (0.71 * 0.71));
  double deviation = 0.0;
  for (int j = 0; j < 16; ++j) {
    const double phi = sawtooth_phase(j / 16.0, 0.5) + draws.phase_offsets[static_cast<std::size_t>(j)];
    EXPECT_NEAR(noisy.frame(j)[centre], (2.0 + 2.0 * std::cos(phi)) * env_c / 4.0, 1e-6);
    deviation += std::abs(noisy.frame(j)[centre] - smooth.frame(j)[centre]);
  }
  EXPECT_GT(deviation, 1e-2);
}

TEST(ObservationTest, RotationComposes) {
  Observation obs;
  obs.frames = 16;
  obs.size = 1;
  for (int j = 0; j < 16; ++j) obs.data.push_back(static_cast<float>(j));
  for (int s1 = 0; s1 < 16; ++s1) {
    for (int s2 = 0; s2 < 16; s2 += 3) {
      Observation twice = obs;
      rotate_frames(twice, s1);
      rotate_frames(twice, s2);
      Observation once = obs;
      rotate_frames(once, (s1 + s2) % 16);
      EXPECT_EQ(twice.data, once.data);
    }
  }
  Observation shifted = obs;
  rotate_frames(shifted, 3);
  EXPECT_EQ(shifted.data[3], 0.0f);
}

TEST(ObservationTest, SawtoothShape) {
  EXPECT_EQ(sawtooth_phase(0.0, 0.7), 0.0);
  EXPECT_NEAR(sawtooth_phase(0.35, 0.7), kPi, 1e-12);
  EXPECT_NEAR(sawtooth_phase(0.85, 0.7), kPi, 1e-12);
  EXPECT_NEAR(sawtooth_phase(0.7, 0.7), 2.0 * kPi, 1e-12);
}

TEST(ObservationTest, VectorModeNormalised) {
  EnvConfig cfg;
  cfg.obs_mode = ObsMode::kVector;
  InterferometerEnv env(cfg);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto r = env.reset(seed);
    ASSERT_EQ(r.observation.data.size(), kVectorObsSize);
    for (float v : r.observation.data) {
      EXPECT_GE(v, -1.0f);
      EXPECT_LE(v, 1.0f);
    }
  }
  InterferometerEnv quiet([] {
    EnvConfig c = quiet_config();
    c.obs_mode = ObsMode::kVector;
    return c;
  }());
  const auto aligned = quiet.reset_to(0, ControlState{});
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(aligned.observation.data[i], 0.0f);
  EXPECT_EQ(aligned.observation.data[5], 0.0f);
}

TEST(EnvConfigTest, RejectsInvalid) {
  EnvConfig cfg;
  cfg.horizon = 0;
  EXPECT_THROW(InterferometerEnv{cfg}, std::invalid_argument);
}

}  // namespace
