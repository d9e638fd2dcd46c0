#include "mzi/env/interferometer_env.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace mzi::env {
namespace {

constexpr double kMaxRewardVisibility = 1.0 - 1e-9;

double clamp_unit(double v) { return std::clamp(v, -1.0, 1.0); }

}  // namespace

void EnvConfig::validate() const {
  geometry.validate();
  randomization.validate();
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (!(fov > 0.0)) throw std::invalid_argument("field of view must be positive");
  if (pixels < 2) throw std::invalid_argument("frames need at least 2x2 pixels");
  if (!(actuator_noise_rel >= 0.0 && actuator_noise_rel < 1.0)) {
    throw std::invalid_argument("actuator noise must lie in [0, 1)");
  }
  if (!(full_scale > 0.0)) throw std::invalid_argument("observation full scale must be positive");
}

double alignment_reward(double visibility) {
  const double v = std::min(visibility, kMaxRewardVisibility);
  return v - std::log(1.0 - v);
}

double sawtooth_phase(double t, double duty) {
  constexpr double kTwoPi = 2.0 * optics::kPi;
  if (t < duty) return kTwoPi * t / duty;
  return kTwoPi * (1.0 - (t - duty) / (1.0 - duty));
}

void rotate_frames(Observation& obs, int shift) {
  const int frames = obs.frames;
  const int s = ((shift % frames) + frames) % frames;
  if (s == 0) return;
  const auto frame_len = static_cast<std::ptrdiff_t>(obs.size) * obs.size;
  // Frame j ends up at (j + s) mod frames: a right rotation by s frames.
  std::rotate(obs.data.begin(), obs.data.end() - s * frame_len, obs.data.end());
}

Observation render_observation(const BeamPair& beams, const StepDraws& draws,
                               const RandomizationConfig& randomization, double fov, int pixels,
                               double full_scale) {
  const optics::InterferenceFields fields(beams.upper, beams.lower, fov, pixels);
  const auto frame_len = static_cast<std::size_t>(pixels) * pixels;

  Observation obs;
  obs.mode = ObsMode::kFrames;
  obs.frames = kFramesPerStep;
  obs.size = pixels;
  obs.data.resize(frame_len * kFramesPerStep);

  Rng noise_rng(draws.pixel_noise_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> intensity(frame_len);
  const double noise_rel = randomization.pixel_noise ? randomization.pixel_noise_rel : 0.0;

  for (int j = 0; j < kFramesPerStep; ++j) {
    const double t = static_cast<double>(j) / kFramesPerStep;
    fields.intensities(sawtooth_phase(t, draws.duty) + draws.phase_offsets[static_cast<std::size_t>(j)],
                       intensity);
    float* out = obs.data.data() + static_cast<std::size_t>(j) * frame_len;
    for (std::size_t px = 0; px < frame_len; ++px) {
      double value = intensity[px] * draws.brightness;
      if (noise_rel > 0.0) value += noise_rel * value * gauss(noise_rng);
      out[px] = static_cast<float>(std::clamp(value / full_scale, 0.0, 1.0));
    }
  }
  rotate_frames(obs, draws.cyclic_shift);
  return obs;
}

VectorObservationScale::VectorObservationScale(const EnvConfig& cfg) {
  const auto& g = cfg.geometry;
  ControlState extreme;
  extreme.values = kControlBounds;
  const optics::Vec2 offset = beam_offset(extreme, g);
  const optics::Vec2 angle = beam_angle(extreme);
  max_offset_x_ = offset.x;
  max_offset_y_ = offset.y;
  max_angle_x_ = angle.x;
  max_angle_y_ = angle.y;

  const double rel = cfg.randomization.radius ? cfg.randomization.radius_rel : 0.0;
  double log_lo = 1e300;
  double log_hi = -1e300;
  double inv_rho = 0.0;
  constexpr int kGrid = 300;
  for (double radius : {g.nominal_radius * (1.0 - rel), g.nominal_radius * (1.0 + rel)}) {
    for (int i = 0; i <= kGrid; ++i) {
      ControlState ctrl;
      ctrl.values[4] = kControlBounds[4] * (2.0 * i / kGrid - 1.0);
      const auto q = derive_beams(ctrl, g, radius).lower.q;
      log_lo = std::min(log_lo, std::log(q.radius()));
      log_hi = std::max(log_hi, std::log(q.radius()));
      inv_rho = std::max(inv_rho, std::abs(q.inverse_curvature()));
    }
  }
  log_radius_mid_ = 0.5 * (log_lo + log_hi);
  log_radius_half_ = std::max(0.5 * (log_hi - log_lo), 1e-12);
  max_inv_curvature_ = std::max(inv_rho, 1e-12);
}

Observation VectorObservationScale::encode(const BeamPair& beams) const {
  const auto& lower = beams.lower;
  const double k = lower.wavenumber();
  Observation obs;
  obs.mode = ObsMode::kVector;
  obs.frames = 1;
  obs.size = 1;
  obs.data = {
      static_cast<float>(clamp_unit(lower.center.x / max_offset_x_)),
      static_cast<float>(clamp_unit(lower.center.y / max_offset_y_)),
      static_cast<float>(clamp_unit(lower.tilt.x / k / max_angle_x_)),
      static_cast<float>(clamp_unit(lower.tilt.y / k / max_angle_y_)),
      static_cast<float>(clamp_unit((std::log(lower.q.radius()) - log_radius_mid_) / log_radius_half_)),
      static_cast<float>(clamp_unit(lower.q.inverse_curvature() / max_inv_curvature_)),
  };
  return obs;
}

InterferometerEnv::InterferometerEnv(EnvConfig cfg)
    : cfg_((cfg.validate(), std::move(cfg))), vector_scale_(cfg_) {}

ResetResult InterferometerEnv::reset(std::uint64_t seed) {
  rng_.seed(seed);
  ControlState ctrl;
  for (std::size_t i = 0; i < kControls; ++i) {
    std::uniform_real_distribution<double> u(-kControlBounds[i], kControlBounds[i]);
    ctrl.values[i] = u(rng_);
  }
  ctrl_ = ctrl;
  radius_ = draw_episode(cfg_.randomization, cfg_.geometry.nominal_radius, rng_);
  steps_ = 0;
  done_ = false;
  started_ = true;
  const StepDraws draws = draw_step(cfg_.randomization, rng_);
  return {observe(draws), make_info(draws, false, false)};
}

ResetResult InterferometerEnv::reset_to(std::uint64_t seed, const ControlState& ctrl) {
  if (!ctrl.within_bounds()) throw BoundsError("reset state outside the deflection bounds");
  reset(seed);
  ctrl_ = ctrl;
  const StepDraws draws = draw_step(cfg_.randomization, rng_);
  return {observe(draws), make_info(draws, false, false)};
}

StepResult InterferometerEnv::step(const PhysicalAction& action) {
  if (!started_ || done_) throw LifecycleError("step called on a finished or unstarted episode");

  ++steps_;
  const StepDraws draws = draw_step(cfg_.randomization, rng_);
  std::normal_distribution<double> jitter(0.0, cfg_.actuator_noise_rel);
  std::array<double, kControls> eta{};
  for (double& e : eta) e = jitter(rng_);

  ControlState proposed = ctrl_;
  bool finite = true;
  for (std::size_t i = 0; i < kControls; ++i) {
    proposed.values[i] += action.deltas[i];
    finite = finite && std::isfinite(action.deltas[i]);
  }

  StepResult result;
  if (!finite || !proposed.within_bounds()) {
    done_ = true;
    result.observation = observe(draws);
    result.reward = kUnsafePenalty;
    result.done = true;
    result.info = make_info(draws, true, false);
    return result;
  }

  for (std::size_t i = 0; i < kControls; ++i) {
    const double scale = cfg_.actuator_noise ? 1.0 + eta[i] : 1.0;
    ctrl_.values[i] =
        std::clamp(ctrl_.values[i] + action.deltas[i] * scale, -kControlBounds[i], kControlBounds[i]);
  }
  const bool truncated = steps_ >= cfg_.horizon;
  done_ = truncated;
  result.info = make_info(draws, false, truncated);
  result.observation = observe(draws);
  result.reward = alignment_reward(result.info.visibility_noiseless);
  result.done = done_;
  return result;
}

BeamPair InterferometerEnv::beams() const { return derive_beams(ctrl_, cfg_.geometry, radius_); }

double InterferometerEnv::visibility() const {
  const BeamPair b = beams();
  return optics::visibility_analytic(b.upper, b.lower);
}

Observation InterferometerEnv::observe(const StepDraws& draws) const {
  const BeamPair b = beams();
  if (cfg_.obs_mode == ObsMode::kVector) return vector_scale_.encode(b);
  return render_observation(b, draws, cfg_.randomization, cfg_.fov, cfg_.pixels, cfg_.full_scale);
}

StepInfo InterferometerEnv::make_info(const StepDraws& draws, bool unsafe, bool truncated) const {
  StepInfo info;
  info.visibility_noiseless = visibility();
  info.control_state = ctrl_;
  info.terminated_unsafe = unsafe;
  info.truncated = truncated;
  info.step = steps_;
  info.draws = draws;
  return info;
}

}  // namespace mzi::env
