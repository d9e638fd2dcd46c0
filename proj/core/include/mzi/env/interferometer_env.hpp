#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "mzi/env/action_space.hpp"
#include "mzi/env/control_state.hpp"
#include "mzi/env/randomization.hpp"
#include "mzi/optics/interference.hpp"

namespace mzi::env {

enum class ObsMode { kFrames, kVector };

inline constexpr std::size_t kVectorObsSize = 6;
inline constexpr double kUnsafePenalty = -0.04;

/// Stepping a finished (or never reset) episode.
class LifecycleError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Either a stack of camera frames (frames x size x size, acquisition order,
/// values in [0, 1]) or the normalised 6-vector
/// (x0, y0, alpha_x, alpha_y, r_lower, 1/rho_lower) in [-1, 1].
struct Observation {
  ObsMode mode = ObsMode::kFrames;
  int frames = 0;
  int size = 0;
  std::vector<float> data;

  std::span<const float> frame(int index) const {
    const auto n = static_cast<std::size_t>(size) * size;
    return std::span<const float>(data).subspan(static_cast<std::size_t>(index) * n, n);
  }
};

struct EnvConfig {
  SetupGeometry geometry{};
  RandomizationConfig randomization{};
  int horizon = 100;
  double fov = 6.0;  ///< mm
  int pixels = 64;
  ObsMode obs_mode = ObsMode::kFrames;
  bool actuator_noise = true;
  double actuator_noise_rel = 0.04;
  /// Observation full scale in units of the peak single-beam intensity.
  double full_scale = 4.0;

  void validate() const;
};

struct StepInfo {
  double visibility_noiseless = 0.0;
  ControlState control_state{};
  bool terminated_unsafe = false;
  bool truncated = false;  ///< horizon reached
  int step = 0;
  StepDraws draws{};
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

struct ResetResult {
  Observation observation;
  StepInfo info;
};

/// Eq.-(4)-style alignment reward V - ln(1 - V), with V capped just below 1.
double alignment_reward(double visibility);

/// Piezo phase of an asymmetric sawtooth at normalised time t in [0, 1):
/// rises 0 -> 2pi over `duty`, falls back over the remainder.
double sawtooth_phase(double t, double duty);

/// Moves frame j to position (j + shift) mod frames.
void rotate_frames(Observation& obs, int shift);

/// 16 frames over one piezo period with the step's randomization applied.
Observation render_observation(const BeamPair& beams, const StepDraws& draws,
                               const RandomizationConfig& randomization, double fov, int pixels,
                               double full_scale);

/// Normalisation of the lower-beam state to the vector observation.
class VectorObservationScale {
 public:
  explicit VectorObservationScale(const EnvConfig& cfg);
  Observation encode(const BeamPair& beams) const;

 private:
  double max_offset_x_;
  double max_offset_y_;
  double max_angle_x_;
  double max_angle_y_;
  double log_radius_mid_;
  double log_radius_half_;
  double max_inv_curvature_;
};

/// The alignment POMDP: reset misaligns the lower arm, each step applies a
/// physical action and returns the observation and reward.
class InterferometerEnv {
 public:
  explicit InterferometerEnv(EnvConfig cfg);

  const EnvConfig& config() const { return cfg_; }

  ResetResult reset(std::uint64_t seed);
  /// Resets to a given control state (used by replays and manual sessions).
  ResetResult reset_to(std::uint64_t seed, const ControlState& ctrl);
  StepResult step(const PhysicalAction& action);

  const ControlState& control_state() const { return ctrl_; }
  double episode_radius() const { return radius_; }
  int step_count() const { return steps_; }
  bool done() const { return done_; }
  BeamPair beams() const;
  double visibility() const;

 private:
  Observation observe(const StepDraws& draws) const;
  StepInfo make_info(const StepDraws& draws, bool unsafe, bool truncated) const;

  EnvConfig cfg_;
  VectorObservationScale vector_scale_;
  Rng rng_;
  ControlState ctrl_{};
  double radius_ = 0.0;
  int steps_ = 0;
  bool done_ = true;
  bool started_ = false;
};

}  // namespace mzi::env
