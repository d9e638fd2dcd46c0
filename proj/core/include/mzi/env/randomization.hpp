#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string_view>

namespace mzi::env {

using Rng = std::mt19937_64;

inline constexpr int kFramesPerStep = 16;

/// Domain randomization toggles and magnitudes. The beam radius is drawn once
/// per episode; everything else is drawn per environment step.
struct RandomizationConfig {
  bool radius = true;
  double radius_rel = 0.20;

  bool pixel_noise = true;
  double pixel_noise_rel = 0.20;

  bool brightness = true;
  double brightness_rel = 0.30;

  bool phase_noise = true;
  double phase_noise_sigma = 0.5;  ///< rad

  bool cyclic_shift = true;

  bool duty = true;
  double duty_min = 0.7;
  double duty_max = 0.95;
  double duty_nominal = 0.5;

  /// All toggles off.
  static RandomizationConfig disabled();
  /// "on", "off", or "no-<item>" with item one of radius, pixel-noise,
  /// brightness, phase-noise, shift, duty. Throws std::invalid_argument.
  static RandomizationConfig from_name(std::string_view name);

  void validate() const;
};

/// Per-step observation randomization; constant over the 16 frames of a step
/// except the per-frame phase offsets.
struct StepDraws {
  double brightness = 1.0;
  int cyclic_shift = 0;
  double duty = 0.5;
  std::array<double, kFramesPerStep> phase_offsets{};
  std::uint64_t pixel_noise_seed = 0;
};

/// Beam radius for a new episode, mm.
double draw_episode(const RandomizationConfig& cfg, double nominal_radius, Rng& rng);

/// Consumes the same number of variates whatever the toggles, so disabling one
/// randomization leaves the streams of the others untouched.
StepDraws draw_step(const RandomizationConfig& cfg, Rng& rng);

}  // namespace mzi::env
