#include "mzi/env/randomization.hpp"

#include <stdexcept>
#include <string>

namespace mzi::env {

RandomizationConfig RandomizationConfig::disabled() {
  RandomizationConfig cfg;
  cfg.radius = false;
  cfg.pixel_noise = false;
  cfg.brightness = false;
  cfg.phase_noise = false;
  cfg.cyclic_shift = false;
  cfg.duty = false;
  return cfg;
}

RandomizationConfig RandomizationConfig::from_name(std::string_view name) {
  if (name == "on") return {};
  if (name == "off") return disabled();
  RandomizationConfig cfg;
  if (name == "no-radius") {
    cfg.radius = false;
  } else if (name == "no-pixel-noise") {
    cfg.pixel_noise = false;
  } else if (name == "no-brightness") {
    cfg.brightness = false;
  } else if (name == "no-phase-noise") {
    cfg.phase_noise = false;
  } else if (name == "no-shift") {
    cfg.cyclic_shift = false;
  } else if (name == "no-duty") {
    cfg.duty = false;
  } else {
    throw std::invalid_argument("unknown randomization setting '" + std::string(name) + "'");
  }
  return cfg;
}

void RandomizationConfig::validate() const {
  auto relative = [](double v) { return v >= 0.0 && v < 1.0; };
  if (!relative(radius_rel) || !relative(pixel_noise_rel) || !relative(brightness_rel)) {
    throw std::invalid_argument("relative randomization magnitudes must lie in [0, 1)");
  }
  if (!(phase_noise_sigma >= 0.0)) throw std::invalid_argument("phase noise sigma must be >= 0");
  if (!(duty_min > 0.0 && duty_min <= duty_max && duty_max < 1.0)) {
    throw std::invalid_argument("duty range must be a sub-interval of (0, 1)");
  }
  if (!(duty_nominal > 0.0 && duty_nominal < 1.0)) {
    throw std::invalid_argument("nominal duty must lie in (0, 1)");
  }
}

double draw_episode(const RandomizationConfig& cfg, double nominal_radius, Rng& rng) {
  std::uniform_real_distribution<double> u(1.0 - cfg.radius_rel, 1.0 + cfg.radius_rel);
  const double factor = u(rng);
  return cfg.radius ? nominal_radius * factor : nominal_radius;
}

StepDraws draw_step(const RandomizationConfig& cfg, Rng& rng) {
  std::uniform_real_distribution<double> brightness(1.0 - cfg.brightness_rel, 1.0 + cfg.brightness_rel);
  std::uniform_int_distribution<int> shift(0, kFramesPerStep - 1);
  std::uniform_real_distribution<double> duty(cfg.duty_min, cfg.duty_max);
  std::normal_distribution<double> phase(0.0, 1.0);

  StepDraws d;
  d.brightness = brightness(rng);
  d.cyclic_shift = shift(rng);
  d.duty = duty(rng);
  for (double& p : d.phase_offsets) p = cfg.phase_noise_sigma * phase(rng);
  d.pixel_noise_seed = rng();

  if (!cfg.brightness) d.brightness = 1.0;
  if (!cfg.cyclic_shift) d.cyclic_shift = 0;
  if (!cfg.duty) d.duty = cfg.duty_nominal;
  if (!cfg.phase_noise) d.phase_offsets.fill(0.0);
  return d;
}

}  // namespace mzi::env
