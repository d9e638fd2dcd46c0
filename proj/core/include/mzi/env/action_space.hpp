#pragma once

#include <array>

#include "mzi/env/control_state.hpp"

namespace mzi::env {

/// Policy output in [-1, 1] per control; what the replay buffer stores.
struct RawAction {
  std::array<double, kControls> values{};
};

/// Rescaled action in [-1, 1], still in units of the deflection bounds.
struct NormalizedAction {
  std::array<double, kControls> values{};
};

/// Deltas applied to the control state: rad, rad, rad, rad, mm.
struct PhysicalAction {
  std::array<double, kControls> deltas{};
  double norm() const;
};

inline constexpr double kDeadZone = 0.17;
inline constexpr double kRescaleBase = 1000.0;

/// Exponential rescaling with a dead zone: |a0| <= 0.17 maps to exactly 0,
/// otherwise sign(a0) * 1000^(|a0| - 1). Inputs are clamped to [-1, 1].
double rescale_component(double raw);
NormalizedAction rescale(const RawAction& raw);

/// Scales each component by its deflection bound.
PhysicalAction to_physical(const NormalizedAction& a);

inline PhysicalAction raw_to_physical(const RawAction& raw) { return to_physical(rescale(raw)); }

}  // namespace mzi::env
