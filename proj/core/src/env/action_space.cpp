#include "mzi/env/action_space.hpp"

#include <algorithm>
#include <cmath>

namespace mzi::env {

double PhysicalAction::norm() const {
  double sum = 0.0;
  for (double d : deltas) sum += d * d;
  return std::sqrt(sum);
}

double rescale_component(double raw) {
  const double a0 = std::clamp(raw, -1.0, 1.0);
  const double magnitude = std::abs(a0);
  if (magnitude <= kDeadZone) return 0.0;
  return std::copysign(std::pow(kRescaleBase, magnitude - 1.0), a0);
}

NormalizedAction rescale(const RawAction& raw) {
  NormalizedAction out;
  std::transform(raw.values.begin(), raw.values.end(), out.values.begin(), rescale_component);
  return out;
}

PhysicalAction to_physical(const NormalizedAction& a) {
  PhysicalAction out;
  for (std::size_t i = 0; i < kControls; ++i) out.deltas[i] = a.values[i] * kControlBounds[i];
  return out;
}

}  // namespace mzi::env
