#include "mzi/env/control_state.hpp"

#include <cmath>

namespace mzi::env {

bool ControlState::within_bounds() const {
  for (std::size_t i = 0; i < kControls; ++i) {
    if (!(std::abs(values[i]) <= kControlBounds[i])) return false;
  }
  return true;
}

void SetupGeometry::validate() const {
  if (!(bs1_to_mirror2 > 0 && mirror2_to_bs2 > 0 && bs2_to_camera > 0 && bs1_to_lens1 > 0 &&
        focal_length > 0 && wavelength > 0 && nominal_radius > 0)) {
    throw std::invalid_argument("setup distances, wavelength and radius must be positive");
  }
  if (!(lens2_to_camera() > kControlBounds[4])) {
    throw std::invalid_argument("lens 2 travel range does not fit before the camera");
  }
}

optics::Abcd telescope(const SetupGeometry& geom, double lens_offset) {
  using namespace optics;
  const Abcd lens = abcd_lens(geom.focal_length);
  return abcd_compose(lens, abcd_compose(abcd_free(2.0 * geom.focal_length + lens_offset), lens));
}

optics::Abcd lower_arm_path(const SetupGeometry& geom, double lens_offset) {
  using namespace optics;
  return abcd_compose(abcd_free(geom.lens2_to_camera() - lens_offset),
                      abcd_compose(telescope(geom, lens_offset), abcd_free(geom.bs1_to_lens1)));
}

optics::Vec2 beam_offset(const ControlState& ctrl, const SetupGeometry& geom) {
  const double mirror_lever = geom.mirror2_to_bs2 + geom.bs2_to_camera;
  const double splitter_lever = geom.bs2_to_camera;
  return {2.0 * ctrl.mirror_x() * mirror_lever + 2.0 * ctrl.splitter_x() * splitter_lever,
          2.0 * ctrl.mirror_y() * mirror_lever + 2.0 * ctrl.splitter_y() * splitter_lever};
}

optics::Vec2 beam_angle(const ControlState& ctrl) {
  return {2.0 * (ctrl.mirror_x() + ctrl.splitter_x()), 2.0 * (ctrl.mirror_y() + ctrl.splitter_y())};
}

BeamPair derive_beams(const ControlState& ctrl, const SetupGeometry& geom, double episode_radius) {
  if (!ctrl.within_bounds()) {
    throw BoundsError("control state outside the deflection bounds");
  }
  using namespace optics;
  const ComplexQ reference = ComplexQ::from_radius(episode_radius, kFlat, geom.wavelength);

  // Relative map from the nominal arm to the displaced one; identity at
  // lens_offset = 0 up to rounding.
  const Abcd relative =
      abcd_compose(lower_arm_path(geom, ctrl.lens_offset()), lower_arm_path(geom, 0.0).inverse());

  GaussianBeam upper{reference};
  GaussianBeam lower{propagate(reference, relative)};
  const double k = upper.wavenumber();
  const Vec2 angle = beam_angle(ctrl);
  lower.center = beam_offset(ctrl, geom);
  lower.tilt = {k * angle.x, k * angle.y};
  return {upper, lower};
}

}  // namespace mzi::env
