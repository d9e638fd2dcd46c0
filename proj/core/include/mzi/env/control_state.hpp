#pragma once

#include <array>
#include <stdexcept>

#include "mzi/optics/gaussian_beam.hpp"

namespace mzi::env {

inline constexpr std::size_t kControls = 5;

/// Maximum deflection of each motorised element: mirror-2 tilt x/y (rad),
/// beamsplitter-2 tilt x/y (rad), lens-2 offset (mm).
inline constexpr std::array<double, kControls> kControlBounds{2.6e-3, 1.8e-3, 1.3e-3, 0.9e-3, 7.5};

class BoundsError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// The five motorised degrees of freedom, ordered
/// (mirror2 x, mirror2 y, bs2 x, bs2 y, lens2 offset).
struct ControlState {
  std::array<double, kControls> values{};

  double mirror_x() const { return values[0]; }
  double mirror_y() const { return values[1]; }
  double splitter_x() const { return values[2]; }
  double splitter_y() const { return values[3]; }
  double lens_offset() const { return values[4]; }

  bool within_bounds() const;
  friend bool operator==(const ControlState&, const ControlState&) = default;
};

struct SetupGeometry {
  double bs1_to_mirror2 = 300.0;  ///< mm
  double mirror2_to_bs2 = 200.0;
  double bs2_to_camera = 100.0;
  double bs1_to_lens1 = 50.0;
  double focal_length = 50.0;     ///< both telescope lenses
  double wavelength = 632e-6;     ///< mm
  double nominal_radius = 0.71;   ///< mm, measured at the camera

  double lens2_to_camera() const {
    return bs1_to_mirror2 - bs1_to_lens1 - 2.0 * focal_length + mirror2_to_bs2 + bs2_to_camera;
  }
  void validate() const;
};

/// Lower-arm telescope path from BS1 to the camera with lens 2 displaced by
/// `lens_offset` from the confocal spacing.
optics::Abcd lower_arm_path(const SetupGeometry& geom, double lens_offset);

/// Telescope alone: lens(f), free(2f + offset), lens(f).
optics::Abcd telescope(const SetupGeometry& geom, double lens_offset);

struct BeamPair {
  optics::GaussianBeam upper;
  optics::GaussianBeam lower;
};

/// Beams at the camera plane for a control state. The upper beam is the
/// collimated reference of radius `episode_radius`, centred on the axis. The
/// input beam at BS1 is the one that the nominal lower arm maps onto that
/// reference, so ctrl = 0 yields identical beams.
BeamPair derive_beams(const ControlState& ctrl, const SetupGeometry& geom, double episode_radius);

/// Chief-ray offset at the camera produced by the mirror and splitter tilts
/// (reflection doubles each tilt).
optics::Vec2 beam_offset(const ControlState& ctrl, const SetupGeometry& geom);
/// Beam direction angle per axis, rad.
optics::Vec2 beam_angle(const ControlState& ctrl);

}  // namespace mzi::env
