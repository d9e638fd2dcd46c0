#pragma once

#include <complex>
#include <span>
#include <stdexcept>
#include <vector>

#include "mzi/optics/gaussian_beam.hpp"

namespace mzi::optics {

/// Raised when a sweep carries no light at all.
class UndefinedVisibility : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Square camera image of non-negative intensities, row-major (y outer).
struct Frame {
  int size = 0;
  double field_of_view = 0.0;  ///< mm, side of the square sensor region
  double phase = 0.0;          ///< rad
  std::vector<double> pixels;

  double pixel_pitch() const { return field_of_view / size; }
  double at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * size + col]; }
  /// Riemann sum of the intensity over the sensor, in mm^2 units.
  double total() const;
};

/// Complex fields of both beams sampled at the pixel centres of a sensor.
/// The fields do not depend on the piezo phase, so one instance renders any
/// number of frames.
class InterferenceFields {
 public:
  InterferenceFields(const GaussianBeam& upper, const GaussianBeam& lower, double fov_mm, int pixels);

  int size() const { return size_; }
  double field_of_view() const { return fov_; }
  std::span<const std::complex<double>> upper() const { return upper_; }
  std::span<const std::complex<double>> lower() const { return lower_; }

  /// |E_u e^{i phase} + E_l|^2 per pixel.
  Frame frame(double phase) const;
  void intensities(double phase, std::span<double> out) const;

 private:
  int size_;
  double fov_;
  std::vector<std::complex<double>> upper_;
  std::vector<std::complex<double>> lower_;
};

/// Integrated intensity of the two-beam sum over a sensor versus piezo phase,
/// P_u + P_l + 2 Re(e^{i phase} X). The fields are separable, so the pixel sums
/// factor per axis and cost O(pixels) instead of O(pixels^2). Equal to
/// Frame::total() of the corresponding rendered frame up to rounding.
class SensorTotals {
 public:
  SensorTotals(const GaussianBeam& upper, const GaussianBeam& lower, double fov_mm, int pixels,
               Vec2 centre = {});

  double total(double phase) const;
  double upper_power() const { return upper_power_; }
  double lower_power() const { return lower_power_; }
  std::complex<double> cross() const { return cross_; }

 private:
  double upper_power_ = 0.0;
  double lower_power_ = 0.0;
  std::complex<double> cross_;
};

/// Complex field E(x, y) of a beam: Gaussian envelope with the wavefront
/// curvature centred on the beam axis and a linear tilt phase.
std::complex<double> field_at(const GaussianBeam& beam, double x_mm, double y_mm);

Frame render_frame(const GaussianBeam& upper, const GaussianBeam& lower, double phase, double fov_mm,
                   int pixels);

struct SweepSample {
  double phase = 0.0;
  double total = 0.0;
};

/// (max - min) / (max + min) of the integrated intensity over the sweep.
double visibility_from_sweep(std::span<const SweepSample> sweep);

/// Closed-form overlap integral of E_u * conj(E_l) over the whole plane.
std::complex<double> overlap_integral(const GaussianBeam& upper, const GaussianBeam& lower);
/// Closed-form integral of |E|^2 over the whole plane.
double power(const GaussianBeam& beam);

/// 2|<E_u, E_l>| / (|E_u|^2 + |E_l|^2).
double visibility_analytic(const GaussianBeam& upper, const GaussianBeam& lower);

inline constexpr int kDenseSweepPhases = 64;

/// Renders `phases` uniformly spaced frames over [0, 2pi), integrates each and
/// applies visibility_from_sweep. No noise of any kind.
double visibility_dense_sweep(const GaussianBeam& upper, const GaussianBeam& lower, double fov_mm,
                              int pixels, int phases = kDenseSweepPhases);

/// Dense noiseless sweep on a photodetector-like sensor: a window centred
/// between the beams that holds both out to 5 radii, sampled finely enough to
/// resolve every fringe. Unlike the camera it never clips or aliases.
double detector_visibility(const GaussianBeam& upper, const GaussianBeam& lower,
                           int phases = kDenseSweepPhases);

}  // namespace mzi::optics
