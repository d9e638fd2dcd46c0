#pragma once

#include <complex>
#include <limits>
#include <stdexcept>
#include <string>

namespace mzi::optics {

/// Raised when a Gaussian-beam quantity would be unphysical (non-positive
/// radius, zero focal length, non-paraxial tilt).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised when q' = (Aq+B)/(Cq+D) has a vanishing denominator.
class FocalSingularity : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kFlat = std::numeric_limits<double>::infinity();

/// Complex beam parameter stored as its inverse,
/// 1/q = 1/rho - i*lambda/(pi*r^2), in mm^-1.
class ComplexQ {
 public:
  ComplexQ(std::complex<double> inverse_q, double wavelength_mm);

  /// Builds 1/q from a radius and a curvature radius (kFlat for a plane
  /// wavefront).
  static ComplexQ from_radius(double radius_mm, double curvature_mm, double wavelength_mm);
  static ComplexQ from_q(std::complex<double> q, double wavelength_mm);

  std::complex<double> inverse_q() const { return inverse_q_; }
  std::complex<double> q() const { return 1.0 / inverse_q_; }
  double wavelength() const { return wavelength_; }

  double radius() const;
  /// 1/rho in mm^-1; zero for a flat wavefront.
  double inverse_curvature() const { return inverse_q_.real(); }
  /// rho in mm; kFlat when the wavefront is flat.
  double curvature() const;

 private:
  std::complex<double> inverse_q_;
  double wavelength_;
};

/// Paraxial ray-transfer matrix [[a, b], [c, d]].
struct Abcd {
  double a = 1.0;
  double b = 0.0;
  double c = 0.0;
  double d = 1.0;

  double det() const { return a * d - b * c; }
  Abcd inverse() const;
};

Abcd abcd_free(double distance_mm);
Abcd abcd_lens(double focal_mm);
/// Matrix product second * first; `first` acts on the beam first.
Abcd abcd_compose(const Abcd& second, const Abcd& first);

ComplexQ propagate(const ComplexQ& q, const Abcd& m);

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

/// A Gaussian beam at the camera plane.
struct GaussianBeam {
  ComplexQ q;
  Vec2 center{};          ///< mm
  Vec2 tilt{};            ///< transverse wavevector (k_x, k_y), mm^-1
  double amplitude = 1.0; ///< envelope scale, (0, 2]

  double wavenumber() const { return 2.0 * kPi / q.wavelength(); }
};

/// Throws DomainError if the beam violates the paraxial or amplitude bounds.
void validate(const GaussianBeam& beam);

}  // namespace mzi::optics
