#include "mzi/optics/gaussian_beam.hpp"

#include <cmath>

namespace mzi::optics {

ComplexQ::ComplexQ(std::complex<double> inverse_q, double wavelength_mm)
    : inverse_q_(inverse_q), wavelength_(wavelength_mm) {
  if (!(wavelength_mm > 0.0)) {
    throw DomainError("wavelength must be positive");
  }
  if (!(inverse_q.imag() < 0.0) || !std::isfinite(inverse_q.imag()) ||
      !std::isfinite(inverse_q.real())) {
    throw DomainError("imag(1/q) must be finite and negative");
  }
}

ComplexQ ComplexQ::from_radius(double radius_mm, double curvature_mm, double wavelength_mm) {
  if (!(radius_mm > 0.0) || !std::isfinite(radius_mm)) {
    throw DomainError("beam radius must be positive, got " + std::to_string(radius_mm));
  }
  if (curvature_mm == 0.0) {
    throw DomainError("curvature radius must be nonzero");
  }
  const double inv_rho = std::isinf(curvature_mm) ? 0.0 : 1.0 / curvature_mm;
  return ComplexQ({inv_rho, -wavelength_mm / (kPi * radius_mm * radius_mm)}, wavelength_mm);
}

ComplexQ ComplexQ::from_q(std::complex<double> q, double wavelength_mm) {
  return ComplexQ(1.0 / q, wavelength_mm);
}

double ComplexQ::radius() const {
  return std::sqrt(-wavelength_ / (kPi * inverse_q_.imag()));
}

double ComplexQ::curvature() const {
  return inverse_q_.real() == 0.0 ? kFlat : 1.0 / inverse_q_.real();
}

Abcd Abcd::inverse() const {
  const double det_value = det();
  return {d / det_value, -b / det_value, -c / det_value, a / det_value};
}

Abcd abcd_free(double distance_mm) { return {1.0, distance_mm, 0.0, 1.0}; }

Abcd abcd_lens(double focal_mm) {
  if (focal_mm == 0.0 || !std::isfinite(focal_mm)) {
    throw DomainError("focal length must be finite and nonzero");
  }
  return {1.0, 0.0, -1.0 / focal_mm, 1.0};
}

Abcd abcd_compose(const Abcd& second, const Abcd& first) {
  return {second.a * first.a + second.b * first.c, second.a * first.b + second.b * first.d,
          second.c * first.a + second.d * first.c, second.c * first.b + second.d * first.d};
}

ComplexQ propagate(const ComplexQ& q, const Abcd& m) {
  // In terms of 1/q: 1/q' = (C + D/q) / (A + B/q), which stays finite for a
  // collimated beam (q -> i*inf).
  const std::complex<double> inv = q.inverse_q();
  const std::complex<double> denom = m.a + m.b * inv;
  const std::complex<double> numer = m.c + m.d * inv;
  if (std::abs(denom) < 1e-300 || std::abs(numer) < 1e-300) {
    throw FocalSingularity("ABCD map is singular for this beam at the evaluation plane");
  }
  return ComplexQ(numer / denom, q.wavelength());
}

void validate(const GaussianBeam& beam) {
  const double k = beam.wavenumber();
  if (std::hypot(beam.tilt.x, beam.tilt.y) > 0.05 * k) {
    throw DomainError("beam tilt exceeds the paraxial limit");
  }
  if (!(beam.amplitude > 0.0) || beam.amplitude > 2.0) {
    throw DomainError("beam amplitude must lie in (0, 2]");
  }
}

}  // namespace mzi::optics
