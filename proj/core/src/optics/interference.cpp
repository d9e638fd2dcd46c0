#include "mzi/optics/interference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace mzi::optics {
namespace {

using cplx = std::complex<double>;

// p = 1/r^2 + i k / (2 rho) == (i k / 2) * (1/q).
cplx envelope_coefficient(const GaussianBeam& beam) {
  return cplx(0.0, 0.5 * beam.wavenumber()) * beam.q.inverse_q();
}

// One transverse axis of the separable field:
// exp(-p (u - u0)^2 - i k_u u).
std::vector<cplx> axis_samples(cplx p, double center, double tilt, double fov, int n, double origin = 0.0) {
  std::vector<cplx> out(static_cast<std::size_t>(n));
  const double pitch = fov / n;
  for (int i = 0; i < n; ++i) {
    const double u = origin - 0.5 * fov + (i + 0.5) * pitch;
    const double du = u - center;
    out[static_cast<std::size_t>(i)] = std::exp(-p * du * du - cplx(0.0, tilt * u));
  }
  return out;
}

std::vector<cplx> sample_field(const GaussianBeam& beam, double fov, int n) {
  validate(beam);
  const cplx p = envelope_coefficient(beam);
  const auto ex = axis_samples(p, beam.center.x, beam.tilt.x, fov, n);
  const auto ey = axis_samples(p, beam.center.y, beam.tilt.y, fov, n);
  std::vector<cplx> field(static_cast<std::size_t>(n) * n);
  for (int row = 0; row < n; ++row) {
    const cplx fy = beam.amplitude * ey[static_cast<std::size_t>(row)];
    for (int col = 0; col < n; ++col) {
      field[static_cast<std::size_t>(row) * n + col] = fy * ex[static_cast<std::size_t>(col)];
    }
  }
  return field;
}

// Integral over the real line of exp(-a u^2 + b u + c), Re(a) > 0.
cplx gaussian_integral(cplx a, cplx b, cplx c) {
  return std::sqrt(kPi / a) * std::exp(b * b / (4.0 * a) + c);
}

constexpr int kDetectorPixels = 4096;
constexpr double kDetectorRadii = 5.0;

}  // namespace

SensorTotals::SensorTotals(const GaussianBeam& upper, const GaussianBeam& lower, double fov_mm, int pixels,
                           Vec2 centre) {
  if (pixels < 2) throw DomainError("sensor needs at least 2x2 pixels");
  if (!(fov_mm > 0.0)) throw DomainError("field of view must be positive");
  validate(upper);
  validate(lower);
  const cplx pu = envelope_coefficient(upper);
  const cplx pl = envelope_coefficient(lower);
  const auto ux = axis_samples(pu, upper.center.x, upper.tilt.x, fov_mm, pixels, centre.x);
  const auto uy = axis_samples(pu, upper.center.y, upper.tilt.y, fov_mm, pixels, centre.y);
  const auto lx = axis_samples(pl, lower.center.x, lower.tilt.x, fov_mm, pixels, centre.x);
  const auto ly = axis_samples(pl, lower.center.y, lower.tilt.y, fov_mm, pixels, centre.y);
  auto sums = [](const std::vector<cplx>& a, const std::vector<cplx>& b) {
    double na = 0.0;
    double nb = 0.0;
    cplx x = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      na += std::norm(a[i]);
      nb += std::norm(b[i]);
      x += a[i] * std::conj(b[i]);
    }
    return std::tuple{na, nb, x};
  };
  const auto [uxx, lxx, cx] = sums(ux, lx);
  const auto [uyy, lyy, cy] = sums(uy, ly);
  const double area = (fov_mm / pixels) * (fov_mm / pixels);
  upper_power_ = upper.amplitude * upper.amplitude * uxx * uyy * area;
  lower_power_ = lower.amplitude * lower.amplitude * lxx * lyy * area;
  cross_ = upper.amplitude * lower.amplitude * cx * cy * area;
}

double SensorTotals::total(double phase) const {
  // A sum of squared moduli; the factored form can round just below zero
  // at perfect cancellation.
  return std::max(0.0, upper_power_ + lower_power_ + 2.0 * (std::polar(1.0, phase) * cross_).real());
}

double Frame::total() const {
  const double area = pixel_pitch() * pixel_pitch();
  return std::accumulate(pixels.begin(), pixels.end(), 0.0) * area;
}

InterferenceFields::InterferenceFields(const GaussianBeam& upper, const GaussianBeam& lower,
                                       double fov_mm, int pixels)
    : size_(pixels), fov_(fov_mm) {
  if (pixels < 2) throw DomainError("frame needs at least 2x2 pixels");
  if (!(fov_mm > 0.0)) throw DomainError("field of view must be positive");
  upper_ = sample_field(upper, fov_mm, pixels);
  lower_ = sample_field(lower, fov_mm, pixels);
}

void InterferenceFields::intensities(double phase, std::span<double> out) const {
  const cplx rotation = std::polar(1.0, phase);
  for (std::size_t i = 0; i < upper_.size(); ++i) {
    out[i] = std::norm(upper_[i] * rotation + lower_[i]);
  }
}

Frame InterferenceFields::frame(double phase) const {
  Frame f;
  f.size = size_;
  f.field_of_view = fov_;
  f.phase = phase;
  f.pixels.resize(upper_.size());
  intensities(phase, f.pixels);
  return f;
}

cplx field_at(const GaussianBeam& beam, double x_mm, double y_mm) {
  const cplx p = envelope_coefficient(beam);
  const double dx = x_mm - beam.center.x;
  const double dy = y_mm - beam.center.y;
  return beam.amplitude *
         std::exp(-p * (dx * dx + dy * dy) - cplx(0.0, beam.tilt.x * x_mm + beam.tilt.y * y_mm));
}

Frame render_frame(const GaussianBeam& upper, const GaussianBeam& lower, double phase, double fov_mm,
                   int pixels) {
  return InterferenceFields(upper, lower, fov_mm, pixels).frame(phase);
}

double visibility_from_sweep(std::span<const SweepSample> sweep) {
  if (sweep.size() < 2) throw DomainError("visibility needs at least two sweep samples");
  double lo = sweep.front().total;
  double hi = lo;
  for (const auto& s : sweep) {
    if (s.total < 0.0 || !std::isfinite(s.total)) {
      throw DomainError("sweep intensities must be finite and non-negative");
    }
    lo = std::min(lo, s.total);
    hi = std::max(hi, s.total);
  }
  if (hi == 0.0) throw UndefinedVisibility("visibility is undefined for an all-dark sweep");
  return (hi - lo) / (hi + lo);
}

cplx overlap_integral(const GaussianBeam& upper, const GaussianBeam& lower) {
  const cplx pu = envelope_coefficient(upper);
  const cplx pl = std::conj(envelope_coefficient(lower));
  const cplx a = pu + pl;

  auto axis = [&](double cu, double cl, double ku, double kl) {
    // exponent: -pu (u - cu)^2 - pl (u - cl)^2 - i ku u + i kl u
    const cplx b = 2.0 * pu * cu + 2.0 * pl * cl + cplx(0.0, kl - ku);
    const cplx c = -pu * cu * cu - pl * cl * cl;
    return gaussian_integral(a, b, c);
  };
  return upper.amplitude * lower.amplitude *
         axis(upper.center.x, lower.center.x, upper.tilt.x, lower.tilt.x) *
         axis(upper.center.y, lower.center.y, upper.tilt.y, lower.tilt.y);
}

double power(const GaussianBeam& beam) {
  const double r = beam.q.radius();
  return beam.amplitude * beam.amplitude * 0.5 * kPi * r * r;
}

double visibility_analytic(const GaussianBeam& upper, const GaussianBeam& lower) {
  const double v = 2.0 * std::abs(overlap_integral(upper, lower)) / (power(upper) + power(lower));
  return std::clamp(v, 0.0, 1.0);
}

namespace {

double sweep_visibility(const SensorTotals& totals, int phases) {
  std::vector<SweepSample> sweep(static_cast<std::size_t>(phases));
  for (int j = 0; j < phases; ++j) {
    const double phase = 2.0 * kPi * j / phases;
    sweep[static_cast<std::size_t>(j)] = {phase, totals.total(phase)};
  }
  return visibility_from_sweep(sweep);
}

}  // namespace

double visibility_dense_sweep(const GaussianBeam& upper, const GaussianBeam& lower, double fov_mm,
                              int pixels, int phases) {
  return sweep_visibility(SensorTotals(upper, lower, fov_mm, pixels), phases);
}

double detector_visibility(const GaussianBeam& upper, const GaussianBeam& lower, int phases) {
  const Vec2 mid{0.5 * (upper.center.x + lower.center.x), 0.5 * (upper.center.y + lower.center.y)};
  double half = 0.0;
  for (const GaussianBeam* b : {&upper, &lower}) {
    const double reach = kDetectorRadii * b->q.radius();
    half = std::max({half, std::abs(b->center.x - mid.x) + reach, std::abs(b->center.y - mid.y) + reach});
  }
  return sweep_visibility(SensorTotals(upper, lower, 2.0 * half, kDetectorPixels, mid), phases);
}

}  // namespace mzi::optics
