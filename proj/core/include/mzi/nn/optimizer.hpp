#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace mzi::nn {

/// A gradient or loss that is NaN or infinite.
class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scales `grads` in place so its global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
template <typename Scalar>
double clip_grad_norm(std::span<Scalar> grads, double max_norm);

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double max_grad_norm = 10.0;
};

/// Bias-corrected adaptive-moment optimizer with global gradient-norm
/// clipping ahead of the moment update.
template <typename Scalar>
class Adam {
 public:
  Adam(AdamConfig cfg, std::size_t parameter_count);

  /// Clips `grads` in place, then updates `params`. Returns the pre-clip norm.
  double step(std::span<Scalar> params, std::span<Scalar> grads);

  const AdamConfig& config() const { return cfg_; }
  std::int64_t steps() const { return steps_; }
  std::span<const double> first_moment() const { return m_; }
  std::span<const double> second_moment() const { return v_; }

 private:
  AdamConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::int64_t steps_ = 0;
};

/// target <- rho * target + (1 - rho) * online, elementwise.
template <typename Scalar>
void polyak_blend(std::span<Scalar> target, std::span<const Scalar> online, double rho);

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace mzi::nn
