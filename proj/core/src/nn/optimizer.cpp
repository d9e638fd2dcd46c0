#include "mzi/nn/optimizer.hpp"

#include <cmath>
#include <string>

namespace mzi::nn {

template <typename Scalar>
double clip_grad_norm(std::span<Scalar> grads, double max_norm) {
  double sum = 0.0;
  for (Scalar g : grads) sum += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(sum);
  if (!std::isfinite(norm)) throw NonFiniteGradient("gradient contains non-finite values");
  if (norm > max_norm) {
    const auto scale = static_cast<Scalar>(max_norm / norm);
    for (Scalar& g : grads) g *= scale;
  }
  return norm;
}

template <typename Scalar>
Adam<Scalar>::Adam(AdamConfig cfg, std::size_t parameter_count)
    : cfg_(cfg), m_(parameter_count, 0.0), v_(parameter_count, 0.0) {
  if (!(cfg_.learning_rate > 0.0) || !(cfg_.max_grad_norm > 0.0)) {
    throw std::invalid_argument("learning rate and gradient cap must be positive");
  }
}

template <typename Scalar>
double Adam<Scalar>::step(std::span<Scalar> params, std::span<Scalar> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw std::invalid_argument("optimizer size mismatch: " + std::to_string(grads.size()) + " vs " +
                                std::to_string(m_.size()));
  }
  const double norm = clip_grad_norm(grads, cfg_.max_grad_norm);
  ++steps_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g * g;
    const double m_hat = m_[i] / bc1;
    const double v_hat = v_[i] / bc2;
    params[i] -= static_cast<Scalar>(cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.epsilon));
  }
  return norm;
}

template <typename Scalar>
void polyak_blend(std::span<Scalar> target, std::span<const Scalar> online, double rho) {
  if (target.size() != online.size()) throw std::invalid_argument("polyak: parameter count mismatch");
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("polyak: rho must lie in [0, 1]");
  const auto keep = static_cast<Scalar>(rho);
  const auto take = static_cast<Scalar>(1.0 - rho);
  for (std::size_t i = 0; i < target.size(); ++i) target[i] = keep * target[i] + take * online[i];
}

template double clip_grad_norm<float>(std::span<float>, double);
template double clip_grad_norm<double>(std::span<double>, double);
template void polyak_blend<float>(std::span<float>, std::span<const float>, double);
template void polyak_blend<double>(std::span<double>, std::span<const double>, double);
template class Adam<float>;
template class Adam<double>;

}  // namespace mzi::nn
