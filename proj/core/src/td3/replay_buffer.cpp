#include "mzi/td3/replay_buffer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mzi::td3 {

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::size_t obs_size, ObsStorage storage)
    : capacity_(capacity), obs_size_(obs_size), storage_(storage) {
  if (capacity == 0 || obs_size == 0) throw std::invalid_argument("replay buffer needs capacity and width");
  const std::size_t cells = capacity * obs_size;
  if (storage_ == ObsStorage::kFloat32) {
    obs_f_.resize(cells);
    next_f_.resize(cells);
  } else {
    obs_q_.resize(cells);
    next_q_.resize(cells);
  }
  actions_.resize(capacity);
  rewards_.resize(capacity);
  done_.resize(capacity);
}

void ReplayBuffer::store(std::size_t slot, std::span<const float> values, bool next) {
  const std::size_t base = slot * obs_size_;
  if (storage_ == ObsStorage::kFloat32) {
    std::copy(values.begin(), values.end(), (next ? next_f_ : obs_f_).begin() + static_cast<std::ptrdiff_t>(base));
    return;
  }
  auto& dst = next ? next_q_ : obs_q_;
  for (std::size_t i = 0; i < obs_size_; ++i) {
    dst[base + i] = static_cast<std::uint8_t>(std::lround(std::clamp(values[i], 0.0f, 1.0f) * 255.0f));
  }
}

void ReplayBuffer::load(std::size_t slot, bool next, float* out) const {
  const std::size_t base = slot * obs_size_;
  if (storage_ == ObsStorage::kFloat32) {
    const auto& src = next ? next_f_ : obs_f_;
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(base), obs_size_, out);
    return;
  }
  const auto& src = next ? next_q_ : obs_q_;
  for (std::size_t i = 0; i < obs_size_; ++i) out[i] = static_cast<float>(src[base + i]) / 255.0f;
}

void ReplayBuffer::add(std::span<const float> obs, const ActionVector& raw_action, float reward,
                       std::span<const float> next_obs, bool done) {
  if (obs.size() != obs_size_ || next_obs.size() != obs_size_) {
    throw std::invalid_argument("transition observation width mismatch");
  }
  for (float a : raw_action) {
    if (!(std::abs(a) <= 1.0f)) throw std::invalid_argument("raw action outside [-1, 1]");
  }
  if (!std::isfinite(reward)) throw std::invalid_argument("non-finite reward");
  store(head_, obs, false);
  store(head_, next_obs, true);
  actions_[head_] = raw_action;
  rewards_[head_] = reward;
  done_[head_] = done ? 1 : 0;
  head_ = (head_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

Batch ReplayBuffer::sample(std::size_t batch, env::Rng& rng) const {
  if (batch == 0 || size_ < batch) throw std::logic_error("not enough transitions to sample a batch");
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  const auto n = static_cast<Eigen::Index>(batch);
  const auto width = static_cast<Eigen::Index>(obs_size_);
  Batch b;
  b.obs.resize(width, n);
  b.next_obs.resize(width, n);
  b.actions.resize(static_cast<Eigen::Index>(env::kControls), n);
  b.rewards.resize(n);
  b.done.resize(n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const std::size_t slot = pick(rng);
    load(slot, false, b.obs.col(c).data());
    load(slot, true, b.next_obs.col(c).data());
    for (std::size_t k = 0; k < env::kControls; ++k) {
      b.actions(static_cast<Eigen::Index>(k), c) = actions_[slot][k];
    }
    b.rewards(c) = rewards_[slot];
    b.done(c) = done_[slot] ? 1.0f : 0.0f;
  }
  return b;
}

Transition ReplayBuffer::at(std::size_t index) const {
  if (index >= size_) throw std::out_of_range("replay index out of range");
  const std::size_t oldest = size_ < capacity_ ? 0 : head_;
  const std::size_t slot = (oldest + index) % capacity_;
  Transition t;
  t.obs.resize(obs_size_);
  t.next_obs.resize(obs_size_);
  load(slot, false, t.obs.data());
  load(slot, true, t.next_obs.data());
  t.raw_action = actions_[slot];
  t.reward = rewards_[slot];
  t.done = done_[slot] != 0;
  return t;
}

}  // namespace mzi::td3
