#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "mzi/env/control_state.hpp"
#include "mzi/env/randomization.hpp"
#include "mzi/nn/network.hpp"

namespace mzi::td3 {

using ActionVector = std::array<float, env::kControls>;

/// One replay record: observation, raw (pre-rescale) action, reward, next
/// observation, done flag.
struct Transition {
  std::vector<float> obs;
  ActionVector raw_action{};
  float reward = 0.0f;
  std::vector<float> next_obs;
  bool done = false;
};

/// Column-per-sample minibatch.
struct Batch {
  nn::Matrix<float> obs;
  nn::Matrix<float> actions;
  nn::Matrix<float> next_obs;
  Eigen::VectorXf rewards;
  Eigen::VectorXf done;

  Eigen::Index size() const { return obs.cols(); }
};

/// How observations are held in memory. Frame stacks are large, so they may
/// be stored quantised to 8 bits (1/255 steps over [0, 1]).
enum class ObsStorage { kFloat32, kUint8 };

/// Fixed-capacity ring buffer with uniform sampling with replacement.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::size_t obs_size, ObsStorage storage = ObsStorage::kFloat32);

  void add(std::span<const float> obs, const ActionVector& raw_action, float reward,
           std::span<const float> next_obs, bool done);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t obs_size() const { return obs_size_; }

  /// Throws std::logic_error when fewer than `batch` transitions are stored.
  Batch sample(std::size_t batch, env::Rng& rng) const;
  /// Transition by age: 0 is the oldest retained record.
  Transition at(std::size_t index) const;

 private:
  void store(std::size_t slot, std::span<const float> values, bool next);
  void load(std::size_t slot, bool next, float* out) const;

  std::size_t capacity_;
  std::size_t obs_size_;
  ObsStorage storage_;
  std::vector<float> obs_f_;
  std::vector<std::uint8_t> obs_q_;
  std::vector<float> next_f_;
  std::vector<std::uint8_t> next_q_;
  std::vector<ActionVector> actions_;
  std::vector<float> rewards_;
  std::vector<std::uint8_t> done_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
};

}  // namespace mzi::td3
