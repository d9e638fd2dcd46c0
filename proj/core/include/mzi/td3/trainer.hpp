#pragma once

#include <cstdint>
#include <functional>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string_view>

#include "mzi/env/interferometer_env.hpp"
#include "mzi/nn/network.hpp"
#include "mzi/nn/optimizer.hpp"
#include "mzi/td3/replay_buffer.hpp"

namespace mzi::td3 {

/// Training aborted on a non-finite loss or gradient.
class TrainingFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  std::int64_t total_steps = 1'000'000;
  int update_every = 10;
  int batch_size = 32;
  int num_epochs = 10;
  int policy_delay = 1;
  std::int64_t start_train_step = 10'000;
  double gamma = 0.8;
  double target_noise = 0.2;   ///< sigma_targ
  double target_clip = 0.5;    ///< c
  double polyak = 0.995;
  double explore_start = 0.5;
  double explore_end = 0.02;
  double actor_lr = 1e-5;
  double critic_lr = 1e-4;
  double max_grad_norm = 10.0;
  std::size_t buffer_capacity = 100'000;
  std::int64_t eval_every = 10'000;
  int eval_episodes = 5;
  std::int64_t checkpoint_every = 0;  ///< 0: only the final checkpoint
  /// When true, horizon expiry is stored with d = 0 so the target bootstraps
  /// through the timeout. Default false stores d = 1 for every done signal.
  bool timeout_bootstrap = false;
  ObsStorage obs_storage = ObsStorage::kFloat32;

  void validate() const;
};

/// sigma_explore at an environment step: geometric interpolation from
/// explore_start at step 0 to explore_end at total_steps.
double exploration_sigma(const TrainConfig& cfg, std::int64_t step);

/// Online and target parameters of the actor and both critics.
struct Agent {
  Agent(const nn::NetworkSpec& actor_spec, const nn::NetworkSpec& critic_spec);

  nn::Network<float> actor;
  nn::Network<float> critic1;
  nn::Network<float> critic2;
  nn::Network<float> actor_target;
  nn::Network<float> critic1_target;
  nn::Network<float> critic2_target;

  /// Orthogonal init of the online networks, targets copied from them.
  void initialize(std::uint64_t seed);
  bool all_finite() const;
};

struct ActionChoice {
  env::RawAction raw;            ///< float-representable, in [-1, 1]
  env::PhysicalAction physical;
};

/// Raw action clip(pi(o) + eps, -1, 1), eps ~ N(0, sigma^2) per component,
/// with its rescaled physical counterpart. sigma = 0 is the greedy policy.
ActionChoice select_action(const nn::Network<float>& actor, nn::Workspace<float>& ws,
                           std::span<const float> obs, double sigma, env::Rng& rng);

ActionVector to_action_vector(const env::RawAction& raw);
env::RawAction from_action_vector(const ActionVector& a);

/// Twin-minimum TD targets with clipped target-policy smoothing.
Eigen::VectorXf compute_targets(const Batch& batch, const nn::Network<float>& actor_target,
                                const nn::Network<float>& critic1_target,
                                const nn::Network<float>& critic2_target, const TrainConfig& cfg,
                                env::Rng& rng);

struct UpdateStats {
  double critic1_loss = 0.0;
  double critic2_loss = 0.0;
  double actor_loss = 0.0;
  bool actor_updated = false;
};

/// Callbacks for the training log and checkpoints. `tag` is "periodic",
/// "final" or "diagnostic". `transition` sees every collected step.
struct TrainHooks {
  std::function<void(const nlohmann::json&)> log;
  std::function<void(const Agent&, std::int64_t step, std::string_view tag)> checkpoint;
  std::function<void(const ActionChoice&, const env::StepResult&)> transition;
};

struct TrainSummary {
  std::int64_t steps = 0;
  std::int64_t episodes = 0;
  std::int64_t critic_updates = 0;
  std::int64_t actor_updates = 0;
  double last_eval_visibility = 0.0;
};

/// Greedy episode statistics used by in-training evaluation.
struct GreedyStats {
  double mean_return = 0.0;
  double final_visibility = 0.0;  ///< mean over the last 40 steps, unsafe steps count as 0
  double unsafe_rate = 0.0;
};

GreedyStats evaluate_greedy(const nn::Network<float>& actor, const env::EnvConfig& env_cfg,
                            std::uint64_t seed, int episodes);

/// TD3 with exponential action rescaling: the environment executes the
/// rescaled physical action while the replay buffer keeps the raw action.
class Trainer {
 public:
  Trainer(env::EnvConfig env_cfg, nn::NetworkSpec actor_spec, nn::NetworkSpec critic_spec,
          TrainConfig cfg, std::uint64_t seed);

  /// Runs the full collect/update loop.
  TrainSummary train(const TrainHooks& hooks = {});

  /// One update iteration on a sampled batch; `iteration` selects delayed
  /// actor updates.
  UpdateStats update(const Batch& batch, std::int64_t iteration);

  Agent& agent() { return agent_; }
  const Agent& agent() const { return agent_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const TrainConfig& config() const { return cfg_; }
  std::int64_t critic_updates() const { return critic_updates_; }
  std::int64_t actor_updates() const { return actor_updates_; }

 private:
  env::EnvConfig env_cfg_;
  TrainConfig cfg_;
  std::uint64_t seed_;
  Agent agent_;
  nn::Adam<float> actor_opt_;
  nn::Adam<float> critic1_opt_;
  nn::Adam<float> critic2_opt_;
  ReplayBuffer buffer_;
  env::Rng update_rng_;
  nn::Workspace<float> ws_actor_;
  nn::Workspace<float> ws_critic1_;
  nn::Workspace<float> ws_critic2_;
  std::vector<float> grads_;
  std::int64_t critic_updates_ = 0;
  std::int64_t actor_updates_ = 0;
};

}  // namespace mzi::td3
