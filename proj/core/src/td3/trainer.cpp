#include "mzi/td3/trainer.hpp"

#include <algorithm>
#include <cmath>

namespace mzi::td3 {
namespace {

constexpr int kFinalWindow = 40;

nn::Matrix<float> column(std::span<const float> values) {
  nn::Matrix<float> m(static_cast<Eigen::Index>(values.size()), 1);
  std::copy(values.begin(), values.end(), m.data());
  return m;
}

bool finite(std::span<const float> values) {
  return std::all_of(values.begin(), values.end(), [](float v) { return std::isfinite(v); });
}

}  // namespace

void TrainConfig::validate() const {
  if (total_steps < 1 || update_every < 1 || batch_size < 1 || num_epochs < 1 || policy_delay < 1) {
    throw std::invalid_argument("step counts, batch size, epochs and delays must be >= 1");
  }
  if (start_train_step < 0) throw std::invalid_argument("start_train_step must be >= 0");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");
  if (!(polyak >= 0.0 && polyak <= 1.0)) throw std::invalid_argument("polyak must lie in [0, 1]");
  if (!(target_noise >= 0.0 && target_clip >= 0.0)) {
    throw std::invalid_argument("target smoothing parameters must be >= 0");
  }
  if (!(explore_start > 0.0 && explore_end > 0.0)) {
    throw std::invalid_argument("exploration sigmas must be positive");
  }
  if (!(actor_lr > 0.0 && critic_lr > 0.0 && max_grad_norm > 0.0)) {
    throw std::invalid_argument("learning rates and gradient cap must be positive");
  }
  if (buffer_capacity < static_cast<std::size_t>(batch_size)) {
    throw std::invalid_argument("replay capacity smaller than a batch");
  }
  if (eval_every < 0 || eval_episodes < 0 || checkpoint_every < 0) {
    throw std::invalid_argument("evaluation and checkpoint intervals must be >= 0");
  }
}

double exploration_sigma(const TrainConfig& cfg, std::int64_t step) {
  const double progress = static_cast<double>(step) / static_cast<double>(cfg.total_steps);
  return cfg.explore_start * std::pow(cfg.explore_end / cfg.explore_start, progress);
}

Agent::Agent(const nn::NetworkSpec& actor_spec, const nn::NetworkSpec& critic_spec)
    : actor(actor_spec),
      critic1(critic_spec),
      critic2(critic_spec),
      actor_target(actor_spec),
      critic1_target(critic_spec),
      critic2_target(critic_spec) {
  if (actor_spec.action_inputs != 0 || actor_spec.output != static_cast<int>(env::kControls) ||
      !actor_spec.squash_output) {
    throw std::invalid_argument("actor must map observations to 5 squashed outputs");
  }
  if (critic_spec.action_inputs != static_cast<int>(env::kControls) || critic_spec.output != 1) {
    throw std::invalid_argument("critics must take a 5-vector action and return a scalar");
  }
  if (actor_spec.input_features() != critic_spec.input_features()) {
    throw std::invalid_argument("actor and critic observation widths differ");
  }
}

void Agent::initialize(std::uint64_t seed) {
  env::Rng rng(seed);
  actor.init_orthogonal(rng());
  critic1.init_orthogonal(rng());
  critic2.init_orthogonal(rng());
  actor_target.copy_parameters_from(actor);
  critic1_target.copy_parameters_from(critic1);
  critic2_target.copy_parameters_from(critic2);
}

bool Agent::all_finite() const {
  for (const auto* net : {&actor, &critic1, &critic2, &actor_target, &critic1_target, &critic2_target}) {
    if (!finite(net->parameters())) return false;
  }
  return true;
}

ActionVector to_action_vector(const env::RawAction& raw) {
  ActionVector a{};
  for (std::size_t i = 0; i < env::kControls; ++i) a[i] = static_cast<float>(raw.values[i]);
  return a;
}

env::RawAction from_action_vector(const ActionVector& a) {
  env::RawAction raw;
  for (std::size_t i = 0; i < env::kControls; ++i) raw.values[i] = a[i];
  return raw;
}

ActionChoice select_action(const nn::Network<float>& actor, nn::Workspace<float>& ws,
                           std::span<const float> obs, double sigma, env::Rng& rng) {
  const auto& out = actor.forward(ws, column(obs));
  std::normal_distribution<double> gauss(0.0, 1.0);
  ActionVector a{};
  for (std::size_t i = 0; i < env::kControls; ++i) {
    const float noise = sigma > 0.0 ? static_cast<float>(sigma * gauss(rng)) : 0.0f;
    a[i] = std::clamp(out(static_cast<Eigen::Index>(i), 0) + noise, -1.0f, 1.0f);
  }
  ActionChoice choice;
  choice.raw = from_action_vector(a);
  choice.physical = env::raw_to_physical(choice.raw);
  return choice;
}

Eigen::VectorXf compute_targets(const Batch& batch, const nn::Network<float>& actor_target,
                                const nn::Network<float>& critic1_target,
                                const nn::Network<float>& critic2_target, const TrainConfig& cfg,
                                env::Rng& rng) {
  if (batch.size() == 0) throw std::invalid_argument("empty batch");
  nn::Workspace<float> ws;
  nn::Matrix<float> next_action = actor_target.forward(ws, batch.next_obs);
  std::normal_distribution<double> gauss(0.0, cfg.target_noise);
  const auto clip = static_cast<float>(cfg.target_clip);
  for (Eigen::Index c = 0; c < next_action.cols(); ++c) {
    for (Eigen::Index r = 0; r < next_action.rows(); ++r) {
      const float eps = std::clamp(static_cast<float>(gauss(rng)), -clip, clip);
      next_action(r, c) = std::clamp(next_action(r, c) + eps, -1.0f, 1.0f);
    }
  }
  const Eigen::VectorXf q1 = critic1_target.forward(ws, batch.next_obs, &next_action).row(0).transpose();
  const Eigen::VectorXf q2 = critic2_target.forward(ws, batch.next_obs, &next_action).row(0).transpose();
  const auto gamma = static_cast<float>(cfg.gamma);
  Eigen::VectorXf y(batch.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    y(i) = batch.rewards(i) + gamma * (1.0f - batch.done(i)) * std::min(q1(i), q2(i));
  }
  return y;
}

GreedyStats evaluate_greedy(const nn::Network<float>& actor, const env::EnvConfig& env_cfg,
                            std::uint64_t seed, int episodes) {
  GreedyStats stats;
  if (episodes <= 0) return stats;
  env::InterferometerEnv env(env_cfg);
  env::Rng seeds(seed);
  env::Rng unused(0);
  nn::Workspace<float> ws;
  const int horizon = env_cfg.horizon;
  const int window = std::min(kFinalWindow, horizon);
  int unsafe = 0;
  for (int e = 0; e < episodes; ++e) {
    auto reset = env.reset(seeds());
    std::vector<float> obs = std::move(reset.observation.data);
    std::vector<double> visibility(static_cast<std::size_t>(horizon), 0.0);
    bool done = false;
    while (!done) {
      const auto choice = select_action(actor, ws, obs, 0.0, unused);
      auto res = env.step(choice.physical);
      stats.mean_return += res.reward;
      if (res.info.terminated_unsafe) {
        ++unsafe;
      } else {
        visibility[static_cast<std::size_t>(res.info.step - 1)] = res.info.visibility_noiseless;
      }
      done = res.done;
      obs = std::move(res.observation.data);
    }
    double tail = 0.0;
    for (int s = horizon - window; s < horizon; ++s) tail += visibility[static_cast<std::size_t>(s)];
    stats.final_visibility += tail / window;
  }
  stats.mean_return /= episodes;
  stats.final_visibility /= episodes;
  stats.unsafe_rate = static_cast<double>(unsafe) / episodes;
  return stats;
}

Trainer::Trainer(env::EnvConfig env_cfg, nn::NetworkSpec actor_spec, nn::NetworkSpec critic_spec,
                 TrainConfig cfg, std::uint64_t seed)
    : env_cfg_(std::move(env_cfg)),
      cfg_((cfg.validate(), cfg)),
      seed_(seed),
      agent_(actor_spec, critic_spec),
      actor_opt_({cfg_.actor_lr, 0.9, 0.999, 1e-8, cfg_.max_grad_norm}, agent_.actor.parameter_count()),
      critic1_opt_({cfg_.critic_lr, 0.9, 0.999, 1e-8, cfg_.max_grad_norm}, agent_.critic1.parameter_count()),
      critic2_opt_({cfg_.critic_lr, 0.9, 0.999, 1e-8, cfg_.max_grad_norm}, agent_.critic2.parameter_count()),
      buffer_(cfg_.buffer_capacity, static_cast<std::size_t>(actor_spec.input_features()), cfg_.obs_storage) {
  env_cfg_.validate();
  env::Rng master(seed_);
  agent_.initialize(master());
  update_rng_.seed(master());
  grads_.resize(std::max(agent_.actor.parameter_count(), agent_.critic1.parameter_count()));
}

UpdateStats Trainer::update(const Batch& batch, std::int64_t iteration) {
  UpdateStats stats;
  const Eigen::VectorXf y =
      compute_targets(batch, agent_.actor_target, agent_.critic1_target, agent_.critic2_target, cfg_, update_rng_);
  const auto n = static_cast<float>(batch.size());

  auto regress = [&](nn::Network<float>& critic, nn::Workspace<float>& ws, nn::Adam<float>& opt) {
    const auto& q = critic.forward(ws, batch.obs, &batch.actions);
    const Eigen::RowVectorXf diff = q.row(0) - y.transpose();
    const double loss = static_cast<double>(diff.squaredNorm()) / n;
    if (!std::isfinite(loss)) throw TrainingFault("non-finite critic loss");
    const nn::Matrix<float> grad_out = (2.0f / n) * diff;
    std::span<float> grads(grads_.data(), critic.parameter_count());
    std::fill(grads.begin(), grads.end(), 0.0f);
    critic.backward(ws, grad_out, grads);
    opt.step(critic.parameters(), grads);
    return loss;
  };
  stats.critic1_loss = regress(agent_.critic1, ws_critic1_, critic1_opt_);
  stats.critic2_loss = regress(agent_.critic2, ws_critic2_, critic2_opt_);
  ++critic_updates_;

  if (iteration % cfg_.policy_delay == 0) {
    const nn::Matrix<float> policy = agent_.actor.forward(ws_actor_, batch.obs);
    const auto& q = agent_.critic1.forward(ws_critic1_, batch.obs, &policy);
    stats.actor_loss = -static_cast<double>(q.sum()) / n;
    if (!std::isfinite(stats.actor_loss)) throw TrainingFault("non-finite actor loss");
    const nn::Matrix<float> grad_q = nn::Matrix<float>::Constant(1, batch.size(), -1.0f / n);
    nn::Matrix<float> grad_action;
    agent_.critic1.backward(ws_critic1_, grad_q, {}, &grad_action);
    std::span<float> grads(grads_.data(), agent_.actor.parameter_count());
    std::fill(grads.begin(), grads.end(), 0.0f);
    agent_.actor.backward(ws_actor_, grad_action, grads);
    actor_opt_.step(agent_.actor.parameters(), grads);

    nn::polyak_blend<float>(agent_.critic1_target.parameters(), agent_.critic1.parameters(), cfg_.polyak);
    nn::polyak_blend<float>(agent_.critic2_target.parameters(), agent_.critic2.parameters(), cfg_.polyak);
    nn::polyak_blend<float>(agent_.actor_target.parameters(), agent_.actor.parameters(), cfg_.polyak);
    stats.actor_updated = true;
    ++actor_updates_;
  }
  return stats;
}

TrainSummary Trainer::train(const TrainHooks& hooks) {
  env::Rng master(seed_ ^ 0x9e3779b97f4a7c15ULL);
  env::Rng episode_seeds(master());
  env::Rng explore_rng(master());
  const std::uint64_t eval_seed = master();

  auto log = [&](const nlohmann::json& record) {
    if (hooks.log) hooks.log(record);
  };
  auto checkpoint = [&](std::int64_t step, std::string_view tag) {
    if (hooks.checkpoint) hooks.checkpoint(agent_, step, tag);
  };

  env::InterferometerEnv env(env_cfg_);
  nn::Workspace<float> ws;
  std::uniform_real_distribution<float> warmup(-1.0f, 1.0f);

  TrainSummary summary;
  std::vector<float> obs = env.reset(episode_seeds()).observation.data;
  double episode_return = 0.0;
  double last_visibility = 0.0;
  double visibility_sum = 0.0;
  int episode_len = 0;
  UpdateStats last_update;

  for (std::int64_t step = 0; step < cfg_.total_steps; ++step) {
    const double sigma = exploration_sigma(cfg_, step);
    ActionChoice choice;
    if (step < cfg_.start_train_step) {
      ActionVector a{};
      for (float& v : a) v = warmup(explore_rng);
      choice.raw = from_action_vector(a);
      choice.physical = env::raw_to_physical(choice.raw);
    } else {
      choice = select_action(agent_.actor, ws, obs, sigma, explore_rng);
    }

    auto res = env.step(choice.physical);
    const bool bootstrap_timeout = cfg_.timeout_bootstrap && res.info.truncated && !res.info.terminated_unsafe;
    const bool stored_done = res.done && !bootstrap_timeout;
    buffer_.add(obs, to_action_vector(choice.raw), static_cast<float>(res.reward), res.observation.data,
                stored_done);
    if (hooks.transition) hooks.transition(choice, res);

    episode_return += res.reward;
    ++episode_len;
    if (!res.info.terminated_unsafe) {
      last_visibility = res.info.visibility_noiseless;
      visibility_sum += last_visibility;
    }

    if (res.done) {
      log({{"kind", "episode"},
           {"step", step + 1},
           {"episode", summary.episodes},
           {"return", episode_return},
           {"length", episode_len},
           {"final_visibility", last_visibility},
           {"mean_visibility", visibility_sum / episode_len},
           {"unsafe", res.info.terminated_unsafe},
           {"sigma_explore", step < cfg_.start_train_step ? 0.0 : sigma},
           {"critic1_loss", last_update.critic1_loss},
           {"critic2_loss", last_update.critic2_loss},
           {"actor_loss", last_update.actor_loss},
           {"critic_updates", critic_updates_}});
      ++summary.episodes;
      episode_return = visibility_sum = last_visibility = 0.0;
      episode_len = 0;
      obs = env.reset(episode_seeds()).observation.data;
    } else {
      obs = std::move(res.observation.data);
    }

    if (step >= cfg_.start_train_step && (step - cfg_.start_train_step + 1) % cfg_.update_every == 0 &&
        buffer_.size() >= static_cast<std::size_t>(cfg_.batch_size)) {
      try {
        for (int j = 0; j < cfg_.num_epochs; ++j) {
          last_update = update(buffer_.sample(static_cast<std::size_t>(cfg_.batch_size), update_rng_), j);
        }
      } catch (const std::runtime_error& e) {
        checkpoint(step + 1, "diagnostic");
        throw TrainingFault(std::string("training aborted at step ") + std::to_string(step + 1) + ": " +
                            e.what());
      }
    }

    if (cfg_.eval_every > 0 && (step + 1) % cfg_.eval_every == 0) {
      const GreedyStats eval = evaluate_greedy(agent_.actor, env_cfg_, eval_seed, cfg_.eval_episodes);
      summary.last_eval_visibility = eval.final_visibility;
      log({{"kind", "eval"},
           {"step", step + 1},
           {"episodes", cfg_.eval_episodes},
           {"mean_return", eval.mean_return},
           {"final_visibility", eval.final_visibility},
           {"unsafe_rate", eval.unsafe_rate}});
    }
    if (cfg_.checkpoint_every > 0 && (step + 1) % cfg_.checkpoint_every == 0) {
      checkpoint(step + 1, "periodic");
    }
  }

  summary.steps = cfg_.total_steps;
  summary.critic_updates = critic_updates_;
  summary.actor_updates = actor_updates_;
  checkpoint(cfg_.total_steps, "final");
  return summary;
}

}  // namespace mzi::td3
