#include "mzi/harness/training.hpp"

#include <chrono>
#include <fstream>

#include "mzi/harness/checkpoint.hpp"

namespace mzi::harness {

TrainOutcome run_training(const RunConfig& cfg, const std::filesystem::path& out_dir,
                          const std::function<void(const nlohmann::json&)>& progress) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  TrainOutcome outcome;
  outcome.log = out_dir / "train_log.jsonl";
  outcome.checkpoint = out_dir / "checkpoint.bin";

  std::ofstream log(outcome.log, std::ios::trunc);
  if (!log) throw std::runtime_error("cannot write '" + outcome.log.string() + "'");
  log << nlohmann::json{{"kind", "header"}, {"config_digest", cfg.digest()}, {"config", cfg.to_ini()}}.dump()
      << '\n';

  const auto t0 = std::chrono::steady_clock::now();
  const std::string digest = cfg.digest();
  td3::TrainHooks hooks;
  hooks.log = [&](const nlohmann::json& line) {
    nlohmann::json stamped = line;
    stamped["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log << stamped.dump() << '\n';
    if (stamped.value("kind", "") == "eval") log.flush();
    if (progress) progress(stamped);
  };
  hooks.checkpoint = [&](const td3::Agent& agent, std::int64_t step, std::string_view tag) {
    std::filesystem::path path = outcome.checkpoint;
    if (tag == "periodic") path = out_dir / ("checkpoint_" + std::to_string(step) + ".bin");
    if (tag == "diagnostic") path = out_dir / "checkpoint_diagnostic.bin";
    save_checkpoint(path, agent, step, std::string(tag), digest);
  };

  td3::Trainer trainer(cfg.env, cfg.actor_spec(), cfg.critic_spec(), cfg.train, cfg.seed);
  outcome.summary = trainer.train(hooks);
  outcome.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return outcome;
}

}  // namespace mzi::harness
