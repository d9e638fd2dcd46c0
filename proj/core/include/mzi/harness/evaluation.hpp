#pragma once

#include <cstdint>
#include <functional>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "mzi/harness/config.hpp"
#include "mzi/harness/trajectory.hpp"
#include "mzi/nn/network.hpp"

namespace mzi::harness {

using RecordSink = std::function<void(const TrajectoryRecord&)>;

/// Executes one step and returns its record; frame-based visibility is the
/// noiseless detector sweep of the post-step beams.
TrajectoryRecord step_and_record(env::InterferometerEnv& env, const env::RawAction& raw,
                                 const env::PhysicalAction& physical, int episode, std::uint64_t reset_seed,
                                 double episode_start, env::StepResult* result = nullptr);

/// Greedy rollouts. Episode e resets with the e-th draw of an RNG seeded by
/// `seed`, so a run is fully determined by (config, actor, seed).
std::vector<TrajectoryRecord> run_greedy_episodes(const env::EnvConfig& env_cfg, const nn::Network<float>& actor,
                                                  std::uint64_t seed, int episodes, const RecordSink& sink = {});

/// Header line for an evaluation log: embedded config text and digest, seed,
/// episode count and the checkpoint identity.
nlohmann::json evaluation_header(const RunConfig& cfg, const std::string& checkpoint_path,
                                 const std::string& checkpoint_sha256);

struct ReplayReport {
  bool match = true;
  std::size_t checked = 0;
  std::size_t first_mismatch = 0;  ///< record index (0-based, header excluded)
  std::string field;
  std::string message;
};

/// Re-executes every logged episode from its reset seed with the logged raw
/// actions and compares all deterministic fields bit for bit. With an actor,
/// the greedy action is recomputed and compared too.
ReplayReport replay_trajectory(const TrajectoryLog& log, const nn::Network<float>* actor = nullptr);

}  // namespace mzi::harness
