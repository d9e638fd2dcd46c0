#include "mzi/harness/evaluation.hpp"

#include <bit>
#include <chrono>
#include <sstream>

#include "mzi/td3/trainer.hpp"

namespace mzi::harness {
namespace {

double unix_seconds() {
  return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
}

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

template <std::size_t N>
bool same_bits(const std::array<double, N>& a, const std::array<double, N>& b) {
  for (std::size_t i = 0; i < N; ++i) {
    if (!same_bits(a[i], b[i])) return false;
  }
  return true;
}

std::string first_difference(const TrajectoryRecord& got, const TrajectoryRecord& want) {
  if (!same_bits(got.radius, want.radius)) return "radius";
  if (!same_bits(got.before.values, want.before.values)) return "ctrl_before";
  if (!same_bits(got.physical.deltas, want.physical.deltas)) return "physical_action";
  if (!same_bits(got.after.values, want.after.values)) return "ctrl_after";
  if (!same_bits(got.reward, want.reward)) return "reward";
  if (!same_bits(got.visibility, want.visibility)) return "visibility";
  if (!same_bits(got.visibility_frames, want.visibility_frames)) return "visibility_frames";
  if (got.done != want.done) return "done";
  if (got.terminated_unsafe != want.terminated_unsafe) return "terminated_unsafe";
  if (got.truncated != want.truncated) return "truncated";
  if (got.draws_digest != want.draws_digest) return "draws_digest";
  return {};
}

std::string describe(double a, double b) {
  std::ostringstream os;
  os.precision(17);
  os << " (replayed " << a << ", logged " << b << ")";
  return os.str();
}

}  // namespace

TrajectoryRecord step_and_record(env::InterferometerEnv& env, const env::RawAction& raw,
                                 const env::PhysicalAction& physical, int episode, std::uint64_t reset_seed,
                                 double episode_start, env::StepResult* result) {
  TrajectoryRecord r;
  r.episode = episode;
  r.reset_seed = reset_seed;
  r.radius = env.episode_radius();
  r.before = env.control_state();
  r.raw = raw;
  r.physical = physical;
  env::StepResult res = env.step(physical);
  const env::BeamPair beams = env.beams();
  r.step = res.info.step;
  r.after = res.info.control_state;
  r.reward = res.reward;
  r.visibility = res.info.visibility_noiseless;
  r.visibility_frames = optics::detector_visibility(beams.upper, beams.lower);
  r.done = res.done;
  r.terminated_unsafe = res.info.terminated_unsafe;
  r.truncated = res.info.truncated;
  r.draws_digest = draws_digest(res.info.draws);
  r.timestamp = unix_seconds();
  r.elapsed = r.timestamp - episode_start;
  if (result) *result = std::move(res);
  return r;
}

std::vector<TrajectoryRecord> run_greedy_episodes(const env::EnvConfig& env_cfg, const nn::Network<float>& actor,
                                                  std::uint64_t seed, int episodes, const RecordSink& sink) {
  env::InterferometerEnv env(env_cfg);
  env::Rng seeds(seed);
  env::Rng unused(0);
  nn::Workspace<float> ws;
  std::vector<TrajectoryRecord> out;
  for (int e = 0; e < episodes; ++e) {
    const std::uint64_t reset_seed = seeds();
    const double start = unix_seconds();
    auto reset = env.reset(reset_seed);
    std::vector<float> obs = std::move(reset.observation.data);
    bool done = false;
    while (!done) {
      const auto choice = td3::select_action(actor, ws, obs, 0.0, unused);
      env::StepResult res;
      TrajectoryRecord r = step_and_record(env, choice.raw, choice.physical, e, reset_seed, start, &res);
      if (sink) sink(r);
      out.push_back(std::move(r));
      done = res.done;
      obs = std::move(res.observation.data);
    }
  }
  return out;
}

nlohmann::json evaluation_header(const RunConfig& cfg, const std::string& checkpoint_path,
                                 const std::string& checkpoint_sha256) {
  return {{"config_digest", cfg.digest()},
          {"config", cfg.to_ini()},
          {"seed", cfg.seed},
          {"episodes", cfg.episodes},
          {"policy", "greedy"},
          {"checkpoint", checkpoint_path},
          {"checkpoint_sha256", checkpoint_sha256},
          {"created", unix_seconds()}};
}

ReplayReport replay_trajectory(const TrajectoryLog& log, const nn::Network<float>* actor) {
  ReplayReport report;
  auto fail = [&report](std::size_t index, std::string field, std::string message) {
    report.match = false;
    report.first_mismatch = index;
    report.field = std::move(field);
    report.message = "record " + std::to_string(index) + ": " + std::move(message);
    return report;
  };

  RunConfig cfg;
  try {
    cfg = parse_config(log.header.at("config").get<std::string>());
  } catch (const nlohmann::json::exception&) {
    throw TrajectoryError("trajectory header has no embedded config");
  } catch (const ConfigError& e) {
    throw TrajectoryError(std::string("embedded config is invalid: ") + e.what());
  }
  if (cfg.digest() != log.header.value("config_digest", "")) {
    throw TrajectoryError("embedded config does not match the header digest");
  }

  env::InterferometerEnv env(cfg.env);
  env::Rng unused(0);
  nn::Workspace<float> ws;
  std::vector<float> obs;
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    const TrajectoryRecord& want = log.records[i];
    const bool first = i == 0 || log.records[i - 1].episode != want.episode;
    if (first) {
      if (want.step != 1) return fail(i, "step", "episode does not start at step 1");
      obs = env.reset(want.reset_seed).observation.data;
    } else if (want.step != log.records[i - 1].step + 1 || env.done()) {
      return fail(i, "step", "non-contiguous step index or step after episode end");
    }

    if (actor) {
      const auto choice = td3::select_action(*actor, ws, obs, 0.0, unused);
      if (!same_bits(choice.raw.values, want.raw.values)) {
        return fail(i, "raw_action", "policy chose a different raw action");
      }
    }
    const env::PhysicalAction physical = env::raw_to_physical(want.raw);
    env::StepResult res;
    const TrajectoryRecord got = step_and_record(env, want.raw, physical, want.episode, want.reset_seed, 0.0, &res);
    obs = std::move(res.observation.data);
    if (const std::string field = first_difference(got, want); !field.empty()) {
      std::string detail;
      if (field == "reward") detail = describe(got.reward, want.reward);
      if (field == "visibility") detail = describe(got.visibility, want.visibility);
      return fail(i, field, "field '" + field + "' differs" + detail);
    }
    ++report.checked;
  }
  return report;
}

}  // namespace mzi::harness
