#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "mzi/harness/checkpoint.hpp"
#include "mzi/harness/config.hpp"
#include "mzi/harness/encoding.hpp"
#include "mzi/harness/evaluation.hpp"
#include "mzi/harness/metrics.hpp"
#include "mzi/harness/server.hpp"
#include "mzi/harness/training.hpp"

namespace mzalign {
namespace {

namespace fs = std::filesystem;
using namespace mzi;
using harness::ConfigError;

struct Options {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> episodes;
  std::optional<std::string> checkpoint;
  std::optional<std::string> obs_mode;
  std::optional<std::string> randomization;
  std::optional<int> port;
  std::optional<std::string> out_dir;
  std::string trajectory;
  std::string state;
};

harness::RunConfig resolve(const Options& o) {
  harness::RunConfig cfg = o.config.empty() ? harness::RunConfig{} : harness::load_config(o.config);
  for (const auto& kv : o.overrides) harness::apply_override(cfg, kv);
  if (o.seed) cfg.seed = *o.seed;
  if (o.episodes) cfg.episodes = *o.episodes;
  if (o.checkpoint) cfg.checkpoint = *o.checkpoint;
  if (o.obs_mode) harness::set_value(cfg, "env.obs_mode", *o.obs_mode);
  if (o.randomization) harness::set_value(cfg, "randomization.preset", *o.randomization);
  if (o.port) cfg.port = *o.port;
  if (o.out_dir) cfg.output_dir = *o.out_dir;
  cfg.validate();
  return cfg;
}

std::string fixed(double v, int digits = 4) {
  if (!std::isfinite(v)) return "n/a";
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

int cmd_train(const harness::RunConfig& cfg, std::ostream& out) {
  const fs::path dir = cfg.output_dir;
  out << "training " << cfg.train.total_steps << " steps, seed " << cfg.seed << ", obs "
      << (cfg.env.obs_mode == env::ObsMode::kFrames ? "frames" : "vector") << " -> " << dir.string() << "\n";
  const auto outcome = harness::run_training(cfg, dir, [&out](const nlohmann::json& line) {
    if (line.value("kind", "") != "eval") return;
    out << "  step " << line["step"] << "  final V " << fixed(line["final_visibility"].get<double>())
        << "  unsafe " << fixed(line["unsafe_rate"].get<double>(), 2) << "  t " << fixed(line["wall_seconds"], 0)
        << " s\n"
        << std::flush;
  });
  out << "done: " << outcome.summary.episodes << " episodes, " << outcome.summary.critic_updates
      << " critic updates, " << fixed(outcome.wall_seconds, 1) << " s\n"
      << "checkpoint " << outcome.checkpoint.string() << "\nlog " << outcome.log.string() << "\n";
  return kExitOk;
}

std::unique_ptr<td3::Agent> agent_for(const harness::RunConfig& cfg, harness::CheckpointInfo& info) {
  if (cfg.checkpoint.empty()) throw ConfigError("a checkpoint is required (--checkpoint)");
  auto agent = harness::load_agent(cfg.checkpoint, &info);
  if (info.actor_spec.input_features() != cfg.actor_spec().input_features()) {
    throw ConfigError("checkpoint actor expects " + std::to_string(info.actor_spec.input_features()) +
                      " inputs but the configured observation has " +
                      std::to_string(cfg.actor_spec().input_features()));
  }
  return agent;
}

void print_summary(const harness::EvalSummary& s, std::ostream& out) {
  out << "episodes " << s.episodes << ", unsafe " << s.unsafe_episodes << " (" << fixed(100.0 * s.unsafe_rate(), 1)
      << "%)\n"
      << "final visibility (last " << harness::kFinalWindow << " steps): mean " << fixed(s.final_stats.mean)
      << "  median " << fixed(s.final_stats.median) << "  IQR [" << fixed(s.final_stats.q1) << ", "
      << fixed(s.final_stats.q3) << "]\n"
      << "time to threshold (environment steps):\n";
  for (const auto& row : s.time_to_threshold) {
    out << "  V >= " << fixed(row.threshold, 2) << ": " << fixed(row.mean_steps, 1) << " steps ("
        << fixed(row.not_reached_pct, 1) << "% not reached), wall " << fixed(row.mean_seconds, 3) << " s\n";
  }
  out << "action norm steps 1-20 " << fixed(harness::curve_mean(s.action_norm_curve, 1, 20), 5) << ", 81-100 "
      << fixed(harness::curve_mean(s.action_norm_curve, 81, 100), 5) << "\n"
      << "max |frame V - V| " << std::scientific << std::setprecision(2) << s.max_visibility_gap << std::defaultfloat
      << "\n";
}

int cmd_evaluate(const harness::RunConfig& cfg, std::ostream& out) {
  harness::CheckpointInfo info;
  const auto agent = agent_for(cfg, info);
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  harness::TrajectoryWriter writer(dir / "trajectory.jsonl",
                                   harness::evaluation_header(cfg, cfg.checkpoint, info.file_sha256));
  const auto records = harness::run_greedy_episodes(cfg.env, agent->actor, cfg.seed, cfg.episodes,
                                                    [&writer](const harness::TrajectoryRecord& r) { writer.write(r); });
  writer.flush();
  const harness::EvalSummary summary = harness::summarize(records, cfg.env.horizon);
  std::ofstream(dir / "summary.json") << harness::to_json(summary).dump(2) << "\n";
  print_summary(summary, out);
  out << "trajectory " << (dir / "trajectory.jsonl").string() << "\nsummary " << (dir / "summary.json").string()
      << "\n";
  return kExitOk;
}

int cmd_replay(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.trajectory.empty()) throw ConfigError("replay needs a trajectory file");
  harness::TrajectoryLog log;
  try {
    log = harness::read_trajectory(o.trajectory);
  } catch (const harness::TrajectoryError& e) {
    throw ConfigError(e.what());
  }
  std::string checkpoint = o.checkpoint.value_or(log.header.value("checkpoint", ""));
  std::unique_ptr<td3::Agent> agent;
  if (!checkpoint.empty() && fs::exists(checkpoint)) {
    harness::CheckpointInfo info;
    agent = harness::load_agent(checkpoint, &info);
    const std::string logged = log.header.value("checkpoint_sha256", "");
    if (!logged.empty() && logged != info.file_sha256) {
      err << "checkpoint " << checkpoint << " differs from the one that produced the log\n";
      return kExitReplayMismatch;
    }
  } else {
    out << "no checkpoint available; replaying logged actions only\n";
  }
  harness::ReplayReport report;
  try {
    report = harness::replay_trajectory(log, agent ? &agent->actor : nullptr);
  } catch (const harness::TrajectoryError& e) {
    throw ConfigError(e.what());
  }
  if (!report.match) {
    // Line numbers count the header as line 1.
    err << "replay mismatch at line " << report.first_mismatch + 2 << " (" << report.message << ")\n";
    return kExitReplayMismatch;
  }
  out << "replay matched " << report.checked << " records bit-exactly"
      << (agent ? " (policy actions recomputed)" : "") << "\n";
  return kExitOk;
}

env::ControlState parse_state(const std::string& text) {
  env::ControlState c;
  std::stringstream ss(text);
  std::string item;
  std::size_t i = 0;
  while (std::getline(ss, item, ',')) {
    if (i >= env::kControls) throw ConfigError("--state takes 5 comma-separated values");
    try {
      std::size_t used = 0;
      c.values[i] = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("--state value '" + item + "' is not a number");
    }
    ++i;
  }
  if (i != env::kControls && !text.empty()) throw ConfigError("--state takes 5 comma-separated values");
  if (!c.within_bounds()) throw ConfigError("--state lies outside the deflection bounds");
  return c;
}

int cmd_render(const harness::RunConfig& cfg, const Options& o, std::ostream& out) {
  const env::ControlState ctrl = parse_state(o.state);
  env::EnvConfig ec = cfg.env;
  ec.obs_mode = env::ObsMode::kFrames;
  env::InterferometerEnv environment(ec);
  const auto reset = environment.reset_to(cfg.seed, ctrl);
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  const auto& obs = reset.observation;
  for (int f = 0; f < obs.frames; ++f) {
    std::ostringstream name;
    name << "frame_" << std::setw(2) << std::setfill('0') << f << ".png";
    const auto png = harness::encode_png_gray8(harness::to_gray8(obs.frame(f)), obs.size, obs.size);
    std::ofstream(dir / name.str(), std::ios::binary).write(reinterpret_cast<const char*>(png.data()),
                                                             static_cast<std::streamsize>(png.size()));
  }
  const env::BeamPair beams = environment.beams();
  const double v_frames = optics::detector_visibility(beams.upper, beams.lower);
  const double v_camera = optics::visibility_dense_sweep(beams.upper, beams.lower, ec.fov, ec.pixels);
  const nlohmann::json info = {{"control_state", ctrl.values},
                               {"radius", environment.episode_radius()},
                               {"visibility", reset.info.visibility_noiseless},
                               {"visibility_frames", v_frames},
                               {"visibility_camera_sweep", v_camera},
                               {"frames", obs.frames}};
  std::ofstream(dir / "render.json") << info.dump(2) << "\n";
  out << obs.frames << " frames -> " << dir.string() << "\nvisibility " << fixed(reset.info.visibility_noiseless, 6)
      << "  frame-based " << fixed(v_frames, 6) << "  camera sweep " << fixed(v_camera, 6) << "\n";
  return kExitOk;
}

int cmd_serve(const harness::RunConfig& cfg, std::ostream& out) {
  harness::SessionManager sessions(cfg.env);
  harness::SessionServer server(sessions, "0.0.0.0", static_cast<std::uint16_t>(cfg.port));
  server.start(static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
  out << "serving sessions on ws://0.0.0.0:" << server.port() << "/ (Ctrl-C to stop)\n" << std::flush;
  server.wait_for_shutdown_signal();
  return kExitOk;
}

void add_common(CLI::App* cmd, Options& o, bool with_port = false) {
  cmd->add_option("--config", o.config, "INI configuration file");
  cmd->add_option("--set", o.overrides, "override a config key: section.key=value (repeatable)");
  cmd->add_option("--seed", o.seed, "run seed");
  cmd->add_option("--episodes", o.episodes, "evaluation episodes");
  cmd->add_option("--checkpoint", o.checkpoint, "checkpoint file");
  cmd->add_option("--obs-mode", o.obs_mode, "observation mode")->check(CLI::IsMember({"frames", "vector"}));
  cmd->add_option("--randomization", o.randomization, "on, off or no-<item>");
  cmd->add_option("--out", o.out_dir, "output directory");
  if (with_port) cmd->add_option("--port", o.port, "listening port");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Vision-based Mach-Zehnder interferometer alignment: simulator, TD3 training and evaluation"};
  app.require_subcommand(1);
  Options o;
  auto* train = app.add_subcommand("train", "train a TD3 agent");
  auto* evaluate = app.add_subcommand("evaluate", "run greedy episodes, write trajectory and summary");
  auto* replay = app.add_subcommand("replay", "re-execute a trajectory log and verify it bit for bit");
  auto* render = app.add_subcommand("render", "write the 16 frames of a control state as PNG");
  auto* serve = app.add_subcommand("serve", "start the websocket session service");
  for (auto* cmd : {train, evaluate, replay, render}) add_common(cmd, o);
  add_common(serve, o, true);
  replay->add_option("trajectory", o.trajectory, "trajectory .jsonl")->required();
  render->add_option("--state", o.state, "five control values: mx,my,bx,by,lens (rad,rad,rad,rad,mm)");

  try {
    std::vector<const char*> argv{"mzalign"};
    for (const auto& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (replay->parsed()) return cmd_replay(o, out, err);
    const harness::RunConfig cfg = resolve(o);
    if (train->parsed()) return cmd_train(cfg, out);
    if (evaluate->parsed()) return cmd_evaluate(cfg, out);
    if (render->parsed()) return cmd_render(cfg, o, out);
    if (serve->parsed()) return cmd_serve(cfg, out);
  } catch (const ConfigError& e) {
    err << e.what() << "\n";
    return kExitConfig;
  } catch (const harness::CheckpointError& e) {
    err << "checkpoint: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace mzalign
