#include "mzi/harness/session.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "mzi/harness/encoding.hpp"
#include "mzi/harness/evaluation.hpp"

namespace mzi::harness {

struct SessionManager::Session {
  explicit Session(env::EnvConfig cfg) : env(std::move(cfg)) {}

  std::mutex mutex;
  env::InterferometerEnv env;
  std::vector<TrajectoryRecord> history;
  int episode = -1;
  std::uint64_t reset_seed = 0;
  double episode_start = 0.0;
  std::uint64_t seq = 0;
};

namespace {

/// Rejected request; the session has not been touched.
struct ProtocolError {
  std::string code;
  std::string message;
};

double unix_seconds() {
  return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
}

nlohmann::json payload_of(const nlohmann::json& message) {
  const auto it = message.find("payload");
  if (it == message.end() || it->is_null()) return nlohmann::json::object();
  if (!it->is_object()) throw ProtocolError{"malformed", "payload must be an object"};
  return *it;
}

std::array<double, env::kControls> five_numbers(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != env::kControls) {
    throw ProtocolError{"malformed", std::string(what) + " must be an array of 5 numbers"};
  }
  std::array<double, env::kControls> out{};
  for (std::size_t i = 0; i < env::kControls; ++i) {
    if (!j[i].is_number()) throw ProtocolError{"malformed", std::string(what) + " must be an array of 5 numbers"};
    out[i] = j[i].get<double>();
    if (!std::isfinite(out[i])) throw ProtocolError{"malformed", std::string(what) + " must be finite"};
  }
  return out;
}

std::optional<env::ControlState> initial_state(const nlohmann::json& payload) {
  if (!payload.contains("initial_state")) return std::nullopt;
  env::ControlState c;
  c.values = five_numbers(payload["initial_state"], "initial_state");
  if (!c.within_bounds()) throw ProtocolError{"malformed", "initial_state outside the deflection bounds"};
  return c;
}

nlohmann::json frame_batch(const env::Observation& obs, std::uint64_t seq, int step) {
  nlohmann::json frames = nlohmann::json::array();
  nlohmann::json totals = nlohmann::json::array();
  for (int f = 0; f < obs.frames; ++f) {
    const auto values = obs.frame(f);
    const auto png = encode_png_gray8(to_gray8(values), obs.size, obs.size);
    frames.push_back(base64_encode(png));
    totals.push_back(std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size()));
  }
  return {{"seq", seq}, {"step", step}, {"width", obs.size}, {"height", obs.size},
          {"encoding", "png-gray8-base64"}, {"frames", frames}, {"totals", totals}};
}

}  // namespace

nlohmann::json protocol_error(const std::string& session, const std::string& code, const std::string& message) {
  return {{"type", "error"},
          {"session", session.empty() ? nlohmann::json(nullptr) : nlohmann::json(session)},
          {"payload", {{"code", code}, {"message", message}}}};
}

SessionManager::SessionManager(env::EnvConfig base) : base_(std::move(base)), id_rng_(std::random_device{}()) {
  base_.obs_mode = env::ObsMode::kFrames;
  base_.validate();
}

std::size_t SessionManager::session_count() const {
  std::shared_lock lock(map_mutex_);
  return sessions_.size();
}

std::uint64_t SessionManager::fresh_seed() {
  std::lock_guard lock(id_mutex_);
  return id_rng_();
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& id) const {
  std::shared_lock lock(map_mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ProtocolError{"unknown-session", "no session '" + id + "'"};
  return it->second;
}

std::vector<nlohmann::json> SessionManager::observed(Session& s, const std::string& id, const std::string& type,
                                                     const env::Observation& obs, nlohmann::json outcome) {
  const std::uint64_t seq = ++s.seq;
  outcome["seq"] = seq;
  outcome["episode"] = s.episode;
  outcome["control_state"] = s.env.control_state().values;
  outcome["done"] = s.env.done();
  return {{{"type", type}, {"session", id}, {"payload", std::move(outcome)}},
          {{"type", "frame-batch"}, {"session", id}, {"payload", frame_batch(obs, seq, s.env.step_count())}}};
}

std::vector<nlohmann::json> SessionManager::create(const nlohmann::json& payload) {
  env::EnvConfig cfg = base_;
  if (payload.value("deterministic", false)) {
    cfg.randomization = env::RandomizationConfig::disabled();
    cfg.actuator_noise = false;
  }
  if (payload.contains("randomization")) {
    if (!payload["randomization"].is_string()) throw ProtocolError{"malformed", "randomization must be a string"};
    try {
      cfg.randomization = env::RandomizationConfig::from_name(payload["randomization"].get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ProtocolError{"malformed", e.what()};
    }
  }
  if (payload.contains("actuator_noise")) {
    if (!payload["actuator_noise"].is_boolean()) throw ProtocolError{"malformed", "actuator_noise must be a boolean"};
    cfg.actuator_noise = payload["actuator_noise"].get<bool>();
  }
  auto session = std::make_shared<Session>(cfg);
  std::string id;
  {
    std::lock_guard lock(id_mutex_);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(id_rng_()));
    id = buf;
  }
  std::lock_guard session_lock(session->mutex);
  auto replies = reset(*session, id, payload);
  replies.front()["type"] = "create";
  replies.front()["payload"]["bounds"] = env::kControlBounds;
  {
    std::unique_lock lock(map_mutex_);
    sessions_.emplace(id, std::move(session));
  }
  return replies;
}

std::vector<nlohmann::json> SessionManager::reset(Session& s, const std::string& id, const nlohmann::json& payload) {
  std::uint64_t seed = 0;
  if (payload.contains("seed")) {
    const auto& j = payload["seed"];
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
      throw ProtocolError{"malformed", "seed must be a non-negative integer"};
    }
    seed = payload["seed"].get<std::uint64_t>();
  } else {
    seed = fresh_seed();
  }
  const auto start_state = initial_state(payload);
  const env::ResetResult res = start_state ? s.env.reset_to(seed, *start_state) : s.env.reset(seed);
  ++s.episode;
  s.reset_seed = seed;
  s.episode_start = unix_seconds();
  const env::BeamPair beams = s.env.beams();
  return observed(s, id, "reset", res.observation,
                  {{"step", 0},
                   {"seed", seed},
                   {"reward", nullptr},
                   {"visibility", res.info.visibility_noiseless},
                   {"visibility_frames", optics::detector_visibility(beams.upper, beams.lower)},
                   {"radius", s.env.episode_radius()}});
}

std::vector<nlohmann::json> SessionManager::step(Session& s, const std::string& id, const nlohmann::json& payload) {
  if (!payload.contains("action")) throw ProtocolError{"malformed", "step needs an action"};
  const auto values = five_numbers(payload["action"], "action");
  const std::string units = payload.value("units", std::string("physical"));
  env::RawAction raw;
  env::PhysicalAction physical;
  if (units == "physical") {
    physical.deltas = values;
  } else if (units == "raw") {
    for (double v : values) {
      if (std::abs(v) > 1.0) throw ProtocolError{"malformed", "raw actions must lie in [-1, 1]"};
    }
    raw.values = values;
    physical = env::raw_to_physical(raw);
  } else {
    throw ProtocolError{"malformed", "units must be 'physical' or 'raw'"};
  }
  if (s.env.done()) throw ProtocolError{"episode-done", "episode finished; send reset"};

  env::StepResult res;
  TrajectoryRecord r = step_and_record(s.env, raw, physical, s.episode, s.reset_seed, s.episode_start, &res);
  s.history.push_back(r);
  return observed(s, id, "step", res.observation,
                  {{"step", r.step},
                   {"units", units},
                   {"physical_action", r.physical.deltas},
                   {"reward", r.reward},
                   {"visibility", r.visibility},
                   {"visibility_frames", r.visibility_frames},
                   {"terminated_unsafe", r.terminated_unsafe},
                   {"truncated", r.truncated}});
}

nlohmann::json SessionManager::history(const Session& s, const std::string& id) const {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : s.history) records.push_back(to_json(r));
  return {{"type", "history"},
          {"session", id},
          {"payload",
           {{"episode", s.episode},
            {"step", s.env.step_count()},
            {"control_state", s.env.control_state().values},
            {"done", s.env.done()},
            {"seq", s.seq},
            {"records", records}}}};
}

std::vector<nlohmann::json> SessionManager::handle(const nlohmann::json& message) {
  std::string id;
  try {
    if (!message.is_object()) throw ProtocolError{"malformed", "message must be an object"};
    if (!message.contains("type") || !message["type"].is_string()) {
      throw ProtocolError{"malformed", "message needs a string 'type'"};
    }
    const std::string type = message["type"].get<std::string>();
    if (type != "create") {
      if (!message.contains("session") || !message["session"].is_string()) {
        throw ProtocolError{"malformed", "message needs a string 'session'"};
      }
      id = message["session"].get<std::string>();
    }
    const nlohmann::json payload = payload_of(message);
    if (type == "create") return create(payload);

    const auto session = find(id);
    std::lock_guard lock(session->mutex);
    if (type == "reset") return reset(*session, id, payload);
    if (type == "step") return step(*session, id, payload);
    if (type == "history") return {history(*session, id)};
    throw ProtocolError{"bad-type", "unknown message type '" + type + "'"};
  } catch (const ProtocolError& e) {
    return {protocol_error(id, e.code, e.message)};
  } catch (const std::exception& e) {
    return {protocol_error(id, "internal", e.what())};
  }
}

std::vector<std::string> SessionManager::handle_text(std::string_view text) {
  nlohmann::json message;
  try {
    message = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    return {protocol_error("", "malformed", std::string("invalid JSON: ") + e.what()).dump()};
  }
  std::vector<std::string> out;
  for (const auto& reply : handle(message)) out.push_back(reply.dump());
  return out;
}

}  // namespace mzi::harness
