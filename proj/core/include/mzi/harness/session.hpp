#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <random>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mzi/env/interferometer_env.hpp"
#include "mzi/harness/trajectory.hpp"

namespace mzi::harness {

/// The session protocol behind the manual-alignment console. Every message is
/// a JSON object {type, session, payload}.
///
/// Requests:
///   create  {seed?, randomization? ("on"|"off"|"no-<item>"), actuator_noise?,
///            deterministic?, initial_state? [5]}
///   reset   {seed?, initial_state?}
///   step    {action: [5], units?: "physical"|"raw"}
///   history {}
/// Each create/reset/step is answered by a reply of the same type carrying
/// the step outcome and a sequence number, followed by a frame-batch with the
/// 16 frames as base64 PNG (8-bit grayscale) and their mean values in [0, 1].
/// Failures produce a single `error` reply and leave the session unchanged.
class SessionManager {
 public:
  explicit SessionManager(env::EnvConfig base);

  std::vector<nlohmann::json> handle(const nlohmann::json& message);
  /// Parses and handles one text message; replies are serialised JSON.
  std::vector<std::string> handle_text(std::string_view text);

  std::size_t session_count() const;

 private:
  struct Session;

  std::vector<nlohmann::json> create(const nlohmann::json& payload);
  std::vector<nlohmann::json> reset(Session& s, const std::string& id, const nlohmann::json& payload);
  std::vector<nlohmann::json> step(Session& s, const std::string& id, const nlohmann::json& payload);
  nlohmann::json history(const Session& s, const std::string& id) const;
  std::vector<nlohmann::json> observed(Session& s, const std::string& id, const std::string& type,
                                       const env::Observation& obs, nlohmann::json outcome);
  std::shared_ptr<Session> find(const std::string& id) const;
  std::uint64_t fresh_seed();

  env::EnvConfig base_;
  mutable std::shared_mutex map_mutex_;
  std::unordered_map<std::string, std::shared_ptr<Session>> sessions_;
  std::mutex id_mutex_;
  std::mt19937_64 id_rng_;
};

nlohmann::json protocol_error(const std::string& session, const std::string& code, const std::string& message);

}  // namespace mzi::harness
