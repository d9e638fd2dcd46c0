#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mzi/env/interferometer_env.hpp"
#include "mzi/nn/network_spec.hpp"
#include "mzi/td3/trainer.hpp"

namespace mzi::harness {

/// Unreadable file, unknown key, unparsable value or inconsistent settings.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything a run needs. Defaults are the paper's setup and training
/// hyperparameters; every field is a key in the INI document, named
/// `section.key` with sections run, serve, env, geometry, randomization,
/// network and td3.
struct RunConfig {
  env::EnvConfig env{};
  td3::TrainConfig train{};
  /// Hidden width of the fully connected networks over vector observations.
  int vector_width = 256;
  nn::NetworkSpec frames_actor = nn::NetworkSpec::actor_frames();
  std::uint64_t seed = 0;
  int episodes = 50;
  std::string output_dir = "runs";
  std::string checkpoint;
  int port = 8765;

  nn::NetworkSpec actor_spec() const;
  nn::NetworkSpec critic_spec() const;

  /// Throws ConfigError.
  void validate() const;
  /// Canonical INI text: every key, fixed order, round-trip exact numbers.
  std::string to_ini() const;
  /// SHA-256 of to_ini().
  std::string digest() const;
};

/// Parses INI text over the defaults. `randomization.preset` (on, off,
/// no-<item>) is applied before the individual randomization keys.
RunConfig parse_config(std::string_view ini_text);
RunConfig load_config(const std::filesystem::path& path);

/// Applies "section.key=value".
void apply_override(RunConfig& cfg, std::string_view assignment);
void set_value(RunConfig& cfg, std::string_view key, std::string_view value);

/// All settable keys in canonical order.
std::vector<std::string> config_keys();

}  // namespace mzi::harness
