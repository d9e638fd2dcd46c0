#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>

#include "mzi/nn/network_spec.hpp"
#include "mzi/td3/trainer.hpp"

namespace mzi::harness {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json spec_to_json(const nn::NetworkSpec& spec);
nn::NetworkSpec spec_from_json(const nlohmann::json& j);

/// Hash of the actor and critic layouts; a checkpoint only loads into an
/// agent with the same hash.
std::string spec_hash(const nn::NetworkSpec& actor, const nn::NetworkSpec& critic);

struct CheckpointInfo {
  nn::NetworkSpec actor_spec;
  nn::NetworkSpec critic_spec;
  std::int64_t step = 0;
  std::string tag;
  std::string config_digest;
  std::string file_sha256;
};

/// File layout: the 8-byte magic "MZICKPT1", a little-endian u64 header
/// length, a JSON header (layouts, spec hash, named tensors with shapes and
/// offsets, payload hash), then the float32 little-endian parameters of
/// actor, critic1, critic2 and their targets.
void save_checkpoint(const std::filesystem::path& path, const td3::Agent& agent, std::int64_t step,
                     const std::string& tag, const std::string& config_digest);

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

/// Loads into an agent whose layouts must match the stored spec hash.
CheckpointInfo load_checkpoint(const std::filesystem::path& path, td3::Agent& agent);

/// Builds an agent from the layouts stored in the file.
std::unique_ptr<td3::Agent> load_agent(const std::filesystem::path& path, CheckpointInfo* info = nullptr);

}  // namespace mzi::harness
