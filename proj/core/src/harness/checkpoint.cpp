#include "mzi/harness/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mzi/harness/encoding.hpp"

namespace mzi::harness {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoints are written little-endian");

constexpr char kMagic[8] = {'M', 'Z', 'I', 'C', 'K', 'P', 'T', '1'};

struct Slot {
  const char* name;
  nn::Network<float> td3::Agent::*member;
};

constexpr Slot kSlots[] = {
    {"actor", &td3::Agent::actor},
    {"critic1", &td3::Agent::critic1},
    {"critic2", &td3::Agent::critic2},
    {"actor_target", &td3::Agent::actor_target},
    {"critic1_target", &td3::Agent::critic1_target},
    {"critic2_target", &td3::Agent::critic2_target},
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read checkpoint '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Parsed {
  nlohmann::json header;
  std::span<const std::uint8_t> payload;
};

Parsed parse(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  const std::string where = " in '" + path.string() + "'";
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw CheckpointError("not a checkpoint" + where);
  }
  std::uint64_t header_len = 0;
  std::memcpy(&header_len, bytes.data() + 8, 8);
  if (header_len > bytes.size() - 16) throw CheckpointError("truncated header" + where);
  Parsed p;
  try {
    p.header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("corrupt header" + where + ": " + e.what());
  }
  p.payload = std::span(bytes).subspan(16 + header_len);
  if (p.header.value("dtype", "") != "float32") throw CheckpointError("unsupported dtype" + where);
  if (sha256_hex(p.payload) != p.header.value("payload_sha256", "")) {
    throw CheckpointError("payload hash mismatch" + where);
  }
  return p;
}

CheckpointInfo info_from(const nlohmann::json& h, const std::vector<std::uint8_t>& bytes) {
  CheckpointInfo info;
  try {
    info.actor_spec = spec_from_json(h.at("actor_spec"));
    info.critic_spec = spec_from_json(h.at("critic_spec"));
    info.step = h.at("step").get<std::int64_t>();
    info.tag = h.at("tag").get<std::string>();
    info.config_digest = h.at("config_digest").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("incomplete checkpoint header: ") + e.what());
  }
  if (spec_hash(info.actor_spec, info.critic_spec) != h.value("spec_hash", "")) {
    throw CheckpointError("checkpoint spec hash does not match its layouts");
  }
  info.file_sha256 = sha256_hex(bytes);
  return info;
}

void fill(td3::Agent& agent, const nlohmann::json& header, std::span<const std::uint8_t> payload) {
  const auto& networks = header.at("networks");
  if (networks.size() != std::size(kSlots)) throw CheckpointError("checkpoint network count mismatch");
  for (std::size_t i = 0; i < std::size(kSlots); ++i) {
    const auto& entry = networks[i];
    auto params = (agent.*kSlots[i].member).parameters();
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto count = entry.at("count").get<std::size_t>();
    if (entry.at("name").get<std::string>() != kSlots[i].name || count != params.size()) {
      throw CheckpointError(std::string("checkpoint tensor layout mismatch for ") + kSlots[i].name);
    }
    if ((offset + count) * sizeof(float) > payload.size()) throw CheckpointError("truncated payload");
    std::memcpy(params.data(), payload.data() + offset * sizeof(float), count * sizeof(float));
  }
}

}  // namespace

nlohmann::json spec_to_json(const nn::NetworkSpec& s) {
  return {{"input_channels", s.input_channels}, {"input_size", s.input_size},
          {"conv_channels", s.conv_channels},   {"pool_every", s.pool_every},
          {"hidden", s.hidden},                 {"output", s.output},
          {"action_inputs", s.action_inputs},   {"squash_output", s.squash_output}};
}

nn::NetworkSpec spec_from_json(const nlohmann::json& j) {
  nn::NetworkSpec s;
  s.input_channels = j.at("input_channels").get<int>();
  s.input_size = j.at("input_size").get<int>();
  s.conv_channels = j.at("conv_channels").get<std::vector<int>>();
  s.pool_every = j.at("pool_every").get<int>();
  s.hidden = j.at("hidden").get<std::vector<int>>();
  s.output = j.at("output").get<int>();
  s.action_inputs = j.at("action_inputs").get<int>();
  s.squash_output = j.at("squash_output").get<bool>();
  return s;
}

std::string spec_hash(const nn::NetworkSpec& actor, const nn::NetworkSpec& critic) {
  return sha256_hex("actor:" + actor.describe() + "\ncritic:" + critic.describe());
}

void save_checkpoint(const std::filesystem::path& path, const td3::Agent& agent, std::int64_t step,
                     const std::string& tag, const std::string& config_digest) {
  std::vector<std::uint8_t> payload;
  nlohmann::json networks = nlohmann::json::array();
  std::size_t offset = 0;
  for (const Slot& slot : kSlots) {
    const auto& net = agent.*slot.member;
    const auto params = net.parameters();
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& t : net.tensors()) {
      tensors.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset + t.offset}, {"count", t.count}});
    }
    networks.push_back({{"name", slot.name}, {"offset", offset}, {"count", params.size()}, {"tensors", tensors}});
    const auto* raw = reinterpret_cast<const std::uint8_t*>(params.data());
    payload.insert(payload.end(), raw, raw + params.size_bytes());
    offset += params.size();
  }
  const nlohmann::json header = {
      {"format", 1},
      {"dtype", "float32"},
      {"byte_order", "little"},
      {"actor_spec", spec_to_json(agent.actor.spec())},
      {"critic_spec", spec_to_json(agent.critic1.spec())},
      {"spec_hash", spec_hash(agent.actor.spec(), agent.critic1.spec())},
      {"step", step},
      {"tag", tag},
      {"config_digest", config_digest},
      {"networks", networks},
      {"payload_sha256", sha256_hex(payload)},
  };
  const std::string text = header.dump();
  const std::uint64_t len = text.size();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint '" + tmp.string() + "'");
    out.write(kMagic, 8);
    out.write(reinterpret_cast<const char*>(&len), 8);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (!out) throw CheckpointError("short write to '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return info_from(parse(bytes, path).header, bytes);
}

CheckpointInfo load_checkpoint(const std::filesystem::path& path, td3::Agent& agent) {
  const auto bytes = read_file(path);
  const Parsed p = parse(bytes, path);
  CheckpointInfo info = info_from(p.header, bytes);
  if (spec_hash(agent.actor.spec(), agent.critic1.spec()) != spec_hash(info.actor_spec, info.critic_spec)) {
    throw CheckpointError("checkpoint layout " + info.actor_spec.describe() +
                          " does not match the configured actor " + agent.actor.spec().describe());
  }
  try {
    fill(agent, p.header, p.payload);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt tensor table: ") + e.what());
  }
  return info;
}

std::unique_ptr<td3::Agent> load_agent(const std::filesystem::path& path, CheckpointInfo* info) {
  const CheckpointInfo head = read_checkpoint_info(path);
  auto agent = std::make_unique<td3::Agent>(head.actor_spec, head.critic_spec);
  const CheckpointInfo loaded = load_checkpoint(path, *agent);
  if (info) *info = loaded;
  return agent;
}

}  // namespace mzi::harness
