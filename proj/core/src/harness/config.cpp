#include "mzi/harness/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "mzi/harness/encoding.hpp"

namespace mzi::harness {
namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError("config: " + std::string(key) + " = '" + std::string(value) + "' is not " +
                    std::string(expected));
}

template <typename T>
T parse_number(std::string_view key, std::string_view text, std::string_view expected) {
  T v{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) bad_value(key, text, expected);
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "on" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "off" || text == "0" || text == "no") return false;
  bad_value(key, text, "a boolean");
}

std::vector<int> parse_int_list(std::string_view key, std::string_view text) {
  std::vector<int> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    std::string_view item = text.substr(start, comma - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) out.push_back(parse_number<int>(key, item, "a list of integers"));
    start = comma + 1;
  }
  return out;
}

std::string format_int_list(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

struct Key {
  std::string name;
  std::function<std::string(const RunConfig&)> get;  // empty: write-only
  std::function<void(RunConfig&, std::string_view)> set;
};

template <typename Field>
Key real(std::string name, Field field) {
  return {name, [field](const RunConfig& c) { return format_double(field(c)); },
          [field, name](RunConfig& c, std::string_view v) { field(c) = parse_number<double>(name, v, "a number"); }};
}

template <typename T, typename Field>
Key integer(std::string name, Field field) {
  return {name, [field](const RunConfig& c) { return std::to_string(field(c)); },
          [field, name](RunConfig& c, std::string_view v) { field(c) = parse_number<T>(name, v, "an integer"); }};
}

template <typename Field>
Key boolean(std::string name, Field field) {
  return {name, [field](const RunConfig& c) { return std::string(field(c) ? "true" : "false"); },
          [field, name](RunConfig& c, std::string_view v) { field(c) = parse_bool(name, v); }};
}

template <typename Field>
Key text(std::string name, Field field) {
  return {name, [field](const RunConfig& c) { return field(c); },
          [field](RunConfig& c, std::string_view v) { field(c) = std::string(v); }};
}

#define MZI_FIELD(expr) [](auto& c) -> auto& { return c.expr; }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    k.push_back(integer<std::uint64_t>("run.seed", MZI_FIELD(seed)));
    k.push_back(integer<int>("run.episodes", MZI_FIELD(episodes)));
    k.push_back(text("run.output_dir", MZI_FIELD(output_dir)));
    k.push_back(text("run.checkpoint", MZI_FIELD(checkpoint)));
    k.push_back(integer<int>("serve.port", MZI_FIELD(port)));

    k.push_back(integer<int>("env.horizon", MZI_FIELD(env.horizon)));
    k.push_back(real("env.fov", MZI_FIELD(env.fov)));
    k.push_back(integer<int>("env.pixels", MZI_FIELD(env.pixels)));
    k.push_back({"env.obs_mode",
                 [](const RunConfig& c) {
                   return std::string(c.env.obs_mode == env::ObsMode::kFrames ? "frames" : "vector");
                 },
                 [](RunConfig& c, std::string_view v) {
                   if (v == "frames") c.env.obs_mode = env::ObsMode::kFrames;
                   else if (v == "vector") c.env.obs_mode = env::ObsMode::kVector;
                   else bad_value("env.obs_mode", v, "frames or vector");
                 }});
    k.push_back(boolean("env.actuator_noise", MZI_FIELD(env.actuator_noise)));
    k.push_back(real("env.actuator_noise_rel", MZI_FIELD(env.actuator_noise_rel)));
    k.push_back(real("env.full_scale", MZI_FIELD(env.full_scale)));

    k.push_back(real("geometry.bs1_to_mirror2", MZI_FIELD(env.geometry.bs1_to_mirror2)));
    k.push_back(real("geometry.mirror2_to_bs2", MZI_FIELD(env.geometry.mirror2_to_bs2)));
    k.push_back(real("geometry.bs2_to_camera", MZI_FIELD(env.geometry.bs2_to_camera)));
    k.push_back(real("geometry.bs1_to_lens1", MZI_FIELD(env.geometry.bs1_to_lens1)));
    k.push_back(real("geometry.focal_length", MZI_FIELD(env.geometry.focal_length)));
    k.push_back(real("geometry.wavelength", MZI_FIELD(env.geometry.wavelength)));
    k.push_back(real("geometry.nominal_radius", MZI_FIELD(env.geometry.nominal_radius)));

    k.push_back({"randomization.preset", nullptr, [](RunConfig& c, std::string_view v) {
                   try {
                     c.env.randomization = env::RandomizationConfig::from_name(v);
                   } catch (const std::invalid_argument&) {
                     bad_value("randomization.preset", v, "on, off or no-<item>");
                   }
                 }});
    k.push_back(boolean("randomization.radius", MZI_FIELD(env.randomization.radius)));
    k.push_back(real("randomization.radius_rel", MZI_FIELD(env.randomization.radius_rel)));
    k.push_back(boolean("randomization.pixel_noise", MZI_FIELD(env.randomization.pixel_noise)));
    k.push_back(real("randomization.pixel_noise_rel", MZI_FIELD(env.randomization.pixel_noise_rel)));
    k.push_back(boolean("randomization.brightness", MZI_FIELD(env.randomization.brightness)));
    k.push_back(real("randomization.brightness_rel", MZI_FIELD(env.randomization.brightness_rel)));
    k.push_back(boolean("randomization.phase_noise", MZI_FIELD(env.randomization.phase_noise)));
    k.push_back(real("randomization.phase_noise_sigma", MZI_FIELD(env.randomization.phase_noise_sigma)));
    k.push_back(boolean("randomization.cyclic_shift", MZI_FIELD(env.randomization.cyclic_shift)));
    k.push_back(boolean("randomization.duty", MZI_FIELD(env.randomization.duty)));
    k.push_back(real("randomization.duty_min", MZI_FIELD(env.randomization.duty_min)));
    k.push_back(real("randomization.duty_max", MZI_FIELD(env.randomization.duty_max)));
    k.push_back(real("randomization.duty_nominal", MZI_FIELD(env.randomization.duty_nominal)));

    k.push_back(integer<int>("network.vector_width", MZI_FIELD(vector_width)));
    k.push_back({"network.conv_channels", [](const RunConfig& c) { return format_int_list(c.frames_actor.conv_channels); },
                 [](RunConfig& c, std::string_view v) {
                   c.frames_actor.conv_channels = parse_int_list("network.conv_channels", v);
                 }});
    k.push_back(integer<int>("network.pool_every", MZI_FIELD(frames_actor.pool_every)));
    k.push_back({"network.hidden", [](const RunConfig& c) { return format_int_list(c.frames_actor.hidden); },
                 [](RunConfig& c, std::string_view v) { c.frames_actor.hidden = parse_int_list("network.hidden", v); }});

    k.push_back(integer<std::int64_t>("td3.total_steps", MZI_FIELD(train.total_steps)));
    k.push_back(integer<int>("td3.update_every", MZI_FIELD(train.update_every)));
    k.push_back(integer<int>("td3.batch_size", MZI_FIELD(train.batch_size)));
    k.push_back(integer<int>("td3.num_epochs", MZI_FIELD(train.num_epochs)));
    k.push_back(integer<int>("td3.policy_delay", MZI_FIELD(train.policy_delay)));
    k.push_back(integer<std::int64_t>("td3.start_train_step", MZI_FIELD(train.start_train_step)));
    k.push_back(real("td3.gamma", MZI_FIELD(train.gamma)));
    k.push_back(real("td3.target_noise", MZI_FIELD(train.target_noise)));
    k.push_back(real("td3.target_clip", MZI_FIELD(train.target_clip)));
    k.push_back(real("td3.polyak", MZI_FIELD(train.polyak)));
    k.push_back(real("td3.explore_start", MZI_FIELD(train.explore_start)));
    k.push_back(real("td3.explore_end", MZI_FIELD(train.explore_end)));
    k.push_back(real("td3.actor_lr", MZI_FIELD(train.actor_lr)));
    k.push_back(real("td3.critic_lr", MZI_FIELD(train.critic_lr)));
    k.push_back(real("td3.max_grad_norm", MZI_FIELD(train.max_grad_norm)));
    k.push_back(integer<std::size_t>("td3.buffer_capacity", MZI_FIELD(train.buffer_capacity)));
    k.push_back(integer<std::int64_t>("td3.eval_every", MZI_FIELD(train.eval_every)));
    k.push_back(integer<int>("td3.eval_episodes", MZI_FIELD(train.eval_episodes)));
    k.push_back(integer<std::int64_t>("td3.checkpoint_every", MZI_FIELD(train.checkpoint_every)));
    k.push_back(boolean("td3.timeout_bootstrap", MZI_FIELD(train.timeout_bootstrap)));
    k.push_back({"td3.obs_storage",
                 [](const RunConfig& c) {
                   return std::string(c.train.obs_storage == td3::ObsStorage::kUint8 ? "uint8" : "float32");
                 },
                 [](RunConfig& c, std::string_view v) {
                   if (v == "uint8") c.train.obs_storage = td3::ObsStorage::kUint8;
                   else if (v == "float32") c.train.obs_storage = td3::ObsStorage::kFloat32;
                   else bad_value("td3.obs_storage", v, "uint8 or float32");
                 }});
    return k;
  }();
  return table;
}

#undef MZI_FIELD

const Key& find_key(std::string_view name) {
  for (const Key& k : keys()) {
    if (k.name == name) return k;
  }
  throw ConfigError("config: unknown key '" + std::string(name) + "'");
}

}  // namespace

nn::NetworkSpec RunConfig::actor_spec() const {
  if (env.obs_mode == env::ObsMode::kVector) {
    return nn::NetworkSpec::actor_vector(static_cast<int>(env::kVectorObsSize), vector_width);
  }
  nn::NetworkSpec spec = frames_actor;
  spec.input_channels = env::kFramesPerStep;
  spec.input_size = env.pixels;
  return spec;
}

nn::NetworkSpec RunConfig::critic_spec() const {
  if (env.obs_mode == env::ObsMode::kVector) {
    return nn::NetworkSpec::critic_vector(static_cast<int>(env::kVectorObsSize), vector_width);
  }
  nn::NetworkSpec spec = actor_spec();
  spec.output = 1;
  spec.action_inputs = static_cast<int>(env::kControls);
  spec.squash_output = false;
  return spec;
}

void RunConfig::validate() const {
  try {
    env.validate();
    train.validate();
    actor_spec().validate();
    critic_spec().validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (vector_width < 1) throw ConfigError("config: network.vector_width must be >= 1");
  if (episodes < 1) throw ConfigError("config: run.episodes must be >= 1");
  if (port < 0 || port > 65535) throw ConfigError("config: serve.port must lie in [0, 65535]");
}

std::string RunConfig::to_ini() const {
  std::ostringstream os;
  std::string section;
  for (const Key& k : keys()) {
    if (!k.get) continue;
    const auto dot = k.name.find('.');
    const std::string sec = k.name.substr(0, dot);
    if (sec != section) {
      os << (section.empty() ? "" : "\n") << "[" << sec << "]\n";
      section = sec;
    }
    os << k.name.substr(dot + 1) << " = " << k.get(*this) << "\n";
  }
  return os.str();
}

std::string RunConfig::digest() const { return sha256_hex(to_ini()); }

void set_value(RunConfig& cfg, std::string_view key, std::string_view value) { find_key(key).set(cfg, value); }

void apply_override(RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("config: override '" + std::string(assignment) + "' is not section.key=value");
  }
  auto trim = [](std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    return s;
  };
  set_value(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

RunConfig parse_config(std::string_view ini_text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in{std::string(ini_text)};
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config: line " + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig cfg;
  std::vector<std::pair<std::string, std::string>> entries;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config: key '" + section + "' outside any section");
    for (const auto& [key, value] : body) entries.emplace_back(section + "." + key, value.data());
  }
  // The preset resets every randomization toggle, so it must come first.
  std::stable_partition(entries.begin(), entries.end(),
                        [](const auto& e) { return e.first == "randomization.preset"; });
  for (const auto& [key, value] : entries) set_value(cfg, key, value);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const Key& k : keys()) out.push_back(k.name);
  return out;
}

}  // namespace mzi::harness
