#include "mzi/harness/trajectory.hpp"

#include <cstring>

#include "mzi/harness/encoding.hpp"

namespace mzi::harness {
namespace {

template <std::size_t N>
std::array<double, N> array_at(const nlohmann::json& j, const char* key) {
  const auto v = j.at(key).get<std::vector<double>>();
  if (v.size() != N) throw TrajectoryError(std::string("field '") + key + "' has the wrong length");
  std::array<double, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

}  // namespace

nlohmann::json to_json(const TrajectoryRecord& r) {
  return {{"kind", "step"},
          {"episode", r.episode},
          {"step", r.step},
          {"reset_seed", r.reset_seed},
          {"radius", r.radius},
          {"ctrl_before", r.before.values},
          {"ctrl_after", r.after.values},
          {"raw_action", r.raw.values},
          {"physical_action", r.physical.deltas},
          {"reward", r.reward},
          {"visibility", r.visibility},
          {"visibility_frames", r.visibility_frames},
          {"done", r.done},
          {"terminated_unsafe", r.terminated_unsafe},
          {"truncated", r.truncated},
          {"draws_digest", r.draws_digest},
          {"timestamp", r.timestamp},
          {"elapsed", r.elapsed}};
}

TrajectoryRecord record_from_json(const nlohmann::json& j) {
  TrajectoryRecord r;
  try {
    r.episode = j.at("episode").get<int>();
    r.step = j.at("step").get<int>();
    r.reset_seed = j.at("reset_seed").get<std::uint64_t>();
    r.radius = j.at("radius").get<double>();
    r.before.values = array_at<env::kControls>(j, "ctrl_before");
    r.after.values = array_at<env::kControls>(j, "ctrl_after");
    r.raw.values = array_at<env::kControls>(j, "raw_action");
    r.physical.deltas = array_at<env::kControls>(j, "physical_action");
    r.reward = j.at("reward").get<double>();
    r.visibility = j.at("visibility").get<double>();
    r.visibility_frames = j.at("visibility_frames").get<double>();
    r.done = j.at("done").get<bool>();
    r.terminated_unsafe = j.at("terminated_unsafe").get<bool>();
    r.truncated = j.at("truncated").get<bool>();
    r.draws_digest = j.at("draws_digest").get<std::string>();
    r.timestamp = j.at("timestamp").get<double>();
    r.elapsed = j.at("elapsed").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw TrajectoryError(std::string("malformed trajectory record: ") + e.what());
  }
  return r;
}

std::string draws_digest(const env::StepDraws& d) {
  std::vector<std::uint8_t> bytes;
  auto put = [&bytes](const auto& v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(v));
  };
  put(d.brightness);
  put(static_cast<std::int64_t>(d.cyclic_shift));
  put(d.duty);
  for (double p : d.phase_offsets) put(p);
  put(d.pixel_noise_seed);
  return sha256_hex(bytes).substr(0, 16);
}

TrajectoryWriter::TrajectoryWriter(const std::filesystem::path& path, nlohmann::json header) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::trunc);
  if (!out_) throw TrajectoryError("cannot write trajectory '" + path.string() + "'");
  header["kind"] = "header";
  header["format"] = kTrajectoryFormat;
  out_ << header.dump() << '\n';
}

void TrajectoryWriter::write(const TrajectoryRecord& r) { out_ << to_json(r).dump() << '\n'; }

TrajectoryLog read_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TrajectoryError("cannot read trajectory '" + path.string() + "'");
  TrajectoryLog log;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw TrajectoryError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (line_no == 1) {
      if (j.value("kind", "") != "header" || j.value("format", "") != kTrajectoryFormat) {
        throw TrajectoryError("'" + path.string() + "' has no trajectory header");
      }
      log.header = std::move(j);
    } else {
      log.records.push_back(record_from_json(j));
    }
  }
  if (log.header.is_null()) throw TrajectoryError("'" + path.string() + "' is empty");
  return log;
}

void check_trajectory(const std::vector<TrajectoryRecord>& records) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const bool first = i == 0 || records[i - 1].episode != r.episode;
    const int expected = first ? 1 : records[i - 1].step + 1;
    if (r.step != expected) {
      throw TrajectoryError("record " + std::to_string(i) + ": step " + std::to_string(r.step) + " in episode " +
                            std::to_string(r.episode) + ", expected " + std::to_string(expected));
    }
    for (double v : {r.visibility, r.visibility_frames}) {
      if (!(v >= 0.0 && v <= 1.0)) throw TrajectoryError("record " + std::to_string(i) + ": visibility outside [0, 1]");
    }
  }
}

}  // namespace mzi::harness
