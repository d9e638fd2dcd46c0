#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "mzi/env/interferometer_env.hpp"

namespace mzi::harness {

inline constexpr const char* kTrajectoryFormat = "mzalign-trajectory/1";

class TrajectoryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One environment step. `step` counts from 1 within an episode; wall-clock
/// fields are informational and excluded from replay comparison.
struct TrajectoryRecord {
  int episode = 0;
  int step = 0;
  std::uint64_t reset_seed = 0;
  double radius = 0.0;  ///< episode beam radius, mm
  env::ControlState before{};
  env::ControlState after{};
  env::RawAction raw{};
  env::PhysicalAction physical{};
  double reward = 0.0;
  double visibility = 0.0;         ///< noiseless ground truth
  double visibility_frames = 0.0;  ///< noiseless rendered sweep on the detector
  bool done = false;
  bool terminated_unsafe = false;
  bool truncated = false;
  std::string draws_digest;
  double timestamp = 0.0;  ///< unix seconds
  double elapsed = 0.0;    ///< seconds since the episode reset
};

nlohmann::json to_json(const TrajectoryRecord& r);
TrajectoryRecord record_from_json(const nlohmann::json& j);

/// Short hash of every randomization draw of a step.
std::string draws_digest(const env::StepDraws& d);

struct TrajectoryLog {
  nlohmann::json header;
  std::vector<TrajectoryRecord> records;
};

/// Line-delimited JSON: a header line (format, config digest, embedded
/// config, ...) followed by one line per step.
class TrajectoryWriter {
 public:
  TrajectoryWriter(const std::filesystem::path& path, nlohmann::json header);
  void write(const TrajectoryRecord& r);
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

TrajectoryLog read_trajectory(const std::filesystem::path& path);

/// Throws TrajectoryError if step indices are not contiguous from 1 within
/// each episode or a visibility leaves [0, 1].
void check_trajectory(const std::vector<TrajectoryRecord>& records);

}  // namespace mzi::harness
