#pragma once

#include <filesystem>
#include <functional>
#include <nlohmann/json.hpp>

#include "mzi/harness/config.hpp"
#include "mzi/td3/trainer.hpp"

namespace mzi::harness {

struct TrainOutcome {
  td3::TrainSummary summary;
  std::filesystem::path checkpoint;  ///< final parameters
  std::filesystem::path log;
  double wall_seconds = 0.0;
};

/// Trains with `cfg` into `out_dir`: train_log.jsonl (a header with the
/// config, then one line per episode/evaluation), checkpoint.bin at the end,
/// checkpoint_<step>.bin periodically and checkpoint_diagnostic.bin if the
/// run aborts. `progress` also sees every log line.
TrainOutcome run_training(const RunConfig& cfg, const std::filesystem::path& out_dir,
                          const std::function<void(const nlohmann::json&)>& progress = {});

}  // namespace mzi::harness
