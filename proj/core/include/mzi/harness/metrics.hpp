#pragma once

#include <nlohmann/json.hpp>
#include <span>
#include <vector>

#include "mzi/env/action_space.hpp"
#include "mzi/harness/trajectory.hpp"

namespace mzi::harness {

inline constexpr int kFinalWindow = 40;
inline constexpr double kParallelTolerance = 0.1;

/// Mirror and splitter tilts on one axis cancel in direction (|dtheta +
/// dbeta| <= 0.1 max(|dtheta|, |dbeta|), both nonzero) so the step moves the
/// beam sideways without turning it; either axis qualifies the action.
bool is_parallel_action(const env::PhysicalAction& a);

struct ThresholdRow {
  double threshold = 0.0;
  double mean_steps = 0.0;    ///< over episodes that cross; NaN if none do
  double mean_seconds = 0.0;  ///< wall-clock since reset, same episodes
  int reached = 0;
  double not_reached_pct = 0.0;
};

struct Quartiles {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
};

/// Per-step curves are indexed by step - 1 and average over the episodes that
/// contribute at that step; entries with no contributor are NaN. Visibility
/// curves only count safe steps (an unsafe episode drops out at the failing
/// step); action curves count every executed step.
struct EvalSummary {
  int episodes = 0;
  int unsafe_episodes = 0;
  std::vector<double> visibility_curve;
  std::vector<double> visibility_frames_curve;
  std::vector<int> alive;  ///< contributors to visibility_curve
  /// Mean over the last 40 steps per episode, missing steps counting as 0.
  std::vector<double> final_visibility;
  Quartiles final_stats;
  std::vector<ThresholdRow> time_to_threshold;
  std::vector<double> action_norm_curve;
  std::vector<double> parallel_action_pct;
  double mean_return = 0.0;
  /// Largest |frame-based - noiseless| visibility over all records.
  double max_visibility_gap = 0.0;

  double unsafe_rate() const { return episodes ? static_cast<double>(unsafe_episodes) / episodes : 0.0; }
  double mean_final_visibility() const { return final_stats.mean; }
};

/// Records grouped by episode id, in order of appearance.
std::vector<std::vector<TrajectoryRecord>> split_episodes(std::span<const TrajectoryRecord> records);

std::vector<ThresholdRow> time_to_threshold(std::span<const TrajectoryRecord> records,
                                            std::span<const double> thresholds);

/// Percentage of episodes whose action at each step is parallel.
std::vector<double> parallel_action_fraction(std::span<const TrajectoryRecord> records, int horizon = 100);

Quartiles quartiles(std::vector<double> values);

EvalSummary summarize(std::span<const TrajectoryRecord> records, int horizon = 100);

/// Mean of curve entries first..last (1-based, inclusive), skipping NaN.
double curve_mean(std::span<const double> curve, int first, int last);

nlohmann::json to_json(const EvalSummary& s);

}  // namespace mzi::harness
