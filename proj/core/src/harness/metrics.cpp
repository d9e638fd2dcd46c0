#include "mzi/harness/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace mzi::harness {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kThresholds[] = {0.92, 0.95, 0.98};

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

nlohmann::json curve_json(const std::vector<double>& c) {
  nlohmann::json out = nlohmann::json::array();
  for (double v : c) out.push_back(number_or_null(v));
  return out;
}

std::size_t slot(const TrajectoryRecord& r, int horizon) {
  if (r.step < 1 || r.step > horizon) throw TrajectoryError("step index outside the horizon");
  return static_cast<std::size_t>(r.step - 1);
}

double percentile(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

bool is_parallel_action(const env::PhysicalAction& a) {
  auto axis = [](double dtheta, double dbeta) {
    if (dtheta == 0.0 || dbeta == 0.0) return false;
    return std::abs(dtheta + dbeta) <= kParallelTolerance * std::max(std::abs(dtheta), std::abs(dbeta));
  };
  return axis(a.deltas[0], a.deltas[2]) || axis(a.deltas[1], a.deltas[3]);
}

std::vector<std::vector<TrajectoryRecord>> split_episodes(std::span<const TrajectoryRecord> records) {
  std::vector<std::vector<TrajectoryRecord>> out;
  std::map<int, std::size_t> index;
  for (const auto& r : records) {
    auto [it, inserted] = index.try_emplace(r.episode, out.size());
    if (inserted) out.emplace_back();
    out[it->second].push_back(r);
  }
  return out;
}

std::vector<ThresholdRow> time_to_threshold(std::span<const TrajectoryRecord> records,
                                            std::span<const double> thresholds) {
  const auto episodes = split_episodes(records);
  std::vector<ThresholdRow> rows;
  for (double t : thresholds) {
    ThresholdRow row;
    row.threshold = t;
    double steps = 0.0;
    double seconds = 0.0;
    for (const auto& ep : episodes) {
      for (const auto& r : ep) {
        if (!r.terminated_unsafe && r.visibility >= t) {
          steps += r.step;
          seconds += r.elapsed;
          ++row.reached;
          break;
        }
      }
    }
    row.mean_steps = row.reached ? steps / row.reached : kNaN;
    row.mean_seconds = row.reached ? seconds / row.reached : kNaN;
    row.not_reached_pct =
        episodes.empty() ? 0.0 : 100.0 * static_cast<double>(episodes.size() - row.reached) / episodes.size();
    rows.push_back(row);
  }
  return rows;
}

std::vector<double> parallel_action_fraction(std::span<const TrajectoryRecord> records, int horizon) {
  std::vector<int> hits(static_cast<std::size_t>(horizon), 0);
  std::vector<int> counts(static_cast<std::size_t>(horizon), 0);
  for (const auto& r : records) {
    const auto s = slot(r, horizon);
    ++counts[s];
    if (is_parallel_action(r.physical)) ++hits[s];
  }
  std::vector<double> out(static_cast<std::size_t>(horizon));
  for (std::size_t s = 0; s < out.size(); ++s) out[s] = counts[s] ? 100.0 * hits[s] / counts[s] : kNaN;
  return out;
}

Quartiles quartiles(std::vector<double> values) {
  Quartiles q;
  if (values.empty()) return q;
  std::sort(values.begin(), values.end());
  q.min = values.front();
  q.max = values.back();
  q.q1 = percentile(values, 0.25);
  q.median = percentile(values, 0.5);
  q.q3 = percentile(values, 0.75);
  q.mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  double ss = 0.0;
  for (double v : values) ss += (v - q.mean) * (v - q.mean);
  q.stddev = values.size() > 1 ? std::sqrt(ss / (values.size() - 1)) : 0.0;
  return q;
}

EvalSummary summarize(std::span<const TrajectoryRecord> records, int horizon) {
  EvalSummary s;
  const auto h = static_cast<std::size_t>(horizon);
  std::vector<double> vis(h, 0.0), vis_frames(h, 0.0), norms(h, 0.0);
  std::vector<int> acted(h, 0);
  s.alive.assign(h, 0);
  const int window = std::min(kFinalWindow, horizon);

  const auto episodes = split_episodes(records);
  s.episodes = static_cast<int>(episodes.size());
  for (const auto& ep : episodes) {
    std::vector<double> per_step(h, 0.0);
    bool unsafe = false;
    for (const auto& r : ep) {
      const auto k = slot(r, horizon);
      s.mean_return += r.reward;
      norms[k] += r.physical.norm();
      ++acted[k];
      s.max_visibility_gap = std::max(s.max_visibility_gap, std::abs(r.visibility_frames - r.visibility));
      if (r.terminated_unsafe) {
        unsafe = true;
        continue;
      }
      vis[k] += r.visibility;
      vis_frames[k] += r.visibility_frames;
      ++s.alive[k];
      per_step[k] = r.visibility;
    }
    s.unsafe_episodes += unsafe ? 1 : 0;
    s.final_visibility.push_back(std::accumulate(per_step.end() - window, per_step.end(), 0.0) / window);
  }

  s.visibility_curve.resize(h);
  s.visibility_frames_curve.resize(h);
  s.action_norm_curve.resize(h);
  for (std::size_t k = 0; k < h; ++k) {
    s.visibility_curve[k] = s.alive[k] ? vis[k] / s.alive[k] : kNaN;
    s.visibility_frames_curve[k] = s.alive[k] ? vis_frames[k] / s.alive[k] : kNaN;
    s.action_norm_curve[k] = acted[k] ? norms[k] / acted[k] : kNaN;
  }
  if (s.episodes) s.mean_return /= s.episodes;
  s.final_stats = quartiles(s.final_visibility);
  s.time_to_threshold = time_to_threshold(records, kThresholds);
  s.parallel_action_pct = parallel_action_fraction(records, horizon);
  return s;
}

double curve_mean(std::span<const double> curve, int first, int last) {
  double sum = 0.0;
  int n = 0;
  for (int i = first; i <= last && i <= static_cast<int>(curve.size()); ++i) {
    const double v = curve[static_cast<std::size_t>(i - 1)];
    if (std::isfinite(v)) {
      sum += v;
      ++n;
    }
  }
  return n ? sum / n : kNaN;
}

nlohmann::json to_json(const EvalSummary& s) {
  nlohmann::json thresholds = nlohmann::json::array();
  for (const auto& row : s.time_to_threshold) {
    thresholds.push_back({{"threshold", row.threshold},
                          {"mean_steps", number_or_null(row.mean_steps)},
                          {"mean_wall_seconds", number_or_null(row.mean_seconds)},
                          {"reached", row.reached},
                          {"not_reached_pct", row.not_reached_pct}});
  }
  const auto& q = s.final_stats;
  return {{"episodes", s.episodes},
          {"unsafe_episodes", s.unsafe_episodes},
          {"unsafe_rate", s.unsafe_rate()},
          {"mean_return", s.mean_return},
          {"final_visibility",
           {{"window_steps", kFinalWindow},
            {"mean", q.mean},
            {"stddev", q.stddev},
            {"min", q.min},
            {"q1", q.q1},
            {"median", q.median},
            {"q3", q.q3},
            {"max", q.max},
            {"iqr", q.q3 - q.q1},
            {"per_episode", s.final_visibility}}},
          {"time_to_threshold", {{"unit", "environment steps"}, {"rows", thresholds}}},
          {"visibility_curve", curve_json(s.visibility_curve)},
          {"visibility_frames_curve", curve_json(s.visibility_frames_curve)},
          {"alive", s.alive},
          {"action_norm_curve", curve_json(s.action_norm_curve)},
          {"parallel_action_pct", curve_json(s.parallel_action_pct)},
          {"max_visibility_gap", s.max_visibility_gap}};
}

}  // namespace mzi::harness
