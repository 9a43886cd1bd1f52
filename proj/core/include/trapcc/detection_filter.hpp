#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trapcc/network.hpp"
#include "trapcc/scene_io.hpp"

namespace trapcc {

struct FilterConfig {
  double matching_threshold = 0.3;
  double detection_threshold = 0.5;
  double contour_weight = 0.5;
  double crop_margin = 0.1;
  SceneGraphOptions graph;

  void validate() const;
};

enum class FilterReason { HighConfidence, ScoreBelowThreshold, Deleted };

const char* to_string(FilterReason r);

struct FilterDecision {
  int frame = 0;
  int object_id = 0;
  double detection_score = 1.0;
  std::optional<double> matching_score;  // absent when no completion ran
  bool kept = true;
  FilterReason reason = FilterReason::HighConfidence;
  std::string note;
};

struct FilterCounters {
  std::size_t completions = 0;
  std::size_t high_confidence = 0;
  std::size_t kept_low_confidence = 0;
  std::size_t deleted = 0;
  std::size_t failures = 0;
};

/// (1 - w) * mcd(raw, completed) + w * mean contour difference over the three
/// views. Both clouds in the metric object frame.
double matching_score(const PointCloud& raw, const PointCloud& completed, double contour_weight);

/// Decides every object of one frame. Objects without a detection score are
/// treated as confident. A low-confidence object with no points in its box is
/// deleted and the reason noted.
std::vector<FilterDecision> filter_frame(const nn::NetworkParams& params, const SceneFrame& frame,
                                         const FilterConfig& config, FilterCounters& counters);

std::vector<FilterDecision> filter_scenes(const nn::NetworkParams& params, const SceneSet& scenes,
                                          const FilterConfig& config, FilterCounters& counters);

/// CSV header: frame,object_id,detection_score,matching_score,kept,reason
void write_decisions_csv(const std::filesystem::path& path, std::span<const FilterDecision> decisions);

}  // namespace trapcc
