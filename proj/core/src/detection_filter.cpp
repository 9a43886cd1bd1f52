#include "trapcc/detection_filter.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "trapcc/completion.hpp"
#include "trapcc/error.hpp"
#include "trapcc/io.hpp"
#include "trapcc/metrics.hpp"

namespace trapcc {

void FilterConfig::validate() const {
  if (!(matching_threshold >= 0.0) || !(detection_threshold >= 0.0)) {
    throw Error(ErrorCode::Config, "filter thresholds must be non-negative");
  }
  if (!(contour_weight >= 0.0 && contour_weight <= 1.0)) {
    throw Error(ErrorCode::Config, "contour_weight must lie in [0, 1]");
  }
}

const char* to_string(FilterReason r) {
  switch (r) {
    case FilterReason::HighConfidence: return "high_confidence";
    case FilterReason::ScoreBelowThreshold: return "score_below_threshold";
    case FilterReason::Deleted: return "deleted";
  }
  return "unknown";
}

double matching_score(const PointCloud& raw, const PointCloud& completed, double contour_weight) {
  require_non_empty(raw, "raw cloud");
  require_non_empty(completed, "completed cloud");
  double contour = 0.0;
  for (const View v : kAllViews) contour += contour_diff(raw, completed, v);
  contour /= static_cast<double>(std::size(kAllViews));
  return (1.0 - contour_weight) * mcd(raw, completed) + contour_weight * contour;
}

std::vector<FilterDecision> filter_frame(const nn::NetworkParams& params, const SceneFrame& frame,
                                         const FilterConfig& config, FilterCounters& counters) {
  config.validate();
  const std::vector<SceneObject> objects = frame_objects(frame);
  const auto graph = build_scene_graph(objects, config.graph);
  std::map<int, const SceneObject*> by_id;
  for (const auto& o : objects) by_id[o.object_id] = &o;

  std::vector<FilterDecision> out;
  for (const auto& obj : objects) {
    FilterDecision d;
    d.frame = frame.frame;
    d.object_id = obj.object_id;
    d.detection_score = obj.box.detection_score.value_or(1.0);
    if (d.detection_score >= config.detection_threshold) {
      d.reason = FilterReason::HighConfidence;
      ++counters.high_confidence;
      out.push_back(std::move(d));
      continue;
    }
    std::vector<const SceneObject*> nbs;
    for (const auto& n : graph.at(obj.object_id).neighbors) nbs.push_back(by_id.at(n.object_id));
    try {
      const PreparedInput in = prepare_input(obj, nbs, params.arch, config.crop_margin);
      ++counters.completions;
      const CompletionResult c = complete_prepared(params, in);
      d.matching_score = matching_score(in.raw, c.detailed, config.contour_weight);
      if (*d.matching_score > config.matching_threshold) {
        d.kept = false;
        d.reason = FilterReason::Deleted;
        ++counters.deleted;
      } else {
        d.reason = FilterReason::ScoreBelowThreshold;
        ++counters.kept_low_confidence;
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyCloud) throw;
      d.kept = false;
      d.reason = FilterReason::Deleted;
      d.note = e.what();
      ++counters.deleted;
      ++counters.failures;
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<FilterDecision> filter_scenes(const nn::NetworkParams& params, const SceneSet& scenes,
                                          const FilterConfig& config, FilterCounters& counters) {
  std::vector<FilterDecision> out;
  for (const auto& frame : scenes.frames) {
    auto d = filter_frame(params, frame, config, counters);
    out.insert(out.end(), std::make_move_iterator(d.begin()), std::make_move_iterator(d.end()));
  }
  return out;
}

void write_decisions_csv(const std::filesystem::path& path, std::span<const FilterDecision> decisions) {
  std::ostringstream ss;
  ss.precision(17);
  ss << "frame,object_id,detection_score,matching_score,kept,reason\n";
  for (const auto& d : decisions) {
    ss << d.frame << ',' << d.object_id << ',' << d.detection_score << ',';
    if (d.matching_score) ss << *d.matching_score;
    ss << ',' << (d.kept ? 1 : 0) << ',' << to_string(d.reason) << '\n';
  }
  atomic_write(path, ss.str());
}

}  // namespace trapcc
