#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "trapcc/gt_pool.hpp"
#include "trapcc/scene_graph.hpp"

namespace trapcc {

/// One object of a scene frame as listed in the manifest.
struct SceneEntry {
  SceneObject object;
  std::string cloud_file;  // relative to the scene directory
};

struct SceneFrame {
  int frame = 0;
  std::vector<SceneEntry> objects;  // ordered by object id
};

struct SceneSet {
  Point3 sensor_origin = Point3::Zero();
  std::vector<SceneFrame> frames;  // ordered by frame index

  std::size_t object_count() const;
};

/// Reads `<dir>/manifest.json` and every cloud it lists. A directory without
/// a manifest yields an empty set.
SceneSet load_scenes(const std::filesystem::path& dir);

/// Writes `<dir>/manifest.json`; cloud files are expected to exist already.
void save_scene_manifest(const SceneSet& scenes, const std::filesystem::path& dir);

/// Groups observations by object id across frames. Each cloud is cropped to
/// its box grown by `crop_margin`; observations left empty are dropped.
std::vector<TrackedInstance> tracked_instances(const SceneSet& scenes, double crop_margin);

std::vector<SceneObject> frame_objects(const SceneFrame& frame);

}  // namespace trapcc
