#pragma once

#include <map>
#include <span>
#include <vector>

#include "trapcc/geometry.hpp"

namespace trapcc {

struct SceneObject {
  int object_id = 0;
  PointCloud cloud;  // sensor frame
  OrientedBox box;
};

struct Neighbor {
  int object_id = 0;
  double center_distance = 0.0;
};

/// Up to k nearest other objects of a target, by bird's-eye box-center
/// distance, all within `radius`. Distances ascend; ties go to the lower id.
struct NeighborSet {
  int target_id = 0;
  std::vector<Neighbor> neighbors;
  int k = 3;
  double radius = 20.0;
};

struct SceneGraphOptions {
  int k = 3;
  double radius = 20.0;
};

std::map<int, NeighborSet> build_scene_graph(std::span<const SceneObject> objects,
                                             const SceneGraphOptions& options = {});

}  // namespace trapcc
