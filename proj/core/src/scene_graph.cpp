#include "trapcc/scene_graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "trapcc/error.hpp"

namespace trapcc {

std::map<int, NeighborSet> build_scene_graph(std::span<const SceneObject> objects,
                                             const SceneGraphOptions& options) {
  if (options.k < 0) throw Error(ErrorCode::InvalidArgument, "k must be non-negative");
  if (!(options.radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "radius must be positive");

  std::vector<const SceneObject*> sorted;
  sorted.reserve(objects.size());
  for (const auto& o : objects) sorted.push_back(&o);
  std::sort(sorted.begin(), sorted.end(),
            [](const SceneObject* a, const SceneObject* b) { return a->object_id < b->object_id; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i]->object_id == sorted[i - 1]->object_id) {
      throw Error(ErrorCode::InvalidArgument,
                  "duplicate object id " + std::to_string(sorted[i]->object_id) + " in scene");
    }
  }

  std::map<int, NeighborSet> graph;
  std::vector<Neighbor> candidates;
  for (const SceneObject* target : sorted) {
    candidates.clear();
    for (const SceneObject* other : sorted) {
      if (other == target) continue;
      const double dx = other->box.center.x() - target->box.center.x();
      const double dy = other->box.center.y() - target->box.center.y();
      const double d = std::sqrt(dx * dx + dy * dy);
      if (d <= options.radius) candidates.push_back({other->object_id, d});
    }
    // Candidates are already in id order, so a stable sort keeps the id tie rule.
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Neighbor& a, const Neighbor& b) { return a.center_distance < b.center_distance; });
    NeighborSet set{target->object_id, {}, options.k, options.radius};
    const auto take = std::min<std::size_t>(candidates.size(), static_cast<std::size_t>(options.k));
    set.neighbors.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take));
    graph.emplace(target->object_id, std::move(set));
  }
  return graph;
}

}  // namespace trapcc
