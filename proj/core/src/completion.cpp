#include "trapcc/completion.hpp"

#include <algorithm>

#include "trapcc/error.hpp"
#include "trapcc/gt_pool.hpp"

namespace trapcc {

Normalized normalize_for_net(const PointCloud& cloud, const OrientedBox& box) {
  require_non_empty(cloud, "cloud to normalize");
  if (cloud.frame != Frame::Object) throw Error(ErrorCode::InvalidArgument, "normalize_for_net expects the object frame");
  box.validate();
  Normalized n;
  n.scale = std::max({box.length, box.width, box.height}) / 2.0;
  n.cloud.points.reserve(cloud.size());
  for (const auto& p : cloud.points) n.cloud.points.push_back(p / n.scale);
  return n;
}

PointCloud denormalize(const PointCloud& cloud, double scale) {
  PointCloud out(cloud.frame);
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(p * scale);
  return out;
}

namespace {

PointCloud cropped_object_cloud(const SceneObject& obj, double crop_margin) {
  const PointCloud crop = crop_to_box(obj.cloud, obj.box, crop_margin);
  if (crop.empty()) return PointCloud(Frame::Object);
  return to_object_frame(crop, obj.box);
}

nn::Matrix sampled(const PointCloud& cloud, int n) {
  return nn::to_matrix(sample_fixed(cloud, static_cast<std::size_t>(n), SampleMode::FarthestPoint, 0));
}

}  // namespace

PreparedInput prepare_input(const SceneObject& target, std::span<const SceneObject* const> neighbors,
                            const nn::ArchitectureConfig& arch, double crop_margin) {
  PreparedInput out;
  out.raw = cropped_object_cloud(target, crop_margin);
  if (out.raw.empty()) {
    throw Error(ErrorCode::EmptyCloud, "object " + std::to_string(target.object_id) + " has no points inside its box");
  }
  const Normalized norm = normalize_for_net(out.raw, target.box);
  out.scale = norm.scale;
  if (arch.has_p_net()) {
    const FrontBack halves = split_front_back(norm.cloud);
    if (!halves.front.empty()) out.net.front = sampled(halves.front, arch.partial_input_points);
    if (!halves.back.empty()) out.net.back = sampled(halves.back, arch.partial_input_points);
  } else {
    out.net.whole = sampled(norm.cloud, arch.coarse_input_points);
  }
  if (arch.uses_neighbors()) {
    for (const SceneObject* nb : neighbors) {
      const PointCloud local = cropped_object_cloud(*nb, crop_margin);
      if (local.empty()) continue;
      out.net.neighbors.push_back(sampled(normalize_for_net(local, nb->box).cloud, arch.neighbor_input_points));
    }
  }
  return out;
}

CompletionResult complete_prepared(const nn::NetworkParams& params, const PreparedInput& input) {
  const nn::NetOutput y = nn::forward(params, input.net, nullptr);
  CompletionResult r;
  r.detailed = denormalize(nn::to_cloud(y.detailed, Frame::Object), input.scale);
  r.coarse = denormalize(nn::to_cloud(y.coarse_stitched, Frame::Object), input.scale);
  return r;
}

FrameCompletion complete_frame(const nn::NetworkParams& params, std::span<const SceneObject> objects,
                               const SceneGraphOptions& graph, double crop_margin) {
  FrameCompletion out;
  const auto neighbor_sets = build_scene_graph(objects, graph);
  std::map<int, const SceneObject*> by_id;
  for (const auto& o : objects) by_id[o.object_id] = &o;
  for (const auto& o : objects) {
    std::vector<const SceneObject*> nbs;
    for (const auto& n : neighbor_sets.at(o.object_id).neighbors) nbs.push_back(by_id.at(n.object_id));
    try {
      const PreparedInput in = prepare_input(o, nbs, params.arch, crop_margin);
      out.results.emplace(o.object_id, complete_prepared(params, in));
    } catch (const Error& e) {
      out.failures.emplace(o.object_id, e.what());
    }
  }
  return out;
}

}  // namespace trapcc
