#pragma once

#include <map>
#include <span>
#include <vector>

#include "trapcc/geometry.hpp"
#include "trapcc/network.hpp"
#include "trapcc/scene_graph.hpp"

namespace trapcc {

struct Normalized {
  PointCloud cloud{Frame::Object};
  double scale = 1.0;
};

/// Divides object-frame coordinates by max(length, width, height) / 2.
Normalized normalize_for_net(const PointCloud& cloud, const OrientedBox& box);
PointCloud denormalize(const PointCloud& cloud, double scale);

/// Everything the network needs for one target object.
struct PreparedInput {
  nn::NetInput net;
  PointCloud raw{Frame::Object};  // cropped input, metric object frame
  double scale = 1.0;
};

/// Crops the target scan to its box (grown by `crop_margin`), maps it into the
/// object frame, normalizes, splits into halves and samples every branch to
/// its fixed size. Neighbour scans go through the same steps in their own box
/// frames; neighbours left empty after cropping are dropped.
PreparedInput prepare_input(const SceneObject& target, std::span<const SceneObject* const> neighbors,
                            const nn::ArchitectureConfig& arch, double crop_margin = 0.1);

struct CompletionResult {
  PointCloud detailed{Frame::Object};  // metric object frame
  PointCloud coarse{Frame::Object};    // stitched coarse output, metric; empty for the C-Net-only variant
};

CompletionResult complete_prepared(const nn::NetworkParams& params, const PreparedInput& input);

/// Runs the full pipeline for every object of one frame, using the scene
/// graph for neighbours. Objects whose scan is empty after cropping are
/// reported through `failures` and skipped.
struct FrameCompletion {
  std::map<int, CompletionResult> results;
  std::map<int, std::string> failures;
};

FrameCompletion complete_frame(const nn::NetworkParams& params, std::span<const SceneObject> objects,
                               const SceneGraphOptions& graph = {}, double crop_margin = 0.1);

}  // namespace trapcc
