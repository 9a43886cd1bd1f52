#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "trapcc/geometry.hpp"

namespace trapcc {

struct NearestResult {
  std::size_t index = 0;
  double squared_distance = 0.0;
};

/// Immutable k-d tree over a point cloud.
///
/// nearest() returns exactly the point that minimises squared_distance() to
/// the query; among equidistant points the lowest cloud index wins. Pruning
/// only discards subtrees whose splitting-plane distance is strictly larger
/// than the current best, so ties are never lost.
class SpatialIndex {
 public:
  explicit SpatialIndex(PointCloud cloud);

  NearestResult nearest(const Point3& query) const;

  const PointCloud& cloud() const noexcept { return cloud_; }
  std::size_t size() const noexcept { return cloud_.size(); }

 private:
  struct Node {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint8_t axis = 0;
    double split = 0.0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end, int depth);
  void search(std::int32_t node, const Point3& q, NearestResult& best) const;

  PointCloud cloud_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

SpatialIndex build_index(const PointCloud& cloud);

}  // namespace trapcc
