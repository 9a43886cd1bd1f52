#include "trapcc/spatial_index.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "trapcc/error.hpp"

namespace trapcc {

namespace {
constexpr std::uint32_t kLeafSize = 8;
}

SpatialIndex::SpatialIndex(PointCloud cloud) : cloud_(std::move(cloud)) {
  require_non_empty(cloud_, "index cloud");
  if (cloud_.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::InvalidArgument, "cloud too large for spatial index");
  }
  order_.resize(cloud_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  nodes_.reserve(2 * cloud_.size() / kLeafSize + 1);
  build(0, static_cast<std::uint32_t>(order_.size()), 0);
}

std::int32_t SpatialIndex::build(std::uint32_t begin, std::uint32_t end, int depth) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{begin, end, -1, -1, 0, 0.0});
  if (end - begin <= kLeafSize) return id;

  Point3 lo = Point3::Constant(std::numeric_limits<double>::infinity());
  Point3 hi = -lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(cloud_[order_[i]]);
    hi = hi.cwiseMax(cloud_[order_[i]]);
  }
  Eigen::Index axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return id;  // all points coincide: keep as a leaf

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) { return cloud_[a][axis] < cloud_[b][axis]; });
  const double split = cloud_[order_[mid]][axis];
  const std::int32_t left = build(begin, mid, depth + 1);
  const std::int32_t right = build(mid, end, depth + 1);
  Node& node = nodes_[static_cast<std::size_t>(id)];
  node.left = left;
  node.right = right;
  node.axis = static_cast<std::uint8_t>(axis);
  node.split = split;
  return id;
}

void SpatialIndex::search(std::int32_t node_id, const Point3& q, NearestResult& best) const {
  const Node& node = nodes_[static_cast<std::size_t>(node_id)];
  if (node.left < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::uint32_t idx = order_[i];
      const double d2 = squared_distance(cloud_[idx], q);
      if (d2 < best.squared_distance || (d2 == best.squared_distance && idx < best.index)) {
        best.squared_distance = d2;
        best.index = idx;
      }
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  const std::int32_t near_child = diff < 0.0 ? node.left : node.right;
  const std::int32_t far_child = diff < 0.0 ? node.right : node.left;
  search(near_child, q, best);
  if (diff * diff <= best.squared_distance) search(far_child, q, best);
}

NearestResult SpatialIndex::nearest(const Point3& query) const {
  NearestResult best{std::numeric_limits<std::size_t>::max(),
                     std::numeric_limits<double>::infinity()};
  search(0, query, best);
  return best;
}

SpatialIndex build_index(const PointCloud& cloud) { return SpatialIndex(cloud); }

}  // namespace trapcc
