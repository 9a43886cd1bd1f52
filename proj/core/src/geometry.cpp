#include "trapcc/geometry.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "trapcc/error.hpp"

namespace trapcc {

void require_non_empty(const PointCloud& cloud, const char* what) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, std::string(what) + " has no points");
}

void require_finite(const PointCloud& cloud, const char* what) {
  for (const auto& p : cloud.points) {
    if (!p.allFinite()) {
      throw Error(ErrorCode::InvalidArgument, std::string(what) + " contains a non-finite point");
    }
  }
}

double wrap_angle(double radians) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double a = std::fmod(radians + std::numbers::pi, two_pi);
  if (a < 0.0) a += two_pi;
  a -= std::numbers::pi;
  // fmod can land exactly on +pi after the shift for inputs just below -pi.
  if (a >= std::numbers::pi) a -= two_pi;
  return a;
}

RigidTransform::RigidTransform(const Eigen::Matrix3d& rotation, const Point3& translation)
    : rotation_(rotation), translation_(translation) {}

RigidTransform RigidTransform::from_yaw(double yaw, const Point3& translation) {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  Eigen::Matrix3d r;
  r << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  return {r, translation};
}

RigidTransform RigidTransform::inverse() const {
  const Eigen::Matrix3d rt = rotation_.transpose();
  return {rt, -(rt * translation_)};
}

RigidTransform RigidTransform::compose(const RigidTransform& rhs) const {
  return {rotation_ * rhs.rotation_, rotation_ * rhs.translation_ + translation_};
}

void OrientedBox::validate() const {
  if (!center.allFinite() || !std::isfinite(yaw)) {
    throw Error(ErrorCode::InvalidArgument, "box has non-finite center or yaw");
  }
  if (!(length > 0.0) || !(width > 0.0) || !(height > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "box dimensions must be positive");
  }
  if (detection_score && !(*detection_score >= 0.0 && *detection_score <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "detection score must lie in [0, 1]");
  }
}

RigidTransform OrientedBox::object_from_sensor() const {
  const RigidTransform rot = RigidTransform::from_yaw(-yaw);
  return {rot.rotation(), -(rot.rotation() * center)};
}

RigidTransform OrientedBox::sensor_from_object() const {
  return RigidTransform::from_yaw(yaw, center);
}

bool OrientedBox::contains_object_point(const Point3& p, double margin) const {
  return std::abs(p.x()) <= 0.5 * length + margin && std::abs(p.y()) <= 0.5 * width + margin &&
         std::abs(p.z()) <= 0.5 * height + margin;
}

PointCloud transform_cloud(const PointCloud& cloud, const RigidTransform& t, Frame result_frame) {
  PointCloud out(result_frame);
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(t.apply(p));
  return out;
}

PointCloud to_object_frame(const PointCloud& cloud, const OrientedBox& box) {
  require_non_empty(cloud, "cloud");
  if (cloud.frame != Frame::Sensor) throw Error(ErrorCode::InvalidArgument, "cloud is not in the sensor frame");
  box.validate();
  // Subtract first, then rotate, so the center maps to exactly zero.
  const RigidTransform rot = RigidTransform::from_yaw(-box.yaw);
  PointCloud out(Frame::Object);
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(rot.rotate(p - box.center));
  return out;
}

PointCloud from_object_frame(const PointCloud& cloud, const OrientedBox& box) {
  require_non_empty(cloud, "cloud");
  if (cloud.frame != Frame::Object) throw Error(ErrorCode::InvalidArgument, "cloud is not in the object frame");
  box.validate();
  return transform_cloud(cloud, box.sensor_from_object(), Frame::Sensor);
}

PointCloud crop_to_box(const PointCloud& cloud, const OrientedBox& box, double margin) {
  if (cloud.frame != Frame::Sensor) throw Error(ErrorCode::InvalidArgument, "cloud is not in the sensor frame");
  box.validate();
  const RigidTransform rot = RigidTransform::from_yaw(-box.yaw);
  PointCloud out(cloud.frame);
  for (const auto& p : cloud.points) {
    if (box.contains_object_point(rot.rotate(p - box.center), margin)) out.points.push_back(p);
  }
  return out;
}

namespace {

std::vector<std::size_t> farthest_point_order(const PointCloud& cloud, std::size_t n) {
  const std::size_t count = cloud.size();
  std::vector<std::size_t> order;
  order.reserve(n);
  std::vector<double> min_d2(count, std::numeric_limits<double>::infinity());
  std::size_t current = 0;
  for (std::size_t k = 0; k < n; ++k) {
    order.push_back(current);
    min_d2[current] = -1.0;
    std::size_t best = 0;
    double best_d2 = -1.0;
    for (std::size_t i = 0; i < count; ++i) {
      if (min_d2[i] < 0.0) continue;
      const double d2 = squared_distance(cloud[i], cloud[current]);
      if (d2 < min_d2[i]) min_d2[i] = d2;
      if (min_d2[i] > best_d2) {
        best_d2 = min_d2[i];
        best = i;
      }
    }
    if (best_d2 < 0.0) break;
    current = best;
  }
  return order;
}

std::vector<std::size_t> random_order(std::size_t count, std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: only the first n slots are needed.
  for (std::size_t i = 0; i < n && i + 1 < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, count - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(n);
  return idx;
}

}  // namespace

std::vector<std::size_t> sample_fixed_indices(const PointCloud& cloud, std::size_t n,
                                              SampleMode mode, std::uint64_t seed) {
  require_non_empty(cloud, "cloud");
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "sample size must be positive");
  const std::size_t base_n = std::min(n, cloud.size());
  std::vector<std::size_t> base = mode == SampleMode::FarthestPoint
                                      ? farthest_point_order(cloud, base_n)
                                      : random_order(cloud.size(), base_n, seed);
  std::vector<std::size_t> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(base[i % base.size()]);
  return out;
}

PointCloud sample_fixed(const PointCloud& cloud, std::size_t n, SampleMode mode,
                        std::uint64_t seed) {
  const auto idx = sample_fixed_indices(cloud, n, mode, seed);
  return gather(cloud, idx);
}

PointCloud gather(const PointCloud& cloud, std::span<const std::size_t> indices) {
  PointCloud out(cloud.frame);
  out.points.reserve(indices.size());
  for (const auto i : indices) out.points.push_back(cloud.points.at(i));
  return out;
}

PointCloud concat(std::span<const PointCloud> clouds) {
  PointCloud out;
  if (clouds.empty()) return out;
  out.frame = clouds.front().frame;
  std::size_t total = 0;
  for (const auto& c : clouds) total += c.size();
  out.points.reserve(total);
  for (const auto& c : clouds) {
    if (c.frame != out.frame) throw Error(ErrorCode::InvalidArgument, "concat across frames");
    out.points.insert(out.points.end(), c.points.begin(), c.points.end());
  }
  return out;
}

}  // namespace trapcc
