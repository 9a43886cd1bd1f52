#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace trapcc {

using Point3 = Eigen::Vector3d;
using Point2 = Eigen::Vector2d;

enum class Frame { Sensor, Object };

/// Ordered list of 3D points tagged with the frame they are expressed in.
struct PointCloud {
  std::vector<Point3> points;
  Frame frame = Frame::Sensor;

  PointCloud() = default;
  explicit PointCloud(Frame f) : frame(f) {}
  PointCloud(std::vector<Point3> pts, Frame f) : points(std::move(pts)), frame(f) {}

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
  const Point3& operator[](std::size_t i) const { return points[i]; }
};

/// Throws EmptyCloud when `cloud` has no points; `what` names the argument.
void require_non_empty(const PointCloud& cloud, const char* what);

/// Throws InvalidArgument if any coordinate is NaN or infinite.
void require_finite(const PointCloud& cloud, const char* what);

/// Squared Euclidean distance evaluated as dx*dx + dy*dy + dz*dz.
/// Every nearest-neighbour path in the library goes through this function so
/// that indexed and exhaustive searches agree to the last bit.
inline double squared_distance(const Point3& a, const Point3& b) noexcept {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

/// Wraps an angle into [-pi, pi).
double wrap_angle(double radians);

/// Rotation about +z followed by a translation: p -> R p + t.
class RigidTransform {
 public:
  RigidTransform() : rotation_(Eigen::Matrix3d::Identity()), translation_(Point3::Zero()) {}
  RigidTransform(const Eigen::Matrix3d& rotation, const Point3& translation);

  static RigidTransform from_yaw(double yaw, const Point3& translation = Point3::Zero());

  Point3 apply(const Point3& p) const { return rotation_ * p + translation_; }
  Point3 rotate(const Point3& v) const { return rotation_ * v; }
  RigidTransform inverse() const;
  /// Returns the transform equivalent to applying `rhs` first, then `*this`.
  RigidTransform compose(const RigidTransform& rhs) const;

  const Eigen::Matrix3d& rotation() const noexcept { return rotation_; }
  const Point3& translation() const noexcept { return translation_; }

 private:
  Eigen::Matrix3d rotation_;
  Point3 translation_;
};

/// Gravity-aligned 3D box. Heading is the box +x axis.
struct OrientedBox {
  Point3 center = Point3::Zero();
  double length = 1.0;
  double width = 1.0;
  double height = 1.0;
  double yaw = 0.0;
  std::optional<double> detection_score;

  /// Throws InvalidArgument for non-positive dimensions, non-finite fields or
  /// a detection score outside [0, 1].
  void validate() const;

  /// Sensor -> object frame.
  RigidTransform object_from_sensor() const;
  /// Object -> sensor frame.
  RigidTransform sensor_from_object() const;

  /// True when the object-frame point lies inside the box grown by `margin`.
  bool contains_object_point(const Point3& p, double margin = 0.0) const;
};

PointCloud transform_cloud(const PointCloud& cloud, const RigidTransform& t, Frame result_frame);

/// Maps a sensor-frame cloud into the box frame: p -> R(-yaw) (p - center).
PointCloud to_object_frame(const PointCloud& cloud, const OrientedBox& box);
/// Inverse of to_object_frame.
PointCloud from_object_frame(const PointCloud& cloud, const OrientedBox& box);

/// Sensor-frame points whose object-frame coordinates fall inside the box
/// grown by `margin` on every side. The result stays in the sensor frame.
PointCloud crop_to_box(const PointCloud& cloud, const OrientedBox& box, double margin);

enum class SampleMode { Random, FarthestPoint };

/// Indices of a fixed-size sample. When the cloud holds fewer than `n` points
/// the ordered base sample is repeated cyclically.
std::vector<std::size_t> sample_fixed_indices(const PointCloud& cloud, std::size_t n,
                                              SampleMode mode, std::uint64_t seed);

PointCloud sample_fixed(const PointCloud& cloud, std::size_t n, SampleMode mode,
                        std::uint64_t seed);

PointCloud gather(const PointCloud& cloud, std::span<const std::size_t> indices);

/// Concatenates clouds that share a frame.
PointCloud concat(std::span<const PointCloud> clouds);

}  // namespace trapcc
