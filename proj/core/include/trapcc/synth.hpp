#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "trapcc/geometry.hpp"
#include "trapcc/gt_pool.hpp"

namespace trapcc::synth {

/// splitmix64 of (master, index); per-object seeds.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// Car-like solid in its object frame: a body box (open at the bottom) with a
/// narrower cabin box on top, minus four spherical wheel-arch cavities centred
/// on the lower side edges. Ground is at z = -height()/2.
struct VehicleTemplate {
  double length = 4.4;
  double width = 1.8;
  double clearance = 0.15;
  double body_height = 0.85;
  double cabin_height = 0.55;
  double cabin_length = 2.2;
  double cabin_width = 1.6;
  double cabin_offset = -0.2;  // cabin centre along x
  double wheel_radius = 0.34;
  double wheelbase = 2.7;
  std::uint64_t seed = 0;

  double height() const { return clearance + body_height + cabin_height; }
  Size3 size() const { return {length, width, height()}; }
  /// Strictly inside the solid.
  bool inside(const Point3& p) const;
  /// Distance to the nearest untrimmed face rectangle or arch sphere; a lower
  /// bound on the distance to the trimmed surface.
  double surface_distance(const Point3& p) const;

  static VehicleTemplate random(std::uint64_t seed);
};

/// Oriented surface samples. Normals point out of the solid.
struct SurfaceSample {
  PointCloud cloud{Frame::Object};
  std::vector<Point3> normals;
  double surfel_radius = 0.05;
};

/// Samples the y >= 0 half area-proportionally and mirrors it, so the result
/// is exactly symmetric about the x-z plane. Holds 2 * half_points points.
SurfaceSample sample_surface(const VehicleTemplate& tmpl, std::size_t half_points, std::uint64_t seed);

struct GeneratedVehicle {
  VehicleTemplate tmpl;
  SurfaceSample surface;
};

GeneratedVehicle generate_vehicle(std::uint64_t seed, std::size_t half_points = 4096);

enum class ClutterKind { Bush, Poles, GroundPatch, Wall };

const char* to_string(ClutterKind kind);

/// Non-vehicle surface filling part of a car-sized box of the given size.
SurfaceSample generate_clutter(ClutterKind kind, const Size3& box_size, std::uint64_t seed,
                               std::size_t points = 4096);

/// Moves an object-frame surface into the sensor frame.
SurfaceSample place_surface(const SurfaceSample& surface, const OrientedBox& box);

struct ScanSpec {
  Point3 origin = Point3(0.0, 0.0, 1.9);
  double angular_resolution = 0.006;  // radians; 0 disables binning
  std::vector<OrientedBox> occluders;
  double dropout = 0.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  /// Depth tolerance of the surfel occlusion test, metres.
  double depth_epsilon = 0.02;

  void validate() const;
};

/// Hidden-point removal from spec.origin (back faces, occluder boxes and the
/// object's own surfels), one nearest point per angular bin, then seeded
/// dropout and Gaussian noise. Output keeps the source order; sensor frame.
PointCloud simulate_scan(const SurfaceSample& sensor_surface, const ScanSpec& spec);

struct SynthOptions {
  int vehicles = 64;
  int frames = 8;
  int clutter = 0;
  double half_scanned_fraction = 0.25;
  /// Objects sharing one scene (one run of frames around one sensor pose).
  int objects_per_scene = 16;
  std::uint64_t seed = 7;
  Point3 sensor_origin = Point3(0.0, 0.0, 1.9);
  double angular_resolution = 0.002;
  double dropout = 0.05;
  double noise_sigma = 0.01;
  std::size_t surface_half_points = 8192;

  void validate() const;
};

struct SynthSummary {
  std::size_t objects = 0;
  std::size_t observations = 0;
  std::size_t empty_observations = 0;
};

/// Writes `<out>/manifest.json`, `<out>/clouds/*.pcxy` and the sealed
/// `<out>/oracle/` tree (labels plus complete object-frame clouds).
SynthSummary generate_dataset(const std::filesystem::path& out, const SynthOptions& options);

struct OracleObject {
  int id = 0;
  bool vehicle = true;
  bool half_scanned = false;
  std::string kind;  // "vehicle" or a clutter kind
  PointCloud complete{Frame::Object};
};

std::map<int, OracleObject> load_oracle(const std::filesystem::path& dataset_dir);

}  // namespace trapcc::synth
