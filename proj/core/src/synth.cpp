#include "trapcc/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "trapcc/error.hpp"
#include "trapcc/io.hpp"
#include "trapcc/scene_io.hpp"

namespace trapcc::synth {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

constexpr double kPi = std::numbers::pi;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

struct Aabb {
  Point3 lo;
  Point3 hi;
  bool strictly_contains(const Point3& p) const {
    return p.x() > lo.x() && p.x() < hi.x() && p.y() > lo.y() && p.y() < hi.y() && p.z() > lo.z() && p.z() < hi.z();
  }
};

struct Solid {
  Aabb body;
  Aabb cabin;
  std::array<Point3, 4> arch_centers;
  double arch_radius;
};

Solid solid_of(const VehicleTemplate& t) {
  const double zg = -t.height() / 2.0;
  const double body_bottom = zg + t.clearance;
  const double body_top = body_bottom + t.body_height;
  Solid s;
  s.body = {{-t.length / 2, -t.width / 2, body_bottom}, {t.length / 2, t.width / 2, body_top}};
  s.cabin = {{t.cabin_offset - t.cabin_length / 2, -t.cabin_width / 2, body_top},
             {t.cabin_offset + t.cabin_length / 2, t.cabin_width / 2, t.height() / 2.0}};
  int k = 0;
  for (const double sx : {-1.0, 1.0}) {
    for (const double sy : {-1.0, 1.0}) {
      s.arch_centers[static_cast<std::size_t>(k++)] = Point3(sx * t.wheelbase / 2, sy * t.width / 2, body_bottom);
    }
  }
  s.arch_radius = t.wheel_radius;
  return s;
}

bool in_arch(const Solid& s, const Point3& p) {
  for (const auto& c : s.arch_centers) {
    if ((p - c).squaredNorm() < s.arch_radius * s.arch_radius) return true;
  }
  return false;
}

double rect_distance(const Point3& p, const Aabb& box, int axis, double plane) {
  Point3 q = p.cwiseMax(box.lo).cwiseMin(box.hi);
  q[axis] = plane;
  return (p - q).norm();
}

}  // namespace

bool VehicleTemplate::inside(const Point3& p) const {
  const Solid s = solid_of(*this);
  return (s.body.strictly_contains(p) || s.cabin.strictly_contains(p)) && !in_arch(s, p);
}

double VehicleTemplate::surface_distance(const Point3& p) const {
  const Solid s = solid_of(*this);
  double best = std::numeric_limits<double>::infinity();
  for (const Aabb* box : {&s.body, &s.cabin}) {
    for (int axis = 0; axis < 3; ++axis) {
      best = std::min(best, rect_distance(p, *box, axis, box->lo[axis]));
      best = std::min(best, rect_distance(p, *box, axis, box->hi[axis]));
    }
  }
  for (const auto& c : s.arch_centers) best = std::min(best, std::abs((p - c).norm() - s.arch_radius));
  return best;
}

VehicleTemplate VehicleTemplate::random(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  VehicleTemplate t;
  t.seed = seed;
  t.length = uniform(rng, 3.8, 4.9);
  t.width = uniform(rng, 1.65, 1.95);
  t.clearance = uniform(rng, 0.12, 0.2);
  t.body_height = uniform(rng, 0.75, 1.0);
  t.cabin_height = uniform(rng, 0.45, 0.65);
  t.cabin_length = uniform(rng, 0.42, 0.6) * t.length;
  t.cabin_width = uniform(rng, 0.85, 0.95) * t.width;
  const double slack = (t.length - t.cabin_length) / 2.0 - 0.3;
  t.cabin_offset = uniform(rng, -0.6, 0.2) * slack;
  t.wheel_radius = uniform(rng, 0.30, 0.38);
  t.wheelbase = uniform(rng, 0.58, 0.65) * t.length;
  return t;
}

namespace {

// One sampling primitive of the y >= 0 half.
struct Patch {
  enum Kind { Face, Sphere } kind;
  double area;
  // Face: axis-aligned rectangle with fixed `axis` at `plane`, outward sign.
  int axis = 0;
  double plane = 0.0;
  double sign = 1.0;
  Aabb extent{};
  // Sphere: quarter sphere cavity opening towards -y side of a +y edge.
  Point3 center = Point3::Zero();
  double radius = 0.0;
  bool is_body = true;
};

std::vector<Patch> half_patches(const Solid& s) {
  std::vector<Patch> out;
  auto add_faces = [&](const Aabb& b, bool is_body) {
    const Aabb half{{b.lo.x(), 0.0, b.lo.z()}, b.hi};
    const Point3 d = half.hi - half.lo;
    for (int axis = 0; axis < 3; ++axis) {
      for (const double sign : {-1.0, 1.0}) {
        if (axis == 1 && sign < 0) continue;  // the y = 0 cut is not a surface
        if (axis == 2 && sign < 0) continue;  // no bottom faces
        Patch p{Patch::Face, 0.0};
        p.axis = axis;
        p.sign = sign;
        p.plane = sign > 0 ? half.hi[axis] : half.lo[axis];
        p.extent = half;
        const int a = (axis + 1) % 3;
        const int c = (axis + 2) % 3;
        p.area = d[a] * d[c];
        p.is_body = is_body;
        out.push_back(p);
      }
    }
  };
  add_faces(s.body, true);
  add_faces(s.cabin, false);
  for (const auto& c : s.arch_centers) {
    if (c.y() < 0) continue;
    Patch p{Patch::Sphere, kPi * s.arch_radius * s.arch_radius};
    p.center = c;
    p.radius = s.arch_radius;
    out.push_back(p);
  }
  return out;
}

bool on_surface(const Solid& s, const Patch& patch, const Point3& p) {
  if (patch.kind == Patch::Sphere) {
    if (!s.body.strictly_contains(p)) return false;
    for (const auto& c : s.arch_centers) {
      if (c != patch.center && (p - c).squaredNorm() < s.arch_radius * s.arch_radius) return false;
    }
    return true;
  }
  if (in_arch(s, p)) return false;
  const Aabb& other = patch.is_body ? s.cabin : s.body;
  if (patch.is_body) {
    // The body top under the cabin is interior.
    if (patch.axis == 2 && p.x() > other.lo.x() && p.x() < other.hi.x() && p.y() > other.lo.y() &&
        p.y() < other.hi.y()) {
      return false;
    }
  }
  return !other.strictly_contains(p);
}

}  // namespace

SurfaceSample sample_surface(const VehicleTemplate& tmpl, std::size_t half_points, std::uint64_t seed) {
  const Solid s = solid_of(tmpl);
  const std::vector<Patch> patches = half_patches(s);
  std::vector<double> areas;
  double total = 0.0;
  for (const auto& p : patches) {
    areas.push_back(p.area);
    total += p.area;
  }
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick(areas.begin(), areas.end());
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<Point3> pts;
  std::vector<Point3> normals;
  std::size_t attempts = 0;
  while (pts.size() < half_points) {
    ++attempts;
    const Patch& patch = patches[pick(rng)];
    Point3 p;
    Point3 n;
    if (patch.kind == Patch::Face) {
      const int a = (patch.axis + 1) % 3;
      const int c = (patch.axis + 2) % 3;
      p[patch.axis] = patch.plane;
      p[a] = uniform(rng, patch.extent.lo[a], patch.extent.hi[a]);
      p[c] = uniform(rng, patch.extent.lo[c], patch.extent.hi[c]);
      n = Point3::Zero();
      n[patch.axis] = patch.sign;
    } else {
      Point3 u(gauss(rng), gauss(rng), gauss(rng));
      u.normalize();
      u.y() = -std::abs(u.y());
      u.z() = std::abs(u.z());
      p = patch.center + patch.radius * u;
      n = -u;
    }
    if (!on_surface(s, patch, p)) continue;
    pts.push_back(p);
    normals.push_back(n);
  }

  SurfaceSample out;
  out.cloud.points.reserve(2 * half_points);
  out.normals.reserve(2 * half_points);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    out.cloud.points.push_back(pts[i]);
    out.normals.push_back(normals[i]);
    out.cloud.points.emplace_back(pts[i].x(), -pts[i].y(), pts[i].z());
    out.normals.emplace_back(normals[i].x(), -normals[i].y(), normals[i].z());
  }
  const double accepted_area = 2.0 * total * static_cast<double>(pts.size()) / static_cast<double>(attempts);
  out.surfel_radius = 1.5 * std::sqrt(accepted_area / static_cast<double>(out.cloud.size()));
  return out;
}

GeneratedVehicle generate_vehicle(std::uint64_t seed, std::size_t half_points) {
  GeneratedVehicle v;
  v.tmpl = VehicleTemplate::random(seed);
  v.surface = sample_surface(v.tmpl, half_points, derive_seed(seed, 1));
  return v;
}

const char* to_string(ClutterKind kind) {
  switch (kind) {
    case ClutterKind::Bush: return "bush";
    case ClutterKind::Poles: return "poles";
    case ClutterKind::GroundPatch: return "ground_patch";
    case ClutterKind::Wall: return "wall";
  }
  return "unknown";
}

SurfaceSample generate_clutter(ClutterKind kind, const Size3& box_size, std::uint64_t seed, std::size_t points) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double zg = -box_size.height / 2.0;
  SurfaceSample out;
  double area = 0.0;
  auto push = [&](const Point3& p, const Point3& n) {
    out.cloud.points.push_back(p);
    out.normals.push_back(n.normalized());
  };
  switch (kind) {
    case ClutterKind::Bush: {
      const Point3 radii(uniform(rng, 0.6, 1.3), uniform(rng, 0.5, 0.9), uniform(rng, 0.5, 0.9));
      const Point3 center(uniform(rng, -0.8, 0.8), uniform(rng, -0.2, 0.2), zg + 0.8 * radii.z());
      const double phase = uniform(rng, 0.0, 2.0 * kPi);
      for (std::size_t i = 0; i < points; ++i) {
        Point3 u(gauss(rng), gauss(rng), gauss(rng));
        u.normalize();
        const double bump = 1.0 + 0.15 * std::sin(3.0 * std::atan2(u.y(), u.x()) + phase) * std::sin(4.0 * u.z());
        const Point3 p = center + bump * radii.cwiseProduct(u);
        push(p, u.cwiseQuotient(radii));
      }
      area = 4.0 * kPi * std::pow(radii.x() * radii.y() * radii.z(), 2.0 / 3.0);
      break;
    }
    case ClutterKind::Poles: {
      const int count = 2 + static_cast<int>(rng() % 3);
      std::vector<std::array<double, 4>> poles;  // x, y, radius, height
      double lateral = 0.0;
      for (int k = 0; k < count; ++k) {
        poles.push_back({uniform(rng, -box_size.length / 2 + 0.3, box_size.length / 2 - 0.3),
                         uniform(rng, -box_size.width / 2 + 0.2, box_size.width / 2 - 0.2), uniform(rng, 0.05, 0.12),
                         uniform(rng, 1.5, 3.0)});
        lateral += 2.0 * kPi * poles.back()[2] * poles.back()[3];
      }
      for (std::size_t i = 0; i < points; ++i) {
        const auto& pole = poles[i % poles.size()];
        const double a = uniform(rng, 0.0, 2.0 * kPi);
        const Point3 n(std::cos(a), std::sin(a), 0.0);
        push(Point3(pole[0] + pole[2] * n.x(), pole[1] + pole[2] * n.y(), zg + uniform(rng, 0.0, pole[3])), n);
      }
      area = lateral;
      break;
    }
    case ClutterKind::GroundPatch: {
      const double lx = uniform(rng, 0.6, 1.0) * box_size.length;
      const double ly = uniform(rng, 0.6, 1.0) * box_size.width;
      for (std::size_t i = 0; i < points; ++i) {
        const double x = uniform(rng, -lx / 2, lx / 2);
        const double y = uniform(rng, -ly / 2, ly / 2);
        const double z = zg + 0.05 * (0.5 + 0.5 * std::sin(1.7 * x) * std::cos(2.3 * y));
        push(Point3(x, y, z), Point3(0.0, 0.0, 1.0));
      }
      area = lx * ly;
      break;
    }
    case ClutterKind::Wall: {
      // A slab across the box, visible from both sides.
      const double x0 = uniform(rng, -0.3, 0.3) * box_size.length;
      const double half_y = 0.6 * box_size.width;
      const double top = zg + uniform(rng, 1.8, 2.6);
      const double thick = 0.1;
      for (std::size_t i = 0; i < points; ++i) {
        const double side = (i % 2 == 0) ? 1.0 : -1.0;
        push(Point3(x0 + side * thick / 2, uniform(rng, -half_y, half_y), uniform(rng, zg, top)), Point3(side, 0.0, 0.0));
      }
      area = 2.0 * (2.0 * half_y) * (top - zg);
      break;
    }
  }
  out.surfel_radius = 1.5 * std::sqrt(area / static_cast<double>(points));
  return out;
}

SurfaceSample place_surface(const SurfaceSample& surface, const OrientedBox& box) {
  const RigidTransform t = box.sensor_from_object();
  SurfaceSample out;
  out.cloud = transform_cloud(surface.cloud, t, Frame::Sensor);
  out.normals.reserve(surface.normals.size());
  for (const auto& n : surface.normals) out.normals.push_back(t.rotate(n));
  out.surfel_radius = surface.surfel_radius;
  return out;
}

void ScanSpec::validate() const {
  if (!(angular_resolution >= 0.0)) throw Error(ErrorCode::InvalidArgument, "angular resolution must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorCode::InvalidArgument, "dropout must lie in [0, 1)");
  if (!(noise_sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise sigma must be >= 0");
  if (!(depth_epsilon >= 0.0)) throw Error(ErrorCode::InvalidArgument, "depth epsilon must be >= 0");
}

namespace {

// Segment o -> o + d against a box; true when it enters the box before t = limit.
bool segment_hits_box(const Point3& o, const Point3& d, const OrientedBox& box, double limit) {
  const RigidTransform to_local = box.object_from_sensor();
  const Point3 lo = to_local.apply(o);
  const Point3 ld = to_local.rotate(d);
  const Point3 half(box.length / 2, box.width / 2, box.height / 2);
  double t0 = 0.0;
  double t1 = limit;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(ld[a]) < 1e-15) {
      if (lo[a] < -half[a] || lo[a] > half[a]) return false;
      continue;
    }
    double ta = (-half[a] - lo[a]) / ld[a];
    double tb = (half[a] - lo[a]) / ld[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return t0 < limit;
}

struct Polar {
  double az;
  double el;
  double range;
};

Polar polar_of(const Point3& v) {
  const double r = v.norm();
  return {std::atan2(v.y(), v.x()), std::asin(std::clamp(v.z() / r, -1.0, 1.0)), r};
}

}  // namespace

PointCloud simulate_scan(const SurfaceSample& surface, const ScanSpec& spec) {
  spec.validate();
  require_non_empty(surface.cloud, "scan surface");
  const auto& pts = surface.cloud.points;
  const std::size_t n = pts.size();
  const bool has_normals = surface.normals.size() == n;
  const double rho = surface.surfel_radius;

  // Azimuths are taken relative to the cloud's mean direction so one object
  // never straddles the +-pi cut.
  Point3 mean = Point3::Zero();
  for (const auto& p : pts) mean += p - spec.origin;
  const double az0 = std::atan2(mean.y(), mean.x());

  std::vector<Polar> polar(n);
  for (std::size_t i = 0; i < n; ++i) {
    polar[i] = polar_of(pts[i] - spec.origin);
    polar[i].az = wrap_angle(polar[i].az - az0);
  }

  std::vector<char> visible(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (polar[i].range <= 0.0) visible[i] = 0;
    if (has_normals && surface.normals[i].dot(pts[i] - spec.origin) >= 0.0) visible[i] = 0;
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (!visible[i]) continue;
    for (const auto& box : spec.occluders) {
      if (segment_hits_box(spec.origin, pts[i] - spec.origin, box, 1.0)) {
        visible[i] = 0;
        break;
      }
    }
  }

  if (has_normals && rho > 0.0) {
    constexpr double kCell = 0.004;
    double az_lo = std::numeric_limits<double>::infinity(), az_hi = -az_lo, el_lo = az_lo, el_hi = -az_lo;
    for (const auto& q : polar) {
      az_lo = std::min(az_lo, q.az);
      az_hi = std::max(az_hi, q.az);
      el_lo = std::min(el_lo, q.el);
      el_hi = std::max(el_hi, q.el);
    }
    const double pad = 0.5;
    az_lo -= pad * kCell * 8;
    el_lo -= pad * kCell * 8;
    const int na = static_cast<int>((az_hi - az_lo) / kCell) + 16;
    const int ne = static_cast<int>((el_hi - el_lo) / kCell) + 16;
    std::vector<std::vector<std::uint32_t>> grid(static_cast<std::size_t>(na) * static_cast<std::size_t>(ne));
    auto cell_a = [&](double az) { return std::clamp(static_cast<int>((az - az_lo) / kCell), 0, na - 1); };
    auto cell_e = [&](double el) { return std::clamp(static_cast<int>((el - el_lo) / kCell), 0, ne - 1); };
    for (std::size_t j = 0; j < n; ++j) {
      const double alpha = std::asin(std::min(1.0, rho / polar[j].range));
      const double alpha_az = alpha / std::max(std::cos(polar[j].el), 0.1);
      for (int a = cell_a(polar[j].az - alpha_az); a <= cell_a(polar[j].az + alpha_az); ++a) {
        for (int e = cell_e(polar[j].el - alpha); e <= cell_e(polar[j].el + alpha); ++e) {
          grid[static_cast<std::size_t>(a) * static_cast<std::size_t>(ne) + static_cast<std::size_t>(e)].push_back(
              static_cast<std::uint32_t>(j));
        }
      }
    }
    const double rho2 = rho * rho;
    for (std::size_t i = 0; i < n; ++i) {
      if (!visible[i]) continue;
      const Point3 d = pts[i] - spec.origin;
      const double limit = polar[i].range - spec.depth_epsilon;
      const auto& cell = grid[static_cast<std::size_t>(cell_a(polar[i].az)) * static_cast<std::size_t>(ne) +
                              static_cast<std::size_t>(cell_e(polar[i].el))];
      for (const std::uint32_t j : cell) {
        if (j == i || polar[j].range >= polar[i].range + rho) continue;
        const Point3& nj = surface.normals[j];
        const double denom = nj.dot(d);
        if (std::abs(denom) < 1e-12) continue;
        const double t = nj.dot(pts[j] - spec.origin) / denom;
        if (t <= 0.0 || t * polar[i].range >= limit) continue;
        const Point3 hit = spec.origin + t * d;
        if ((hit - pts[j]).squaredNorm() <= rho2) {
          visible[i] = 0;
          break;
        }
      }
    }
  }

  std::vector<std::size_t> kept;
  if (spec.angular_resolution > 0.0) {
    std::unordered_map<std::int64_t, std::size_t> bins;
    for (std::size_t i = 0; i < n; ++i) {
      if (!visible[i]) continue;
      const auto ia = static_cast<std::int64_t>(std::floor(polar[i].az / spec.angular_resolution));
      const auto ie = static_cast<std::int64_t>(std::floor(polar[i].el / spec.angular_resolution));
      const std::int64_t key = ia * 1000003LL + ie;
      const auto [it, inserted] = bins.emplace(key, i);
      if (!inserted && polar[i].range < polar[it->second].range) it->second = i;
    }
    for (const auto& [key, idx] : bins) kept.push_back(idx);
    std::sort(kept.begin(), kept.end());
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      if (visible[i]) kept.push_back(i);
    }
  }

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  PointCloud out(Frame::Sensor);
  for (const std::size_t i : kept) {
    if (spec.dropout > 0.0 && coin(rng) < spec.dropout) continue;
    Point3 p = pts[i];
    if (spec.noise_sigma > 0.0) {
      const double nx = noise(rng);
      const double ny = noise(rng);
      const double nz = noise(rng);
      p += spec.noise_sigma * Point3(nx, ny, nz);
    }
    out.points.push_back(p);
  }
  return out;
}

void SynthOptions::validate() const {
  if (vehicles < 0 || clutter < 0 || vehicles + clutter < 1) {
    throw Error(ErrorCode::InvalidArgument, "need at least one object");
  }
  if (frames < 1) throw Error(ErrorCode::InvalidArgument, "frames must be at least 1");
  if (objects_per_scene < 1) throw Error(ErrorCode::InvalidArgument, "objects_per_scene must be at least 1");
  if (!(half_scanned_fraction >= 0.0 && half_scanned_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "half_scanned_fraction must lie in [0, 1]");
  }
  if (surface_half_points < 16) throw Error(ErrorCode::InvalidArgument, "surface_half_points too small");
}

namespace {

struct Slot {
  double radius;
  double azimuth;
  std::size_t ring_start;
  std::size_t ring_size;
};

// Concentric rings of parking slots around the sensor, alternate rings
// staggered by half a slot.
std::vector<Slot> make_slots(std::size_t count) {
  std::vector<Slot> slots;
  for (int ring = 0; slots.size() < count; ++ring) {
    const double r = 9.0 + 6.0 * ring;
    const int n = static_cast<int>(std::floor(2.0 * kPi * r / 8.0));
    const double offset = (ring % 2 == 1) ? 0.5 : 0.0;
    const std::size_t start = slots.size();
    for (int k = 0; k < n; ++k) {
      slots.push_back({r, 2.0 * kPi * (k + offset) / n, start, static_cast<std::size_t>(n)});
    }
  }
  return slots;
}

struct SynthObject {
  int id = 0;
  bool vehicle = true;
  bool half_scanned = false;
  ClutterKind clutter_kind = ClutterKind::Bush;
  Size3 size;
  SurfaceSample surface;
  std::size_t scene = 0;
  std::size_t base_slot = 0;
  double yaw0 = 0.0;
  double side = 1.0;
  std::uint64_t seed = 0;
};

std::string cloud_name(int frame, int id) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "clouds/f%03d_o%04d.pcxy", frame, id);
  return buf;
}

// Angular interval of a box seen from the origin, relative to az0.
std::pair<double, double> box_azimuth_span(const OrientedBox& box, const Point3& origin, double az0) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  const RigidTransform t = box.sensor_from_object();
  for (const double sx : {-1.0, 1.0}) {
    for (const double sy : {-1.0, 1.0}) {
      const Point3 c = t.apply(Point3(sx * box.length / 2, sy * box.width / 2, 0.0)) - origin;
      const double a = wrap_angle(std::atan2(c.y(), c.x()) - az0);
      lo = std::min(lo, a);
      hi = std::max(hi, a);
    }
  }
  return {lo, hi};
}

}  // namespace

SynthSummary generate_dataset(const std::filesystem::path& out, const SynthOptions& options) {
  options.validate();
  const int total = options.vehicles + options.clutter;
  std::mt19937_64 layout_rng(derive_seed(options.seed, 0xA5A5));

  // Object ids are a seeded permutation so they carry no label information.
  std::vector<int> ids(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) ids[static_cast<std::size_t>(i)] = i + 1;
  for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[layout_rng() % i]);
  // Objects are dealt into scenes of at most objects_per_scene; each scene
  // gets its own ring layout and its own run of frames.
  const auto per_scene = static_cast<std::size_t>(options.objects_per_scene);
  const std::size_t scene_count = (static_cast<std::size_t>(total) + per_scene - 1) / per_scene;
  const std::vector<Slot> slots = make_slots(per_scene);
  std::vector<std::size_t> placement(static_cast<std::size_t>(total));
  for (std::size_t i = 0; i < placement.size(); ++i) placement[i] = i;
  for (std::size_t i = placement.size(); i > 1; --i) std::swap(placement[i - 1], placement[layout_rng() % i]);

  const int half_scanned = static_cast<int>(std::lround(options.half_scanned_fraction * options.vehicles));
  std::vector<SynthObject> objects;
  for (int i = 0; i < total; ++i) {
    SynthObject o;
    o.id = ids[static_cast<std::size_t>(i)];
    o.seed = derive_seed(options.seed, static_cast<std::uint64_t>(i) + 1);
    o.scene = placement[static_cast<std::size_t>(i)] / per_scene;
    o.base_slot = placement[static_cast<std::size_t>(i)] % per_scene;
    std::mt19937_64 rng(derive_seed(o.seed, 2));
    o.yaw0 = uniform(rng, -kPi, kPi);
    o.side = (rng() % 2 == 0) ? 1.0 : -1.0;
    if (i < options.vehicles) {
      GeneratedVehicle v = generate_vehicle(o.seed, options.surface_half_points);
      o.size = v.tmpl.size();
      o.surface = std::move(v.surface);
      o.half_scanned = i >= options.vehicles - half_scanned;
    } else {
      o.vehicle = false;
      o.clutter_kind = static_cast<ClutterKind>((i - options.vehicles) % 4);
      o.size = {uniform(rng, 3.8, 4.9), uniform(rng, 1.65, 1.95), uniform(rng, 1.4, 1.7)};
      o.surface = generate_clutter(o.clutter_kind, o.size, derive_seed(o.seed, 3), 2 * options.surface_half_points);
    }
    objects.push_back(std::move(o));
  }

  std::filesystem::create_directories(out / "clouds");
  std::filesystem::create_directories(out / "oracle");
  SceneSet scenes;
  scenes.sensor_origin = options.sensor_origin;
  SynthSummary summary;
  summary.objects = objects.size();

  // Every frame moves each object one slot along its own ring. Rings hold
  // different slot counts, so the objects in front of it change from frame to
  // frame while its range stays fixed.
  for (std::size_t sc = 0; sc < scene_count; ++sc) {
  std::vector<const SynthObject*> members;
  for (const auto& o : objects) {
    if (o.scene == sc) members.push_back(&o);
  }
  for (int f = 0; f < options.frames; ++f) {
    const int frame_index = static_cast<int>(sc) * options.frames + f;
    std::vector<OrientedBox> boxes;
    for (const SynthObject* op : members) {
      const SynthObject& o = *op;
      std::mt19937_64 rng(derive_seed(o.seed, 100 + static_cast<std::uint64_t>(f)));
      const Slot& base = slots[o.base_slot];
      const Slot slot = slots[base.ring_start +
                              (o.base_slot - base.ring_start + static_cast<std::size_t>(f)) % base.ring_size];
      OrientedBox box;
      box.center = Point3(slot.radius * std::cos(slot.azimuth), slot.radius * std::sin(slot.azimuth),
                          o.size.height / 2.0);
      box.length = o.size.length;
      box.width = o.size.width;
      box.height = o.size.height;
      if (!o.vehicle) {
        box.yaw = o.yaw0;
        box.detection_score = uniform(rng, 0.1, 0.48);
      } else if (o.half_scanned) {
        box.yaw = wrap_angle(slot.azimuth + o.side * kPi / 2 + uniform(rng, -0.25, 0.25));
        box.detection_score = uniform(rng, 0.3, 0.98);
      } else {
        box.yaw = wrap_angle(slot.azimuth + o.yaw0 + 2.0 * kPi * f / options.frames);
        box.detection_score = uniform(rng, 0.3, 0.98);
      }
      boxes.push_back(box);
    }

    SceneFrame frame;
    frame.frame = frame_index;
    for (std::size_t k = 0; k < members.size(); ++k) {
      const SynthObject& o = *members[k];
      const OrientedBox& box = boxes[k];
      const Point3 to_target = box.center - options.sensor_origin;
      const double az0 = std::atan2(to_target.y(), to_target.x());
      const auto span = box_azimuth_span(box, options.sensor_origin, az0);
      ScanSpec spec;
      spec.origin = options.sensor_origin;
      spec.angular_resolution = options.angular_resolution;
      spec.dropout = options.dropout;
      spec.noise_sigma = options.noise_sigma;
      spec.seed = derive_seed(o.seed, 1000 + static_cast<std::uint64_t>(f));
      // Only vehicles block other objects; clutter is too sparse to matter.
      for (std::size_t m = 0; m < members.size(); ++m) {
        if (m == k || !members[m]->vehicle) continue;
        const Point3 c = boxes[m].center - options.sensor_origin;
        if (c.head<2>().norm() >= to_target.head<2>().norm()) continue;
        const auto other = box_azimuth_span(boxes[m], options.sensor_origin, az0);
        if (other.second < span.first || other.first > span.second) continue;
        spec.occluders.push_back(boxes[m]);
      }
      PointCloud scan = simulate_scan(place_surface(o.surface, box), spec);
      if (scan.empty()) ++summary.empty_observations;
      ++summary.observations;
      const std::string file = cloud_name(frame_index, o.id);
      write_xyzf32(out / file, scan);
      SceneEntry entry;
      entry.object = {o.id, std::move(scan), box};
      entry.cloud_file = file;
      frame.objects.push_back(std::move(entry));
    }
    std::sort(frame.objects.begin(), frame.objects.end(),
              [](const SceneEntry& a, const SceneEntry& b) { return a.object.object_id < b.object.object_id; });
    scenes.frames.push_back(std::move(frame));
  }
  }
  save_scene_manifest(scenes, out);

  nlohmann::json oracle;
  oracle["format"] = "trapcc-synth-oracle";
  oracle["version"] = 1;
  oracle["seed"] = options.seed;
  nlohmann::json list = nlohmann::json::array();
  std::vector<const SynthObject*> sorted;
  for (const auto& o : objects) sorted.push_back(&o);
  std::sort(sorted.begin(), sorted.end(), [](const SynthObject* a, const SynthObject* b) { return a->id < b->id; });
  for (const SynthObject* o : sorted) {
    char name[64];
    std::snprintf(name, sizeof(name), "complete_o%04d.pcxy", o->id);
    write_xyzf32(out / "oracle" / name, o->surface.cloud);
    nlohmann::json j;
    j["id"] = o->id;
    j["label"] = o->vehicle ? "vehicle" : "clutter";
    j["kind"] = o->vehicle ? "vehicle" : to_string(o->clutter_kind);
    j["half_scanned"] = o->half_scanned;
    j["size"] = {o->size.length, o->size.width, o->size.height};
    j["complete_cloud"] = name;
    list.push_back(std::move(j));
  }
  oracle["objects"] = std::move(list);
  atomic_write(out / "oracle" / "manifest.json", oracle.dump(2) + "\n");
  return summary;
}

std::map<int, OracleObject> load_oracle(const std::filesystem::path& dataset_dir) {
  const std::filesystem::path dir = dataset_dir / "oracle";
  std::map<int, OracleObject> out;
  try {
    const auto j = nlohmann::json::parse(read_file(dir / "manifest.json"));
    if (j.at("format") != "trapcc-synth-oracle") throw Error(ErrorCode::Format, "not an oracle manifest");
    for (const auto& o : j.at("objects")) {
      OracleObject obj;
      obj.id = o.at("id").get<int>();
      obj.vehicle = o.at("label").get<std::string>() == "vehicle";
      obj.half_scanned = o.at("half_scanned").get<bool>();
      obj.kind = o.at("kind").get<std::string>();
      obj.complete = read_xyzf32(dir / o.at("complete_cloud").get<std::string>(), Frame::Object);
      out.emplace(obj.id, std::move(obj));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Format, (dir / "manifest.json").string() + ": " + e.what());
  }
  return out;
}

}  // namespace trapcc::synth
