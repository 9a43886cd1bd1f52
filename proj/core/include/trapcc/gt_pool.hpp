#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "trapcc/geometry.hpp"

namespace trapcc {

struct Observation {
  int frame_index = 0;
  PointCloud cloud;  // sensor frame
  OrientedBox box;
};

/// One physical vehicle observed across frames under a single track id.
struct TrackedInstance {
  int track_id = 0;
  std::vector<Observation> observations;
};

struct Size3 {
  double length = 0.0;
  double width = 0.0;
  double height = 0.0;
};

enum class GtKind { Whole, FrontPartial, BackPartial };

const char* to_string(GtKind kind);

/// Quadrant fractions per view, indexed [view][quadrant]. Views follow
/// kAllViews (side, front, bird's-eye); quadrants are (+,+), (-,+), (-,-), (+,-)
/// about the 2D centroid with ties counted on the positive side.
using QuadrantFractions = std::array<std::array<double, 4>, 3>;

struct GtEntry {
  int id = 0;
  int source_track_id = 0;
  GtKind kind = GtKind::Whole;
  PointCloud cloud{Frame::Object};
  Size3 size;
  QuadrantFractions fractions{};
  /// For partial entries, the id of the whole entry they were split from.
  int whole_id = -1;
};

struct GtPool {
  std::vector<GtEntry> whole;    // sorted by source_track_id
  std::vector<GtEntry> partial;  // front then back for each whole entry, same order
  double completeness_threshold = 0.10;
  std::size_t min_points = 1024;
  /// Number of instances rejected or skipped while building, plus one when the
  /// resulting pool is empty.
  std::size_t warnings = 0;

  const GtEntry& front_of(std::size_t whole_index) const { return partial.at(2 * whole_index); }
  const GtEntry& back_of(std::size_t whole_index) const { return partial.at(2 * whole_index + 1); }
};

struct CompletenessResult {
  bool pass = false;
  QuadrantFractions fractions{};
};

/// Concatenates every observation after mapping it into its own box frame.
PointCloud aggregate_instance(const TrackedInstance& inst);

/// Three-view quadrant balance test. Passes iff every quadrant of every view
/// holds at least `threshold` of the points.
CompletenessResult completeness_check(const PointCloud& cloud, double threshold);

struct FrontBack {
  PointCloud front{Frame::Object};  // x >= 0
  PointCloud back{Frame::Object};   // x < 0
};

FrontBack split_front_back(const PointCloud& cloud);

struct PoolOptions {
  double threshold = 0.10;
  std::size_t min_points = 1024;
  /// Whole entries larger than this are reduced by a seeded random subsample
  /// (seed = track id) before the completeness test. 0 keeps every point.
  std::size_t max_entry_points = 2048;
};

GtPool build_pool(std::vector<TrackedInstance> instances, const PoolOptions& options = {});

struct RetrievalOptions {
  double size_tol = 0.15;
  std::size_t sparse_cutoff = 256;
};

struct GtMatch {
  std::size_t whole_index = 0;  // into pool.whole
  double score = 0.0;
  bool used_mcd = false;
  bool size_fallback = false;
};

/// Size-gated shape retrieval: MCD for sparse inputs, Chamfer otherwise.
GtMatch retrieve_gt(const PointCloud& input, const Size3& input_size, const GtPool& pool,
                    const RetrievalOptions& options = {});

bool size_compatible(const Size3& input, const Size3& entry, double size_tol);

/// Pool directory: pool.json manifest plus one XYZF32 file per entry.
void save_pool(const GtPool& pool, const std::filesystem::path& dir);
GtPool load_pool(const std::filesystem::path& dir);

}  // namespace trapcc
