#include "trapcc/gt_pool.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include <nlohmann/json.hpp>

#include "trapcc/error.hpp"
#include "trapcc/io.hpp"
#include "trapcc/metrics.hpp"

namespace trapcc {

const char* to_string(GtKind kind) {
  switch (kind) {
    case GtKind::Whole: return "whole";
    case GtKind::FrontPartial: return "front";
    case GtKind::BackPartial: return "back";
  }
  return "unknown";
}

namespace {

GtKind kind_from_string(const std::string& s) {
  if (s == "whole") return GtKind::Whole;
  if (s == "front") return GtKind::FrontPartial;
  if (s == "back") return GtKind::BackPartial;
  throw Error(ErrorCode::Format, "unknown GT entry kind '" + s + "'");
}

Size3 mean_box_size(const TrackedInstance& inst) {
  Size3 s;
  for (const auto& obs : inst.observations) {
    s.length += obs.box.length;
    s.width += obs.box.width;
    s.height += obs.box.height;
  }
  const double n = static_cast<double>(inst.observations.size());
  return {s.length / n, s.width / n, s.height / n};
}

}  // namespace

PointCloud aggregate_instance(const TrackedInstance& inst) {
  if (inst.observations.empty()) {
    throw Error(ErrorCode::NoObservations, "track " + std::to_string(inst.track_id) + " has no observations");
  }
  PointCloud out(Frame::Object);
  for (const auto& obs : inst.observations) {
    const PointCloud local = to_object_frame(obs.cloud, obs.box);
    out.points.insert(out.points.end(), local.points.begin(), local.points.end());
  }
  return out;
}

CompletenessResult completeness_check(const PointCloud& cloud, double threshold) {
  CompletenessResult result;
  if (cloud.empty()) return result;
  const double n = static_cast<double>(cloud.size());
  bool pass = true;
  std::size_t v = 0;
  for (const View view : kAllViews) {
    const auto proj = project_2d(cloud, view);
    Point2 centroid = Point2::Zero();
    for (const auto& p : proj) centroid += p;
    centroid /= n;
    std::array<std::size_t, 4> counts{};
    for (const auto& p : proj) {
      const bool pu = p.x() >= centroid.x();
      const bool pv = p.y() >= centroid.y();
      const int q = pv ? (pu ? 0 : 1) : (pu ? 3 : 2);
      ++counts[static_cast<std::size_t>(q)];
    }
    for (std::size_t q = 0; q < 4; ++q) {
      result.fractions[v][q] = static_cast<double>(counts[q]) / n;
      if (result.fractions[v][q] < threshold) pass = false;
    }
    ++v;
  }
  result.pass = pass;
  return result;
}

FrontBack split_front_back(const PointCloud& cloud) {
  FrontBack fb;
  fb.front.frame = cloud.frame;
  fb.back.frame = cloud.frame;
  for (const auto& p : cloud.points) (p.x() >= 0.0 ? fb.front : fb.back).points.push_back(p);
  return fb;
}

GtPool build_pool(std::vector<TrackedInstance> instances, const PoolOptions& options) {
  if (!(options.threshold > 0.0 && options.threshold <= 0.25)) {
    throw Error(ErrorCode::InvalidArgument, "completeness threshold must lie in (0, 0.25]");
  }
  std::stable_sort(instances.begin(), instances.end(),
                   [](const TrackedInstance& a, const TrackedInstance& b) { return a.track_id < b.track_id; });
  GtPool pool;
  pool.completeness_threshold = options.threshold;
  pool.min_points = options.min_points;
  for (const auto& inst : instances) {
    if (inst.observations.empty()) {
      ++pool.warnings;
      continue;
    }
    PointCloud cloud = aggregate_instance(inst);
    if (cloud.size() < options.min_points) {
      ++pool.warnings;
      continue;
    }
    if (options.max_entry_points > 0 && cloud.size() > options.max_entry_points) {
      cloud = sample_fixed(cloud, options.max_entry_points, SampleMode::Random,
                           static_cast<std::uint64_t>(inst.track_id));
    }
    const CompletenessResult check = completeness_check(cloud, options.threshold);
    if (!check.pass) {
      ++pool.warnings;
      continue;
    }
    FrontBack halves = split_front_back(cloud);
    if (halves.front.empty() || halves.back.empty()) {
      ++pool.warnings;
      continue;
    }
    const int base_id = static_cast<int>(3 * pool.whole.size());
    const Size3 size = mean_box_size(inst);
    GtEntry whole{base_id, inst.track_id, GtKind::Whole, std::move(cloud), size, check.fractions, -1};
    GtEntry front{base_id + 1, inst.track_id, GtKind::FrontPartial, std::move(halves.front), size,
                  completeness_check(halves.front, options.threshold).fractions, base_id};
    GtEntry back{base_id + 2, inst.track_id, GtKind::BackPartial, std::move(halves.back), size,
                 completeness_check(halves.back, options.threshold).fractions, base_id};
    pool.whole.push_back(std::move(whole));
    pool.partial.push_back(std::move(front));
    pool.partial.push_back(std::move(back));
  }
  if (pool.whole.empty()) ++pool.warnings;
  return pool;
}

bool size_compatible(const Size3& input, const Size3& entry, double size_tol) {
  return std::abs(input.length - entry.length) <= size_tol * entry.length &&
         std::abs(input.width - entry.width) <= size_tol * entry.width &&
         std::abs(input.height - entry.height) <= size_tol * entry.height;
}

GtMatch retrieve_gt(const PointCloud& input, const Size3& input_size, const GtPool& pool,
                    const RetrievalOptions& options) {
  if (pool.whole.empty()) throw Error(ErrorCode::EmptyPool, "GT pool has no whole entries");
  require_non_empty(input, "retrieval input");
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < pool.whole.size(); ++i) {
    if (size_compatible(input_size, pool.whole[i].size, options.size_tol)) candidates.push_back(i);
  }
  GtMatch match;
  if (candidates.empty()) {
    match.size_fallback = true;
    candidates.resize(pool.whole.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i] = i;
  }
  match.used_mcd = input.size() < options.sparse_cutoff;
  const SpatialIndex input_index(input);
  double best = std::numeric_limits<double>::infinity();
  int best_track = std::numeric_limits<int>::max();
  for (const std::size_t i : candidates) {
    const GtEntry& entry = pool.whole[i];
    const SpatialIndex entry_index(entry.cloud);
    const double score = match.used_mcd ? mcd(input, entry_index) : chamfer(input_index, entry_index);
    if (score < best || (score == best && entry.source_track_id < best_track)) {
      best = score;
      best_track = entry.source_track_id;
      match.whole_index = i;
    }
  }
  match.score = best;
  return match;
}

namespace {

std::string entry_file_name(const GtEntry& e) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "entry_%05d_%s.pcxy", e.id, to_string(e.kind));
  return buf;
}

nlohmann::json entry_json(const GtEntry& e, double threshold) {
  nlohmann::json j;
  j["id"] = e.id;
  j["kind"] = to_string(e.kind);
  j["source_track_id"] = e.source_track_id;
  j["size"] = {e.size.length, e.size.width, e.size.height};
  j["file"] = entry_file_name(e);
  j["points"] = e.cloud.size();
  j["completeness_fractions"] = e.fractions;
  j["threshold"] = threshold;
  if (e.whole_id >= 0) j["whole_id"] = e.whole_id;
  return j;
}

}  // namespace

void save_pool(const GtPool& pool, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "trapcc-gt-pool";
  manifest["version"] = 1;
  manifest["threshold"] = pool.completeness_threshold;
  manifest["min_points"] = pool.min_points;
  manifest["warnings"] = pool.warnings;
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t i = 0; i < pool.whole.size(); ++i) {
    for (const GtEntry* e : {&pool.whole[i], &pool.front_of(i), &pool.back_of(i)}) {
      write_xyzf32(dir / entry_file_name(*e), e->cloud);
      entries.push_back(entry_json(*e, pool.completeness_threshold));
    }
  }
  manifest["entries"] = std::move(entries);
  atomic_write(dir / "pool.json", manifest.dump(2) + "\n");
}

GtPool load_pool(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(dir / "pool.json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Format, (dir / "pool.json").string() + ": " + e.what());
  }
  GtPool pool;
  try {
    if (manifest.at("format") != "trapcc-gt-pool") throw Error(ErrorCode::Format, "not a GT pool manifest");
    pool.completeness_threshold = manifest.at("threshold").get<double>();
    pool.min_points = manifest.at("min_points").get<std::size_t>();
    pool.warnings = manifest.value("warnings", std::size_t{0});
    for (const auto& j : manifest.at("entries")) {
      GtEntry e;
      e.id = j.at("id").get<int>();
      e.kind = kind_from_string(j.at("kind").get<std::string>());
      e.source_track_id = j.at("source_track_id").get<int>();
      const auto size = j.at("size").get<std::array<double, 3>>();
      e.size = {size[0], size[1], size[2]};
      e.fractions = j.at("completeness_fractions").get<QuadrantFractions>();
      e.whole_id = j.value("whole_id", -1);
      e.cloud = read_xyzf32(dir / j.at("file").get<std::string>(), Frame::Object);
      (e.kind == GtKind::Whole ? pool.whole : pool.partial).push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Format, (dir / "pool.json").string() + ": " + e.what());
  }
  if (pool.partial.size() != 2 * pool.whole.size()) {
    throw Error(ErrorCode::Format, "pool manifest must list front and back partials for every whole entry");
  }
  for (std::size_t i = 0; i < pool.whole.size(); ++i) {
    if (pool.front_of(i).whole_id != pool.whole[i].id || pool.back_of(i).whole_id != pool.whole[i].id ||
        pool.front_of(i).kind != GtKind::FrontPartial || pool.back_of(i).kind != GtKind::BackPartial) {
      throw Error(ErrorCode::Format, "pool manifest entries are out of order");
    }
  }
  return pool;
}

}  // namespace trapcc
