#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "trapcc/completion.hpp"
#include "trapcc/detection_filter.hpp"
#include "trapcc/error.hpp"
#include "trapcc/metrics.hpp"
#include "trapcc/synth.hpp"

using namespace trapcc;
using namespace trapcc::testing;

namespace {

double brute_contour(const PointCloud& a, const PointCloud& b, View v) {
  auto flat = [v](const PointCloud& c) {
    PointCloud out(Frame::Object);
    for (const auto& p : c.points) {
      const int drop = v == View::Side ? 1 : v == View::Front ? 0 : 2;
      Point3 q = p;
      q[drop] = 0.0;
      out.points.push_back(q);
    }
    return out;
  };
  return brute_chamfer(flat(a), flat(b));
}

SceneEntry entry(int id, const Point3& center, std::optional<double> score, const PointCloud& object_cloud) {
  SceneEntry e;
  e.object.object_id = id;
  e.object.box.center = center;
  e.object.box.length = 4.2;
  e.object.box.width = 1.8;
  e.object.box.height = 1.5;
  e.object.box.yaw = 0.4;
  e.object.box.detection_score = score;
  e.object.cloud = from_object_frame(object_cloud, e.object.box);
  e.cloud_file = "unused";
  return e;
}

SceneFrame mixed_frame() {
  std::mt19937_64 rng(3);
  SceneFrame f;
  f.frame = 2;
  const auto car = synth::generate_vehicle(5, 512).surface.cloud;
  const auto blob = random_cloud(rng, 200, -0.6, 0.6);
  f.objects.push_back(entry(1, {8, 0, 0.75}, 0.9, car));
  f.objects.push_back(entry(2, {8, 6, 0.75}, 0.2, car));
  f.objects.push_back(entry(3, {14, 3, 0.75}, 0.3, blob));
  f.objects.push_back(entry(4, {3, -9, 0.75}, std::nullopt, blob));
  f.objects.push_back(entry(5, {20, 1, 0.75}, 0.45, blob));
  return f;
}

nn::NetworkParams small_params() {
  auto a = nn::ArchitectureConfig::desk();
  return nn::NetworkParams::initialize(a, 9);
}

}  // namespace

TEST(MatchingScore, IdentityAndSubset) {
  std::mt19937_64 rng(1);
  const auto c = random_cloud(rng, 100);
  EXPECT_EQ(matching_score(c, c, 0.5), 0.0);
  PointCloud sub(Frame::Object);
  for (std::size_t i = 0; i < c.size(); i += 5) sub.points.push_back(c[i]);
  double contour = 0.0;
  for (View v : kAllViews) contour += contour_diff(sub, c, v);
  EXPECT_EQ(matching_score(sub, c, 0.3), 0.3 * (contour / 3));
}

TEST(MatchingScore, HandFixtureRecomputes) {
  const PointCloud raw({{0, 0, 0}, {1, 0.5, 0}, {0.2, -0.3, 0.9}}, Frame::Object);
  const PointCloud done({{0.1, 0, 0}, {1.2, 0.4, 0.1}, {0, 0, 1}, {-0.5, 0.2, 0.3}}, Frame::Object);
  const double contour =
      (brute_contour(raw, done, View::Side) + brute_contour(raw, done, View::Front) +
       brute_contour(raw, done, View::BirdsEye)) / 3;
  EXPECT_NEAR(matching_score(raw, done, 0.5), 0.5 * brute_mcd(raw, done) + 0.5 * contour, 1e-15);
}

TEST(FilterFrame, ConfidentObjectsAreNeverCompleted) {
  const auto params = small_params();
  const auto frame = mixed_frame();
  FilterConfig cfg;
  FilterCounters counters;
  const auto d = filter_frame(params, frame, cfg, counters);
  ASSERT_EQ(d.size(), 5u);
  EXPECT_TRUE(d[0].kept);
  EXPECT_EQ(d[0].reason, FilterReason::HighConfidence);
  EXPECT_FALSE(d[0].matching_score);
  EXPECT_EQ(d[3].reason, FilterReason::HighConfidence);  // no score
  EXPECT_EQ(d[3].detection_score, 1.0);
  EXPECT_EQ(counters.high_confidence, 2u);
  EXPECT_EQ(counters.completions, 3u);
  EXPECT_EQ(counters.deleted + counters.kept_low_confidence, 3u);
}

TEST(FilterFrame, DecisionsMatchManualPipeline) {
  const auto params = small_params();
  const auto frame = mixed_frame();
  FilterConfig cfg;
  cfg.matching_threshold = 0.05;
  FilterCounters counters;
  const auto d = filter_frame(params, frame, cfg, counters);
  const auto objects = frame_objects(frame);
  const auto graph = build_scene_graph(objects, cfg.graph);
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto& o = objects[i];
    if (o.box.detection_score.value_or(1.0) >= 0.5) continue;
    std::vector<const SceneObject*> nbs;
    for (const auto& n : graph.at(o.object_id).neighbors)
      for (const auto& other : objects)
        if (other.object_id == n.object_id) nbs.push_back(&other);
    const auto in = prepare_input(o, nbs, params.arch, cfg.crop_margin);
    const auto done = complete_prepared(params, in);
    const double score = matching_score(in.raw, done.detailed, cfg.contour_weight);
    ASSERT_TRUE(d[i].matching_score);
    EXPECT_EQ(*d[i].matching_score, score);
    EXPECT_EQ(d[i].kept, !(score > cfg.matching_threshold));
  }
}

TEST(FilterFrame, ThresholdIsStrict) {
  const auto params = small_params();
  const auto frame = mixed_frame();
  FilterConfig cfg;
  cfg.matching_threshold = 1e9;
  FilterCounters c0;
  const auto base = filter_frame(params, frame, cfg, c0);
  const double s = *base[1].matching_score;
  cfg.matching_threshold = s;
  FilterCounters c1;
  const auto at = filter_frame(params, frame, cfg, c1);
  EXPECT_TRUE(at[1].kept);
  EXPECT_EQ(at[1].reason, FilterReason::ScoreBelowThreshold);
  cfg.matching_threshold = std::nextafter(s, 0.0);
  FilterCounters c2;
  const auto below = filter_frame(params, frame, cfg, c2);
  EXPECT_FALSE(below[1].kept);
  EXPECT_EQ(below[1].reason, FilterReason::Deleted);
}

TEST(FilterFrame, HigherThresholdNeverDeletesMore) {
  const auto params = small_params();
  const auto frame = mixed_frame();
  std::size_t previous = frame.objects.size() + 1;
  for (double t : {0.0, 0.01, 0.05, 0.1, 0.3, 1.0, 10.0}) {
    FilterConfig cfg;
    cfg.matching_threshold = t;
    FilterCounters c;
    filter_frame(params, frame, cfg, c);
    EXPECT_LE(c.deleted, previous);
    previous = c.deleted;
  }
}

TEST(FilterFrame, EmptyBoxIsDeletedWithNote) {
  SceneFrame f;
  f.frame = 0;
  auto e = entry(1, {5, 0, 0.75}, 0.1, PointCloud({{0, 0, 0}}, Frame::Object));
  e.object.cloud = PointCloud({{50, 50, 50}}, Frame::Sensor);
  f.objects.push_back(e);
  FilterCounters c;
  const auto d = filter_frame(small_params(), f, {}, c);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_FALSE(d[0].kept);
  EXPECT_EQ(d[0].reason, FilterReason::Deleted);
  EXPECT_FALSE(d[0].note.empty());
  EXPECT_EQ(c.failures, 1u);
}

TEST(FilterConfig, RejectsBadValues) {
  FilterConfig c;
  c.contour_weight = 1.5;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.matching_threshold = -1;
  EXPECT_THROW(c.validate(), Error);
}

TEST(DecisionsCsv, Format) {
  std::vector<FilterDecision> d(2);
  d[0] = {0, 3, 0.9, std::nullopt, true, FilterReason::HighConfidence, ""};
  d[1] = {1, 4, 0.25, 0.5, false, FilterReason::Deleted, ""};
  const auto path = std::filesystem::temp_directory_path() / "trapcc_decisions.csv";
  write_decisions_csv(path, d);
  std::ifstream in(path);
  std::string l0, l1, l2;
  std::getline(in, l0);
  std::getline(in, l1);
  std::getline(in, l2);
  EXPECT_EQ(l0, "frame,object_id,detection_score,matching_score,kept,reason");
  EXPECT_EQ(l1, "0,3,0.90000000000000002,,1,high_confidence");
  EXPECT_EQ(l2, "1,4,0.25,0.5,0,deleted");
  std::filesystem::remove(path);
}
