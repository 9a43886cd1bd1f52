#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "trapcc/checkpoint.hpp"
#include "trapcc/error.hpp"
#include "trapcc/metrics.hpp"
#include "trapcc/synth.hpp"
#include "trapcc/training.hpp"

using namespace trapcc;
using namespace trapcc::testing;

namespace {

nn::ArchitectureConfig micro(nn::Variant v = nn::Variant::Full) {
  nn::ArchitectureConfig a;
  a.variant = v;
  a.stage1 = {8, 8};
  a.stage2 = {8, 8};
  a.decoder_hidden = {16};
  a.partial_points = 6;
  a.output_points = 12;
  a.partial_input_points = 16;
  a.coarse_input_points = 12;
  a.neighbor_input_points = 16;
  return a;
}

std::shared_ptr<const GtTargets> targets_from(const PointCloud& whole) {
  const auto fb = split_front_back(whole);
  return std::make_shared<const GtTargets>(GtTargets{1, SpatialIndex(whole), SpatialIndex(fb.front), SpatialIndex(fb.back)});
}

/// A scan of a generated vehicle seen from one side plus its complete surface.
TrainSample vehicle_sample(std::uint64_t seed, const nn::ArchitectureConfig& arch, int neighbours = 1) {
  const auto v = synth::generate_vehicle(seed, 512);
  std::mt19937_64 rng(seed);
  SceneObject target;
  target.object_id = 1;
  target.box.length = v.tmpl.length;
  target.box.width = v.tmpl.width;
  target.box.height = v.tmpl.height();
  target.box.yaw = 0.3;
  target.box.center = {6, 2, target.box.height / 2};
  PointCloud obj(Frame::Object);
  for (const auto& p : v.surface.cloud.points)
    if (p.y() > 0.2 || p.x() > 1.0) obj.points.push_back(p);
  target.cloud = from_object_frame(obj, target.box);
  std::vector<SceneObject> nbs;
  for (int i = 0; i < neighbours; ++i) {
    SceneObject n = target;
    n.object_id = 2 + i;
    n.box.center += Point3(0, 5.0 * (i + 1), 0);
    n.cloud = from_object_frame(random_cloud(rng, 40, -0.8, 0.8), n.box);
    nbs.push_back(n);
  }
  std::vector<const SceneObject*> ptrs;
  for (const auto& n : nbs) ptrs.push_back(&n);
  return make_sample("s" + std::to_string(seed), prepare_input(target, ptrs, arch), targets_from(v.surface.cloud));
}

nn::Matrix scaled(const PointCloud& c, double s) {
  nn::Matrix m = nn::to_matrix(c);
  return m / s;
}

}  // namespace

TEST(Loss, PerfectOutputScoresZero) {
  std::mt19937_64 rng(1);
  const auto whole = random_cloud(rng, 64);
  const auto fb = split_front_back(whole);
  PreparedInput in;
  in.scale = 2.0;
  in.raw = PointCloud(std::vector<Point3>(whole.points.begin(), whole.points.begin() + 20), Frame::Object);
  const TrainSample s = make_sample("perfect", in, targets_from(whole));
  nn::NetOutput out;
  out.coarse_front = scaled(fb.front, 2.0);
  out.coarse_back = scaled(fb.back, 2.0);
  out.detailed = scaled(whole, 2.0);
  const auto parts = compute_loss(out, s, {});
  EXPECT_EQ(parts.l_p, 0.0);
  EXPECT_EQ(parts.l_c, 0.0);
  EXPECT_EQ(parts.l_mcd, 0.0);
  EXPECT_EQ(parts.total, 0.0);
}

TEST(Loss, PartsRecomputeFromMetrics) {
  const PointCloud whole({{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, Frame::Object);
  const PointCloud raw({{0.5, 0.5, 0}, {-1, 0.2, 0}}, Frame::Object);
  const PointCloud det({{0.9, 0.1, 0}, {-0.8, 0, 0.2}, {0, 1.2, 0}, {0.1, 0, 0.7}}, Frame::Object);
  const PointCloud cf({{1.1, 0, 0}, {0.2, 0.9, 0}}, Frame::Object);
  const PointCloud cb({{-0.7, 0.1, 0}}, Frame::Object);
  PreparedInput in;
  in.scale = 4.0;
  in.raw = raw;
  const TrainSample s = make_sample("fixture", in, targets_from(whole));
  nn::NetOutput out;
  out.detailed = scaled(det, 4.0);
  out.coarse_front = scaled(cf, 4.0);
  out.coarse_back = scaled(cb, 4.0);
  const LossWeights w{0.5, 2.0, 3.0};
  const auto parts = compute_loss(out, s, w);
  const auto fb = split_front_back(whole);
  const double lp = (brute_chamfer(cf, fb.front) + brute_chamfer(cb, fb.back)) / 2;
  EXPECT_NEAR(parts.l_p, lp, 1e-14);
  EXPECT_NEAR(parts.l_c, brute_chamfer(det, whole), 1e-14);
  EXPECT_NEAR(parts.l_mcd, brute_mcd(raw, det), 1e-14);
  EXPECT_NEAR(parts.total, 0.5 * lp + 2.0 * parts.l_c + 3.0 * parts.l_mcd, 1e-13);

  out.coarse_back.reset();
  const auto front_only = compute_loss(out, s, w);
  EXPECT_NEAR(front_only.l_p, brute_chamfer(cf, fb.front), 1e-14);
}

TEST(Loss, CompositeGradientMatchesFiniteDifferences) {
  const auto arch = micro();
  auto params = nn::NetworkParams::initialize(arch, 3);
  std::vector<TrainSample> batch;
  for (std::uint64_t i = 0; i < 3; ++i) batch.push_back(vehicle_sample(40 + i, arch, static_cast<int>(i)));
  std::vector<const TrainSample*> ptrs;
  for (const auto& s : batch) ptrs.push_back(&s);
  auto grads = params.zeros_like();
  batch_gradient(params, ptrs, {}, grads);
  auto loss = [&] {
    auto scratch = params.zeros_like();
    return batch_gradient(params, ptrs, {}, scratch).total;
  };
  auto pt = params.tensors();
  const auto gt = grads.tensors();
  std::mt19937_64 rng(4);
  int checked = 0;
  while (checked < 50) {
    const std::size_t t = std::uniform_int_distribution<std::size_t>(0, pt.size() - 1)(rng);
    const std::size_t i = std::uniform_int_distribution<std::size_t>(0, pt[t].data.size() - 1)(rng);
    const double num = central_difference(pt[t].data[i], 1e-5, loss);
    EXPECT_LT(relative_error(gt[t].data[i], num, 1e-4), 1e-3) << pt[t].name << "[" << i << "]";
    ++checked;
  }
}

TEST(Adam, ZeroGradientKeepsParametersAndDecaysMoments) {
  std::vector<double> p{1.0, -2.0}, g{0.0, 0.0};
  AdamState st;
  st.m = {{0.5, -0.5}};
  st.v = {{0.25, 0.25}};
  std::vector<std::span<double>> ps{p};
  std::vector<std::span<const double>> gs{g};
  AdamConfig cfg;
  cfg.learning_rate = 0.0;
  adam_step(ps, gs, st, cfg);
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0}));
  EXPECT_DOUBLE_EQ(st.m[0][0], 0.45);
  EXPECT_DOUBLE_EQ(st.v[0][1], 0.25 * 0.999);
}

TEST(Adam, FirstStepIsLearningRate) {
  std::vector<double> p{0.0}, g{1.0};
  AdamState st;
  std::vector<std::span<double>> ps{p};
  std::vector<std::span<const double>> gs{g};
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  adam_step(ps, gs, st, cfg);
  EXPECT_NEAR(p[0], -0.1 / (1.0 + 1e-8), 1e-15);
}

TEST(Adam, QuadraticTrajectoryMatchesScriptedRecomputation) {
  // f(x) = (x - 3)^2, gradient 2 (x - 3).
  std::vector<double> p{0.0}, g{0.0};
  AdamState st;
  AdamConfig cfg;
  cfg.learning_rate = 0.05;
  double x = 0.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 3; ++t) {
    g[0] = 2 * (p[0] - 3);
    std::vector<std::span<double>> ps{p};
    std::vector<std::span<const double>> gs{g};
    adam_step(ps, gs, st, cfg);
    const double gx = 2 * (x - 3);
    m = 0.9 * m + 0.1 * gx;
    v = 0.999 * v + 0.001 * gx * gx;
    x -= 0.05 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    EXPECT_NEAR(p[0], x, 1e-15);
  }
}

TEST(Adam, FrozenTensorsUntouched) {
  std::vector<double> a{1.0}, b{1.0}, ga{1.0}, gb{1.0};
  AdamState st;
  std::vector<std::span<double>> ps{a, b};
  std::vector<std::span<const double>> gs{ga, gb};
  adam_step(ps, gs, st, {}, {true, false});
  EXPECT_EQ(a[0], 1.0);
  EXPECT_LT(b[0], 1.0);
  EXPECT_EQ(st.m[0][0], 0.0);
}

TEST(Train, ConfigValidation) {
  TrainConfig c;
  c.epochs = 0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.adam.beta1 = 1.0;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_THROW(train({}, nn::NetworkParams::initialize(micro(), 1), TrainConfig{}), Error);
}

TEST(Train, ZeroLearningRateKeepsLossConstant) {
  const auto arch = micro();
  const std::vector<TrainSample> ds{vehicle_sample(50, arch)};
  TrainConfig c;
  c.epochs = 4;
  c.adam.learning_rate = 0.0;
  const auto r = train(ds, nn::NetworkParams::initialize(arch, 2), c);
  ASSERT_EQ(r.log.size(), 4u);
  for (const auto& e : r.log) EXPECT_EQ(e.mean.total, r.log.front().mean.total);
}

TEST(Train, RepeatRunsAreBitIdentical) {
  const auto arch = micro();
  std::vector<TrainSample> ds;
  for (std::uint64_t i = 0; i < 5; ++i) ds.push_back(vehicle_sample(60 + i, arch));
  TrainConfig c;
  c.epochs = 6;
  c.batch_size = 2;
  const auto a = train(ds, nn::NetworkParams::initialize(arch, 5), c);
  const auto b = train(ds, nn::NetworkParams::initialize(arch, 5), c);
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) EXPECT_EQ(a.log[i].mean.total, b.log[i].mean.total);
  EXPECT_EQ(encode_checkpoint(a.params), encode_checkpoint(b.params));
  EXPECT_LT(a.log.back().mean.total, a.log.front().mean.total);
}

TEST(Train, StagewiseFreezesTheOtherNetwork) {
  const auto arch = micro();
  const std::vector<TrainSample> ds{vehicle_sample(70, arch), vehicle_sample(71, arch)};
  const auto init = nn::NetworkParams::initialize(arch, 6);
  TrainConfig c;
  c.epochs = 2;
  c.stagewise = true;
  TrainConfig first = c;
  first.epochs = 1;
  first.stagewise = false;
  first.weights = {1.0, 0.0, 0.0};
  // Stage one trains P-Net alone; afterwards P-Net stays fixed, so its
  // tensors match a single P-Net-only epoch.
  const auto staged = train(ds, init, c);
  const auto p_only = train(ds, init, first);
  const auto ts = staged.params.tensors();
  const auto tp = p_only.params.tensors();
  const auto ti = init.tensors();
  for (std::size_t t = 0; t < ts.size(); ++t) {
    if (ts[t].name.rfind("p_net", 0) == 0) {
      EXPECT_TRUE(std::equal(ts[t].data.begin(), ts[t].data.end(), tp[t].data.begin())) << ts[t].name;
    } else {
      EXPECT_FALSE(std::equal(ts[t].data.begin(), ts[t].data.end(), ti[t].data.begin())) << ts[t].name;
    }
  }
}

TEST(Train, LossCsvFormat) {
  const std::vector<EpochLoss> log{{1, {0.5, 0.25, 0.125, 0.875}}, {2, {0.4, 0.2, 0.1, 0.7}}};
  const auto path = std::filesystem::temp_directory_path() / "trapcc_loss.csv";
  write_loss_csv(path, log);
  std::ifstream in(path);
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  EXPECT_EQ(header, "epoch,l_p,l_c,l_mcd,total");
  EXPECT_EQ(first.substr(0, 2), "1,");
  std::filesystem::remove(path);
}
