#include "trapcc/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "trapcc/checkpoint.hpp"
#include "trapcc/error.hpp"
#include "trapcc/io.hpp"
#include "trapcc/metrics.hpp"

namespace trapcc {

TrainSample make_sample(std::string id, PreparedInput input, std::shared_ptr<const GtTargets> gt) {
  SpatialIndex raw_index(input.raw);
  return TrainSample{std::move(id), std::move(input), std::move(raw_index), std::move(gt), {}};
}

std::shared_ptr<const GtTargets> make_targets(const GtPool& pool, std::size_t whole_index) {
  return std::make_shared<const GtTargets>(GtTargets{pool.whole.at(whole_index).source_track_id,
                                                     SpatialIndex(pool.whole[whole_index].cloud),
                                                     SpatialIndex(pool.front_of(whole_index).cloud),
                                                     SpatialIndex(pool.back_of(whole_index).cloud)});
}

namespace {

PointCloud metric_cloud(const nn::Matrix& m, double scale) {
  PointCloud c(Frame::Object);
  c.points.reserve(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) c.points.emplace_back(scale * m(r, 0), scale * m(r, 1), scale * m(r, 2));
  return c;
}

nn::Matrix grad_matrix(const std::vector<Point3>& g, double factor) {
  nn::Matrix m(static_cast<Eigen::Index>(g.size()), 3);
  for (std::size_t i = 0; i < g.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = factor * g[i].transpose();
  return m;
}

}  // namespace

LossParts compute_loss(const nn::NetOutput& output, const TrainSample& sample, const LossWeights& weights,
                       nn::OutputGrad* grad, double grad_scale) {
  if (!sample.gt) throw Error(ErrorCode::InvalidArgument, "sample " + sample.id + " has no targets");
  const double s = sample.input.scale;
  LossParts parts;

  const SpatialIndex detailed(metric_cloud(output.detailed, s));
  const MetricWithGrad whole = chamfer_with_grad(detailed, sample.gt->whole);
  const MetricWithGrad input = mcd_with_grad(sample.raw_index, detailed);
  parts.l_c = whole.value;
  parts.l_mcd = input.value;

  const int halves = (output.coarse_front ? 1 : 0) + (output.coarse_back ? 1 : 0);
  std::optional<MetricWithGrad> front;
  std::optional<MetricWithGrad> back;
  if (output.coarse_front) {
    front = chamfer_with_grad(SpatialIndex(metric_cloud(*output.coarse_front, s)), sample.gt->front);
    parts.l_p += front->value;
  }
  if (output.coarse_back) {
    back = chamfer_with_grad(SpatialIndex(metric_cloud(*output.coarse_back, s)), sample.gt->back);
    parts.l_p += back->value;
  }
  if (halves > 0) parts.l_p /= halves;
  parts.total = weights.partial * parts.l_p + weights.whole * parts.l_c + weights.input * parts.l_mcd;

  if (grad) {
    const double k = grad_scale * s;
    grad->detailed = grad_matrix(whole.grad_s1, k * weights.whole) + grad_matrix(input.grad_s2, k * weights.input);
    grad->coarse_front.reset();
    grad->coarse_back.reset();
    if (front) grad->coarse_front = grad_matrix(front->grad_s1, k * weights.partial / halves);
    if (back) grad->coarse_back = grad_matrix(back->grad_s1, k * weights.partial / halves);
  }
  return parts;
}

void adam_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
               AdamState& state, const AdamConfig& config, const std::vector<bool>& frozen) {
  if (params.size() != grads.size()) throw Error(ErrorCode::ShapeMismatch, "parameter and gradient counts differ");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw Error(ErrorCode::ShapeMismatch, "optimizer state does not match");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size() || state.m[i].size() != params[i].size()) {
      throw Error(ErrorCode::ShapeMismatch, "tensor " + std::to_string(i) + " size mismatch");
    }
    if (i < frozen.size() && frozen[i]) continue;
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < params[i].size(); ++j) {
      const double g = grads[i][j];
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g;
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g * g;
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      params[i][j] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

void adam_step(nn::NetworkParams& params, const nn::NetworkParams& grads, AdamState& state,
               const AdamConfig& config, const std::vector<bool>& frozen) {
  if (!(params.arch == grads.arch)) throw Error(ErrorCode::ShapeMismatch, "gradient architecture differs");
  std::vector<std::span<double>> p;
  std::vector<std::span<const double>> g;
  for (const auto& t : params.tensors()) p.push_back(t.data);
  for (const auto& t : grads.tensors()) g.push_back(t.data);
  adam_step(p, g, state, config, frozen);
}

void TrainConfig::validate() const {
  if (epochs < 1) throw Error(ErrorCode::Config, "epochs must be at least 1");
  if (batch_size < 1) throw Error(ErrorCode::Config, "batch_size must be at least 1");
  if (!(adam.learning_rate >= 0.0) || !std::isfinite(adam.learning_rate)) {
    throw Error(ErrorCode::Config, "learning_rate must be a finite non-negative number");
  }
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw Error(ErrorCode::Config, "beta1 and beta2 must lie in [0, 1)");
  }
  if (!(adam.epsilon > 0.0)) throw Error(ErrorCode::Config, "epsilon must be positive");
  if (save_every < 0) throw Error(ErrorCode::Config, "save_every must be non-negative");
}

LossParts batch_gradient(const nn::NetworkParams& params, std::span<const TrainSample* const> batch,
                         const LossWeights& weights, nn::NetworkParams& grads) {
  LossParts sum;
  if (batch.empty()) return sum;
  const double inv = 1.0 / static_cast<double>(batch.size());
  nn::ForwardCache cache;
  nn::OutputGrad upstream;
  for (const TrainSample* s : batch) {
    const nn::NetOutput out = nn::forward(params, s->input.net, &cache);
    const LossParts parts = compute_loss(out, *s, weights, &upstream, inv);
    nn::backward(params, cache, upstream, grads);
    sum.l_p += parts.l_p;
    sum.l_c += parts.l_c;
    sum.l_mcd += parts.l_mcd;
    sum.total += parts.total;
  }
  sum.l_p *= inv;
  sum.l_c *= inv;
  sum.l_mcd *= inv;
  sum.total *= inv;
  return sum;
}

namespace {

// Fisher-Yates driven by raw engine output so the order only depends on the
// standardized mt19937_64 sequence.
void seeded_shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

std::vector<bool> p_net_mask(const nn::NetworkParams& params) {
  std::vector<bool> mask;
  for (const auto& t : params.tensors()) mask.push_back(t.name.rfind("p_net.", 0) == 0);
  return mask;
}

}  // namespace

TrainResult train(std::span<const TrainSample> dataset, nn::NetworkParams init, const TrainConfig& config,
                  const std::function<void(const EpochLoss&)>& on_epoch) {
  config.validate();
  if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "training dataset is empty");
  TrainResult result{std::move(init), {}};
  nn::NetworkParams& params = result.params;
  nn::NetworkParams grads = params.zeros_like();
  AdamState state;
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(dataset.size());

  const std::vector<bool> p_frozen = p_net_mask(params);
  std::vector<bool> c_frozen(p_frozen.size());
  for (std::size_t i = 0; i < p_frozen.size(); ++i) c_frozen[i] = !p_frozen[i];
  const int first_stage = (config.stagewise && params.arch.has_p_net()) ? config.epochs / 2 : 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    seeded_shuffle(order, rng);

    LossWeights weights = config.weights;
    const std::vector<bool>* frozen = nullptr;
    if (epoch <= first_stage) {
      weights.whole = 0.0;
      weights.input = 0.0;
      frozen = &c_frozen;
    } else if (first_stage > 0) {
      weights.partial = 0.0;
      frozen = &p_frozen;
    }
    if (epoch == first_stage + 1 && first_stage > 0) state = AdamState{};

    LossParts epoch_sum;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      std::vector<const TrainSample*> batch;
      for (std::size_t i = begin; i < end; ++i) batch.push_back(&dataset[order[i]]);
      for (auto& t : grads.tensors()) std::fill(t.data.begin(), t.data.end(), 0.0);
      const LossParts b = batch_gradient(params, batch, weights, grads);
      const double n = static_cast<double>(batch.size());
      epoch_sum.l_p += b.l_p * n;
      epoch_sum.l_c += b.l_c * n;
      epoch_sum.l_mcd += b.l_mcd * n;
      epoch_sum.total += b.total * n;
      adam_step(params, grads, state, config.adam, frozen ? *frozen : std::vector<bool>{});
    }
    const double n = static_cast<double>(dataset.size());
    EpochLoss entry{epoch, {epoch_sum.l_p / n, epoch_sum.l_c / n, epoch_sum.l_mcd / n, epoch_sum.total / n}};
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
    if (!params.all_finite()) throw Error(ErrorCode::InvalidArgument, "parameters diverged at epoch " + std::to_string(epoch));
    if (config.save_every > 0 && epoch % config.save_every == 0 && !config.checkpoint_dir.empty()) {
      char name[64];
      std::snprintf(name, sizeof(name), "checkpoint_epoch_%04d.bin", epoch);
      save_checkpoint(config.checkpoint_dir / name, params);
    }
  }
  return result;
}

void write_loss_csv(const std::filesystem::path& path, std::span<const EpochLoss> log) {
  std::ostringstream ss;
  ss.precision(17);
  ss << "epoch,l_p,l_c,l_mcd,total\n";
  for (const auto& e : log) {
    ss << e.epoch << ',' << e.mean.l_p << ',' << e.mean.l_c << ',' << e.mean.l_mcd << ',' << e.mean.total << '\n';
  }
  atomic_write(path, ss.str());
}

std::vector<TrainSample> build_dataset(const SceneSet& scenes, const GtPool& pool, const nn::ArchitectureConfig& arch,
                                       const DatasetOptions& options) {
  struct Ref {
    std::size_t frame;
    std::size_t object;
  };
  std::vector<Ref> refs;
  for (std::size_t f = 0; f < scenes.frames.size(); ++f) {
    for (std::size_t o = 0; o < scenes.frames[f].objects.size(); ++o) {
      const auto& box = scenes.frames[f].objects[o].object.box;
      if (box.detection_score.value_or(1.0) < options.min_detection_score) continue;
      refs.push_back({f, o});
    }
  }
  if (options.max_samples > 0 && refs.size() > options.max_samples) {
    std::vector<std::size_t> pick(refs.size());
    for (std::size_t i = 0; i < pick.size(); ++i) pick[i] = i;
    std::mt19937_64 rng(options.seed);
    seeded_shuffle(pick, rng);
    pick.resize(options.max_samples);
    std::sort(pick.begin(), pick.end());
    std::vector<Ref> chosen;
    for (const std::size_t i : pick) chosen.push_back(refs[i]);
    refs = std::move(chosen);
  }

  std::map<std::size_t, std::shared_ptr<const GtTargets>> targets;
  std::map<std::size_t, std::vector<SceneObject>> frame_cache;
  std::vector<TrainSample> out;
  for (const Ref& r : refs) {
    const SceneFrame& frame = scenes.frames[r.frame];
    auto it = frame_cache.find(r.frame);
    if (it == frame_cache.end()) it = frame_cache.emplace(r.frame, frame_objects(frame)).first;
    const std::vector<SceneObject>& objects = it->second;
    const auto graph = build_scene_graph(objects, options.graph);
    const SceneObject& target = objects[r.object];
    std::vector<const SceneObject*> nbs;
    for (const auto& n : graph.at(target.object_id).neighbors) {
      for (const auto& o : objects) {
        if (o.object_id == n.object_id) nbs.push_back(&o);
      }
    }
    PreparedInput input;
    try {
      input = prepare_input(target, nbs, arch, options.crop_margin);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::EmptyCloud) continue;
      throw;
    }
    const Size3 size{target.box.length, target.box.width, target.box.height};
    const GtMatch match = retrieve_gt(input.raw, size, pool, options.retrieval);
    auto& gt = targets[match.whole_index];
    if (!gt) gt = make_targets(pool, match.whole_index);
    TrainSample s = make_sample("f" + std::to_string(frame.frame) + "_o" + std::to_string(target.object_id),
                                std::move(input), gt);
    s.match = match;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace trapcc
