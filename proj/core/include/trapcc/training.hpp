#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "trapcc/completion.hpp"
#include "trapcc/gt_pool.hpp"
#include "trapcc/network.hpp"
#include "trapcc/scene_io.hpp"
#include "trapcc/spatial_index.hpp"

namespace trapcc {

struct LossWeights {
  double partial = 1.0;
  double whole = 1.0;
  double input = 1.0;
};

struct LossParts {
  double l_p = 0.0;
  double l_c = 0.0;
  double l_mcd = 0.0;
  double total = 0.0;
};

/// Whole, front and back targets of one pool winner, metric object frame.
struct GtTargets {
  int source_track_id = 0;
  SpatialIndex whole;
  SpatialIndex front;
  SpatialIndex back;
};

struct TrainSample {
  std::string id;
  PreparedInput input;
  SpatialIndex raw_index;  // index over input.raw
  std::shared_ptr<const GtTargets> gt;
  GtMatch match;
};

/// Builds a sample from a prepared input and its retrieved targets.
TrainSample make_sample(std::string id, PreparedInput input, std::shared_ptr<const GtTargets> gt);

std::shared_ptr<const GtTargets> make_targets(const GtPool& pool, std::size_t whole_index);

/// Composite loss in metric units. `output` holds normalized network outputs;
/// they are scaled by the sample's scale before scoring. When `grad` is given
/// it receives d total / d output in normalized coordinates, times `grad_scale`.
LossParts compute_loss(const nn::NetOutput& output, const TrainSample& sample, const LossWeights& weights,
                       nn::OutputGrad* grad = nullptr, double grad_scale = 1.0);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;
};

/// One bias-corrected adaptive-moment update over parallel flat tensors.
/// Tensors whose `frozen` flag is set keep their values and moments.
void adam_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
               AdamState& state, const AdamConfig& config, const std::vector<bool>& frozen = {});

void adam_step(nn::NetworkParams& params, const nn::NetworkParams& grads, AdamState& state,
               const AdamConfig& config, const std::vector<bool>& frozen = {});

struct TrainConfig {
  int epochs = 200;
  int batch_size = 8;
  AdamConfig adam;
  std::uint64_t seed = 7;
  LossWeights weights;
  /// First half of the epochs trains P-Net on its own term, second half trains
  /// C-Net with P-Net frozen.
  bool stagewise = false;
  /// Writes `checkpoint_epoch_NNNN.bin` into checkpoint_dir every this many
  /// epochs; 0 disables intermediate checkpoints.
  int save_every = 0;
  std::filesystem::path checkpoint_dir;

  void validate() const;
};

struct EpochLoss {
  int epoch = 0;
  LossParts mean;
};

struct TrainResult {
  nn::NetworkParams params;
  std::vector<EpochLoss> log;
};

/// Mean batch loss and accumulated parameter gradient (mean over the batch).
LossParts batch_gradient(const nn::NetworkParams& params, std::span<const TrainSample* const> batch,
                         const LossWeights& weights, nn::NetworkParams& grads);

TrainResult train(std::span<const TrainSample> dataset, nn::NetworkParams init, const TrainConfig& config,
                  const std::function<void(const EpochLoss&)>& on_epoch = {});

void write_loss_csv(const std::filesystem::path& path, std::span<const EpochLoss> log);

struct DatasetOptions {
  /// 0 keeps every observation; otherwise a seeded subset of this size.
  std::size_t max_samples = 0;
  std::uint64_t seed = 7;
  double crop_margin = 0.1;
  /// Observations whose detection score is below this are skipped.
  double min_detection_score = 0.0;
  SceneGraphOptions graph;
  RetrievalOptions retrieval;
};

/// One sample per (frame, object) observation, targets retrieved once from
/// the pool. Samples are ordered by frame then object id.
std::vector<TrainSample> build_dataset(const SceneSet& scenes, const GtPool& pool,
                                       const nn::ArchitectureConfig& arch, const DatasetOptions& options = {});

}  // namespace trapcc
