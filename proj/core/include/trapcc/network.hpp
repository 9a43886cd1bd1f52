#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "trapcc/geometry.hpp"

namespace trapcc::nn {

/// Row-major activations: one row per point.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class LayerKind { PerPointLinear, MaxPool, ConcatGlobal, Linear, ReLU };

const char* to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind;
  int in_dim;
  int out_dim;
};

/// Throws ShapeMismatch unless every layer's in_dim equals the previous out_dim.
void validate_chain(std::span<const LayerSpec> specs);

/// Ablation axis: C-Net alone, P-Net + C-Net, or P-Net + C-Net + scene graph.
enum class Variant { CNet, CPNet, Full };

const char* to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct ArchitectureConfig {
  Variant variant = Variant::Full;
  std::vector<int> stage1{128, 256};        // 3 -> 128 -> 256, max-pool
  std::vector<int> stage2{512, 1024};       // (2 x 256) -> 512 -> F, max-pool
  std::vector<int> decoder_hidden{1024, 1024};
  int partial_points = 512;                 // per-half coarse output
  int output_points = 1024;                 // detailed output
  int partial_input_points = 256;           // P-Net input per half
  int coarse_input_points = 1024;           // C-Net target input
  int neighbor_input_points = 1024;         // per neighbour cloud

  int feature_dim() const { return stage2.back(); }
  int c_decoder_input_dim() const { return variant == Variant::Full ? 2 * feature_dim() : feature_dim(); }
  bool has_p_net() const { return variant != Variant::CNet; }
  bool uses_neighbors() const { return variant == Variant::Full; }

  /// Full-size network.
  static ArchitectureConfig standard();
  /// Reduced widths and point counts that train in minutes on one core.
  static ArchitectureConfig desk();

  std::vector<LayerSpec> encoder_specs() const;
  std::vector<LayerSpec> decoder_specs(int in_dim, int points) const;
  void validate() const;

  nlohmann::json to_json() const;
  static ArchitectureConfig from_json(const nlohmann::json& j);
  bool operator==(const ArchitectureConfig&) const = default;
};

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
};

/// Per-row MLP: ReLU after every layer except the last.
struct Mlp {
  std::vector<DenseLayer> layers;
};

struct MlpCache {
  std::vector<Matrix> inputs;  // input of each layer
  std::vector<Matrix> outputs; // pre-activation output of each layer
};

Matrix mlp_forward(const Mlp& mlp, const Matrix& x, MlpCache* cache);
/// Accumulates parameter gradients into `grad` and returns d loss / d x.
Matrix mlp_backward(const Mlp& mlp, const MlpCache& cache, const Matrix& dy, Mlp& grad);

/// Two stacked PointNet blocks with a global-feature concatenation between them.
struct Encoder {
  Mlp stage1;
  Mlp stage2;
};

struct EncoderCache {
  MlpCache stage1;
  MlpCache stage2;
  std::vector<Eigen::Index> argmax1;
  std::vector<Eigen::Index> argmax2;
  Eigen::Index rows = 0;
  Eigen::Index stage1_dim = 0;
};

Vector encoder_forward(const Encoder& enc, const Matrix& points, EncoderCache* cache);
Matrix encoder_backward(const Encoder& enc, const EncoderCache& cache, const Vector& dfeature, Encoder& grad);

/// Fully-connected decoder; the output vector is reshaped to `points` x 3.
Matrix decoder_forward(const Mlp& dec, const Vector& feature, MlpCache* cache);
Vector decoder_backward(const Mlp& dec, const MlpCache& cache, const Matrix& dpoints, Mlp& grad);

struct TensorView {
  std::string name;
  std::span<double> data;
  std::vector<std::uint32_t> dims;
};

struct ConstTensorView {
  std::string name;
  std::span<const double> data;
  std::vector<std::uint32_t> dims;
};

/// Every weight and bias of P-Net and C-Net plus the architecture they follow.
/// P-Net tensors are absent for the C-Net-only variant.
struct NetworkParams {
  ArchitectureConfig arch;
  Encoder p_encoder;
  Mlp p_decoder;
  Encoder c_encoder;
  Mlp c_decoder;

  /// Uniform(+-sqrt(6 / (in + out))) weights, zero biases, fully seeded.
  static NetworkParams initialize(const ArchitectureConfig& arch, std::uint64_t seed);
  NetworkParams zeros_like() const;

  std::vector<TensorView> tensors();
  std::vector<ConstTensorView> tensors() const;
  std::size_t parameter_count() const;
  bool all_finite() const;
};

/// Network-ready input in normalized object coordinates.
struct NetInput {
  std::optional<Matrix> front;  // partial_input_points x 3, x >= 0 half
  std::optional<Matrix> back;   // partial_input_points x 3, x < 0 half (not mirrored)
  Matrix whole;                 // coarse_input_points x 3; C-Net input for the C-Net-only variant
  std::vector<Matrix> neighbors;
};

struct NetOutput {
  std::optional<Matrix> coarse_front;
  std::optional<Matrix> coarse_back;
  Matrix coarse_stitched;  // empty for the C-Net-only variant
  Matrix detailed;
};

struct HalfCache {
  EncoderCache encoder;
  MlpCache decoder;
};

struct ForwardCache {
  bool valid = false;
  std::optional<HalfCache> front;
  std::optional<HalfCache> back;
  Eigen::Index front_rows = 0;
  std::vector<std::size_t> c_input_index;
  EncoderCache c_target;
  std::vector<EncoderCache> neighbors;
  std::vector<int> neighbor_source;  // per feature dim: argmax neighbour, -1 for the zero floor
  MlpCache c_decoder;
};

/// Encodes each half (back half mirrored x -> -x into the front frame),
/// decodes partial_points per half and stitches the available halves.
struct PNetResult {
  std::optional<Matrix> coarse_front;
  std::optional<Matrix> coarse_back;
  Matrix coarse_stitched;
};

PNetResult p_net_forward(const NetworkParams& params, const std::optional<Matrix>& front,
                         const std::optional<Matrix>& back, ForwardCache* cache);

/// Neighbour feature: element-wise max of the zero vector and every
/// neighbour's encoding. Returns the zero vector with no neighbours.
Vector fuse_neighbors(const NetworkParams& params, std::span<const Matrix> neighbors, ForwardCache* cache);

Matrix c_net_forward(const NetworkParams& params, const Matrix& coarse, std::span<const Matrix> neighbors,
                     ForwardCache* cache);

NetOutput forward(const NetworkParams& params, const NetInput& input, ForwardCache* cache);

struct OutputGrad {
  std::optional<Matrix> coarse_front;
  std::optional<Matrix> coarse_back;
  Matrix detailed;
};

/// Reverse pass through the cached forward; accumulates into `grads`.
void backward(const NetworkParams& params, const ForwardCache& cache, const OutputGrad& upstream,
              NetworkParams& grads);

Matrix to_matrix(const PointCloud& cloud);
PointCloud to_cloud(const Matrix& m, Frame frame);

}  // namespace trapcc::nn
