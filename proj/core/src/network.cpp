#include "trapcc/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "trapcc/error.hpp"

namespace trapcc::nn {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::PerPointLinear: return "per_point_linear";
    case LayerKind::MaxPool: return "max_pool";
    case LayerKind::ConcatGlobal: return "concat_global";
    case LayerKind::Linear: return "linear";
    case LayerKind::ReLU: return "relu";
  }
  return "unknown";
}

void validate_chain(std::span<const LayerSpec> specs) {
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (specs[i].in_dim <= 0 || specs[i].out_dim <= 0) {
      throw Error(ErrorCode::ShapeMismatch, "layer " + std::to_string(i) + " has a non-positive dimension");
    }
    if (i > 0 && specs[i].in_dim != specs[i - 1].out_dim) {
      throw Error(ErrorCode::ShapeMismatch, "layer " + std::to_string(i) + " (" + to_string(specs[i].kind) +
                                                ") expects " + std::to_string(specs[i].in_dim) + " inputs, got " +
                                                std::to_string(specs[i - 1].out_dim));
    }
  }
}

const char* to_string(Variant v) {
  switch (v) {
    case Variant::CNet: return "c-net";
    case Variant::CPNet: return "cp-net";
    case Variant::Full: return "full";
  }
  return "unknown";
}

Variant variant_from_string(const std::string& s) {
  if (s == "c-net") return Variant::CNet;
  if (s == "cp-net") return Variant::CPNet;
  if (s == "full") return Variant::Full;
  throw Error(ErrorCode::InvalidArgument, "unknown variant '" + s + "' (expected c-net, cp-net or full)");
}

ArchitectureConfig ArchitectureConfig::standard() { return {}; }

ArchitectureConfig ArchitectureConfig::desk() {
  ArchitectureConfig a;
  a.stage1 = {32, 64};
  a.stage2 = {128, 128};
  a.decoder_hidden = {256, 256};
  a.partial_points = 128;
  a.output_points = 256;
  a.partial_input_points = 128;
  a.coarse_input_points = 256;
  a.neighbor_input_points = 128;
  return a;
}

namespace {

void append_mlp_specs(std::vector<LayerSpec>& specs, int in_dim, std::span<const int> widths, LayerKind kind) {
  int d = in_dim;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    specs.push_back({kind, d, widths[i]});
    d = widths[i];
    if (i + 1 < widths.size()) specs.push_back({LayerKind::ReLU, d, d});
  }
}

}  // namespace

std::vector<LayerSpec> ArchitectureConfig::encoder_specs() const {
  std::vector<LayerSpec> specs;
  append_mlp_specs(specs, 3, stage1, LayerKind::PerPointLinear);
  const int c1 = stage1.back();
  specs.push_back({LayerKind::MaxPool, c1, c1});
  specs.push_back({LayerKind::ConcatGlobal, c1, 2 * c1});
  append_mlp_specs(specs, 2 * c1, stage2, LayerKind::PerPointLinear);
  specs.push_back({LayerKind::MaxPool, feature_dim(), feature_dim()});
  return specs;
}

std::vector<LayerSpec> ArchitectureConfig::decoder_specs(int in_dim, int points) const {
  std::vector<int> widths = decoder_hidden;
  widths.push_back(3 * points);
  std::vector<LayerSpec> specs;
  append_mlp_specs(specs, in_dim, widths, LayerKind::Linear);
  return specs;
}

void ArchitectureConfig::validate() const {
  if (stage1.empty() || stage2.empty() || decoder_hidden.empty()) {
    throw Error(ErrorCode::ShapeMismatch, "architecture needs at least one layer per block");
  }
  for (const int v : {partial_points, output_points, partial_input_points, coarse_input_points,
                      neighbor_input_points}) {
    if (v <= 0) throw Error(ErrorCode::ShapeMismatch, "architecture point counts must be positive");
  }
  validate_chain(encoder_specs());
  validate_chain(decoder_specs(feature_dim(), partial_points));
  validate_chain(decoder_specs(c_decoder_input_dim(), output_points));
}

nlohmann::json ArchitectureConfig::to_json() const {
  nlohmann::json j;
  j["variant"] = to_string(variant);
  j["stage1"] = stage1;
  j["stage2"] = stage2;
  j["decoder_hidden"] = decoder_hidden;
  j["partial_points"] = partial_points;
  j["output_points"] = output_points;
  j["partial_input_points"] = partial_input_points;
  j["coarse_input_points"] = coarse_input_points;
  j["neighbor_input_points"] = neighbor_input_points;
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& s : encoder_specs()) layers.push_back({to_string(s.kind), s.in_dim, s.out_dim});
  j["encoder_layers"] = std::move(layers);
  return j;
}

ArchitectureConfig ArchitectureConfig::from_json(const nlohmann::json& j) {
  ArchitectureConfig a;
  a.variant = variant_from_string(j.at("variant").get<std::string>());
  a.stage1 = j.at("stage1").get<std::vector<int>>();
  a.stage2 = j.at("stage2").get<std::vector<int>>();
  a.decoder_hidden = j.at("decoder_hidden").get<std::vector<int>>();
  a.partial_points = j.at("partial_points").get<int>();
  a.output_points = j.at("output_points").get<int>();
  a.partial_input_points = j.at("partial_input_points").get<int>();
  a.coarse_input_points = j.at("coarse_input_points").get<int>();
  a.neighbor_input_points = j.at("neighbor_input_points").get<int>();
  a.validate();
  return a;
}

namespace {

// y = x W^T + b, computed row by row with a fixed accumulation order so each
// output row depends only on its own input row, bit for bit.
void linear_rows(const Matrix& x, const DenseLayer& layer, Matrix& y) {
  const Eigen::Index n = x.rows();
  const Eigen::Index in = x.cols();
  const Eigen::Index out = layer.weight.rows();
  if (layer.weight.cols() != in) {
    throw Error(ErrorCode::ShapeMismatch, "layer expects " + std::to_string(layer.weight.cols()) +
                                              " inputs, got " + std::to_string(in));
  }
  const Matrix wt = layer.weight.transpose();
  y.resize(n, out);
  const double* b = layer.bias.data();
  for (Eigen::Index r = 0; r < n; ++r) {
    double* __restrict yr = y.row(r).data();
    const double* xr = x.row(r).data();
    for (Eigen::Index j = 0; j < out; ++j) yr[j] = b[j];
    for (Eigen::Index k = 0; k < in; ++k) {
      const double xv = xr[k];
      const double* __restrict w = wt.row(k).data();
      for (Eigen::Index j = 0; j < out; ++j) yr[j] += xv * w[j];
    }
  }
}

}  // namespace

Matrix mlp_forward(const Mlp& mlp, const Matrix& x, MlpCache* cache) {
  if (cache) {
    cache->inputs.clear();
    cache->outputs.clear();
  }
  Matrix h = x;
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    Matrix y;
    linear_rows(h, mlp.layers[i], y);
    if (cache) {
      cache->inputs.push_back(std::move(h));
      cache->outputs.push_back(y);
    }
    if (i + 1 < mlp.layers.size()) y = y.cwiseMax(0.0);
    h = std::move(y);
  }
  return h;
}

Matrix mlp_backward(const Mlp& mlp, const MlpCache& cache, const Matrix& dy, Mlp& grad) {
  if (cache.inputs.size() != mlp.layers.size()) {
    throw Error(ErrorCode::NoForwardCache, "MLP cache does not match the network");
  }
  Matrix d = dy;
  for (std::size_t li = mlp.layers.size(); li-- > 0;) {
    if (li + 1 < mlp.layers.size()) {
      // ReLU: gradient passes only where the pre-activation was strictly positive.
      d = (cache.outputs[li].array() > 0.0).select(d, 0.0);
    }
    const Matrix& in = cache.inputs[li];
    grad.layers[li].weight.noalias() += d.transpose() * in;
    grad.layers[li].bias += d.colwise().sum().transpose();
    Matrix dx = d * mlp.layers[li].weight;
    d = std::move(dx);
  }
  return d;
}

namespace {

Vector column_max(const Matrix& m, std::vector<Eigen::Index>& argmax) {
  Vector out(m.cols());
  argmax.assign(static_cast<std::size_t>(m.cols()), 0);
  for (Eigen::Index c = 0; c < m.cols(); ++c) out[c] = m(0, c);
  for (Eigen::Index r = 1; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (m(r, c) > out[c]) {
        out[c] = m(r, c);
        argmax[static_cast<std::size_t>(c)] = r;
      }
    }
  }
  return out;
}

}  // namespace

Vector encoder_forward(const Encoder& enc, const Matrix& points, EncoderCache* cache) {
  if (points.rows() == 0) throw Error(ErrorCode::EmptyCloud, "encoder input has no points");
  if (points.cols() != 3) throw Error(ErrorCode::ShapeMismatch, "encoder input must be n x 3");
  EncoderCache local;
  EncoderCache& c = cache ? *cache : local;
  const Matrix h1 = mlp_forward(enc.stage1, points, cache ? &c.stage1 : nullptr);
  const Vector g1 = column_max(h1, c.argmax1);
  Matrix z(h1.rows(), 2 * h1.cols());
  z.leftCols(h1.cols()) = h1;
  z.rightCols(h1.cols()).rowwise() = g1.transpose();
  const Matrix h2 = mlp_forward(enc.stage2, z, cache ? &c.stage2 : nullptr);
  c.rows = points.rows();
  c.stage1_dim = h1.cols();
  return column_max(h2, c.argmax2);
}

Matrix encoder_backward(const Encoder& enc, const EncoderCache& cache, const Vector& dfeature, Encoder& grad) {
  if (cache.rows == 0 || cache.stage2.inputs.empty()) {
    throw Error(ErrorCode::NoForwardCache, "encoder backward without a cached forward pass");
  }
  const Eigen::Index f = dfeature.size();
  Matrix dh2 = Matrix::Zero(cache.rows, f);
  for (Eigen::Index c = 0; c < f; ++c) dh2(cache.argmax2[static_cast<std::size_t>(c)], c) = dfeature[c];
  const Matrix dz = mlp_backward(enc.stage2, cache.stage2, dh2, grad.stage2);
  const Eigen::Index c1 = cache.stage1_dim;
  Matrix dh1 = dz.leftCols(c1);
  const Vector dg1 = dz.rightCols(c1).colwise().sum().transpose();
  for (Eigen::Index c = 0; c < c1; ++c) dh1(cache.argmax1[static_cast<std::size_t>(c)], c) += dg1[c];
  return mlp_backward(enc.stage1, cache.stage1, dh1, grad.stage1);
}

Matrix decoder_forward(const Mlp& dec, const Vector& feature, MlpCache* cache) {
  if (!feature.allFinite()) throw Error(ErrorCode::InvalidArgument, "decoder feature is not finite");
  const Matrix row = feature.transpose();
  const Matrix out = mlp_forward(dec, row, cache);
  if (out.cols() % 3 != 0) throw Error(ErrorCode::ShapeMismatch, "decoder output is not a multiple of 3");
  return Eigen::Map<const Matrix>(out.data(), out.cols() / 3, 3);
}

Vector decoder_backward(const Mlp& dec, const MlpCache& cache, const Matrix& dpoints, Mlp& grad) {
  const Matrix drow = Eigen::Map<const Matrix>(dpoints.data(), 1, dpoints.size());
  const Matrix dx = mlp_backward(dec, cache, drow, grad);
  return dx.row(0).transpose();
}

namespace {

DenseLayer make_layer(int in, int out, std::mt19937_64* rng) {
  DenseLayer l{Matrix::Zero(out, in), Vector::Zero(out)};
  if (rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = dist(*rng);
    }
  }
  return l;
}

Mlp make_mlp(int in, std::span<const int> widths, std::mt19937_64* rng) {
  Mlp m;
  int d = in;
  for (const int w : widths) {
    m.layers.push_back(make_layer(d, w, rng));
    d = w;
  }
  return m;
}

Encoder make_encoder(const ArchitectureConfig& a, std::mt19937_64* rng) {
  Encoder e;
  e.stage1 = make_mlp(3, a.stage1, rng);
  e.stage2 = make_mlp(2 * a.stage1.back(), a.stage2, rng);
  return e;
}

Mlp make_decoder(const ArchitectureConfig& a, int in, int points, std::mt19937_64* rng) {
  std::vector<int> widths = a.decoder_hidden;
  widths.push_back(3 * points);
  return make_mlp(in, widths, rng);
}

NetworkParams make_params(const ArchitectureConfig& arch, std::mt19937_64* rng) {
  arch.validate();
  NetworkParams p;
  p.arch = arch;
  if (arch.has_p_net()) {
    p.p_encoder = make_encoder(arch, rng);
    p.p_decoder = make_decoder(arch, arch.feature_dim(), arch.partial_points, rng);
  }
  p.c_encoder = make_encoder(arch, rng);
  p.c_decoder = make_decoder(arch, arch.c_decoder_input_dim(), arch.output_points, rng);
  return p;
}

template <class Fn>
void visit_mlp(const std::string& prefix, const Mlp& m, Fn&& fn) {
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const auto& l = m.layers[i];
    const std::string base = prefix + "." + std::to_string(i);
    fn(base + ".weight", l.weight.data(), static_cast<std::size_t>(l.weight.size()),
       std::vector<std::uint32_t>{static_cast<std::uint32_t>(l.weight.rows()),
                                  static_cast<std::uint32_t>(l.weight.cols())});
    fn(base + ".bias", l.bias.data(), static_cast<std::size_t>(l.bias.size()),
       std::vector<std::uint32_t>{static_cast<std::uint32_t>(l.bias.size())});
  }
}

template <class Fn>
void visit_params(const NetworkParams& p, Fn&& fn) {
  if (p.arch.has_p_net()) {
    visit_mlp("p_net.encoder.stage1", p.p_encoder.stage1, fn);
    visit_mlp("p_net.encoder.stage2", p.p_encoder.stage2, fn);
    visit_mlp("p_net.decoder", p.p_decoder, fn);
  }
  visit_mlp("c_net.encoder.stage1", p.c_encoder.stage1, fn);
  visit_mlp("c_net.encoder.stage2", p.c_encoder.stage2, fn);
  visit_mlp("c_net.decoder", p.c_decoder, fn);
}

}  // namespace

NetworkParams NetworkParams::initialize(const ArchitectureConfig& arch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return make_params(arch, &rng);
}

NetworkParams NetworkParams::zeros_like() const { return make_params(arch, nullptr); }

std::vector<ConstTensorView> NetworkParams::tensors() const {
  std::vector<ConstTensorView> out;
  visit_params(*this, [&](std::string name, const double* data, std::size_t n, std::vector<std::uint32_t> dims) {
    out.push_back({std::move(name), std::span<const double>(data, n), std::move(dims)});
  });
  return out;
}

std::vector<TensorView> NetworkParams::tensors() {
  std::vector<TensorView> out;
  visit_params(*this, [&](std::string name, const double* data, std::size_t n, std::vector<std::uint32_t> dims) {
    // The visitor walks this (non-const) object, so dropping const is sound.
    out.push_back({std::move(name), std::span<double>(const_cast<double*>(data), n), std::move(dims)});
  });
  return out;
}

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.data.size();
  return n;
}

bool NetworkParams::all_finite() const {
  for (const auto& t : tensors()) {
    for (const double v : t.data) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

namespace {

Matrix mirrored_x(Matrix m) {
  m.col(0) = -m.col(0);
  return m;
}

Matrix run_half(const NetworkParams& params, const Matrix& canonical, HalfCache* cache) {
  const Vector f = encoder_forward(params.p_encoder, canonical, cache ? &cache->encoder : nullptr);
  return decoder_forward(params.p_decoder, f, cache ? &cache->decoder : nullptr);
}

}  // namespace

PNetResult p_net_forward(const NetworkParams& params, const std::optional<Matrix>& front,
                         const std::optional<Matrix>& back, ForwardCache* cache) {
  if (!params.arch.has_p_net()) throw Error(ErrorCode::InvalidArgument, "this variant has no P-Net");
  const bool has_front = front && front->rows() > 0;
  const bool has_back = back && back->rows() > 0;
  if (!has_front && !has_back) throw Error(ErrorCode::BothHalvesEmpty, "both input halves are empty");
  PNetResult r;
  if (has_front) {
    if (cache) cache->front.emplace();
    r.coarse_front = run_half(params, *front, cache ? &*cache->front : nullptr);
  }
  if (has_back) {
    if (cache) cache->back.emplace();
    r.coarse_back = mirrored_x(run_half(params, mirrored_x(*back), cache ? &*cache->back : nullptr));
  }
  const Eigen::Index nf = has_front ? r.coarse_front->rows() : 0;
  const Eigen::Index nb = has_back ? r.coarse_back->rows() : 0;
  r.coarse_stitched.resize(nf + nb, 3);
  if (has_front) r.coarse_stitched.topRows(nf) = *r.coarse_front;
  if (has_back) r.coarse_stitched.bottomRows(nb) = *r.coarse_back;
  if (cache) cache->front_rows = nf;
  return r;
}

Vector fuse_neighbors(const NetworkParams& params, std::span<const Matrix> neighbors, ForwardCache* cache) {
  const int f = params.arch.feature_dim();
  Vector fused = Vector::Zero(f);
  std::vector<int> source(static_cast<std::size_t>(f), -1);
  if (cache) cache->neighbors.assign(neighbors.size(), EncoderCache{});
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    const Vector v = encoder_forward(params.c_encoder, neighbors[i], cache ? &cache->neighbors[i] : nullptr);
    for (int d = 0; d < f; ++d) {
      if (v[d] > fused[d]) {
        fused[d] = v[d];
        source[static_cast<std::size_t>(d)] = static_cast<int>(i);
      }
    }
  }
  if (cache) cache->neighbor_source = std::move(source);
  return fused;
}

Matrix c_net_forward(const NetworkParams& params, const Matrix& coarse, std::span<const Matrix> neighbors,
                     ForwardCache* cache) {
  if (coarse.rows() == 0) throw Error(ErrorCode::EmptyCloud, "C-Net input has no points");
  const auto n = static_cast<std::size_t>(params.arch.coarse_input_points);
  std::vector<std::size_t> index;
  if (static_cast<std::size_t>(coarse.rows()) == n) {
    index.resize(n);
    std::iota(index.begin(), index.end(), std::size_t{0});
  } else {
    index = sample_fixed_indices(to_cloud(coarse, Frame::Object), n, SampleMode::FarthestPoint, 0);
  }
  Matrix input(static_cast<Eigen::Index>(n), 3);
  for (std::size_t i = 0; i < n; ++i) input.row(static_cast<Eigen::Index>(i)) = coarse.row(static_cast<Eigen::Index>(index[i]));

  const Vector target = encoder_forward(params.c_encoder, input, cache ? &cache->c_target : nullptr);
  Vector decoder_in;
  if (params.arch.uses_neighbors()) {
    const Vector fused = fuse_neighbors(params, neighbors, cache);
    decoder_in.resize(target.size() + fused.size());
    decoder_in << target, fused;
  } else {
    decoder_in = target;
    if (cache) {
      cache->neighbors.clear();
      cache->neighbor_source.clear();
    }
  }
  if (cache) cache->c_input_index = std::move(index);
  return decoder_forward(params.c_decoder, decoder_in, cache ? &cache->c_decoder : nullptr);
}

NetOutput forward(const NetworkParams& params, const NetInput& input, ForwardCache* cache) {
  if (cache) *cache = ForwardCache{};
  NetOutput out;
  if (params.arch.has_p_net()) {
    PNetResult p = p_net_forward(params, input.front, input.back, cache);
    out.coarse_front = std::move(p.coarse_front);
    out.coarse_back = std::move(p.coarse_back);
    out.coarse_stitched = std::move(p.coarse_stitched);
    out.detailed = c_net_forward(params, out.coarse_stitched, input.neighbors, cache);
  } else {
    out.detailed = c_net_forward(params, input.whole, input.neighbors, cache);
  }
  if (cache) cache->valid = true;
  return out;
}

void backward(const NetworkParams& params, const ForwardCache& cache, const OutputGrad& upstream,
              NetworkParams& grads) {
  if (!cache.valid) throw Error(ErrorCode::NoForwardCache, "backward called without a forward pass");
  const int f = params.arch.feature_dim();
  const Vector ddec_in = decoder_backward(params.c_decoder, cache.c_decoder, upstream.detailed, grads.c_decoder);
  const Vector dtarget = ddec_in.head(f);
  if (params.arch.uses_neighbors()) {
    const Vector dfused = ddec_in.tail(f);
    for (std::size_t i = 0; i < cache.neighbors.size(); ++i) {
      Vector dn = Vector::Zero(f);
      bool any = false;
      for (int d = 0; d < f; ++d) {
        if (cache.neighbor_source[static_cast<std::size_t>(d)] == static_cast<int>(i)) {
          dn[d] = dfused[d];
          any = true;
        }
      }
      if (any) encoder_backward(params.c_encoder, cache.neighbors[i], dn, grads.c_encoder);
    }
  }
  const Matrix dinput = encoder_backward(params.c_encoder, cache.c_target, dtarget, grads.c_encoder);
  if (!params.arch.has_p_net()) return;

  // Scatter the C-Net input gradient back onto the stitched coarse rows.
  Matrix dstitched = Matrix::Zero(
      cache.front_rows + (cache.back ? static_cast<Eigen::Index>(params.arch.partial_points) : 0), 3);
  for (std::size_t i = 0; i < cache.c_input_index.size(); ++i) {
    dstitched.row(static_cast<Eigen::Index>(cache.c_input_index[i])) += dinput.row(static_cast<Eigen::Index>(i));
  }
  if (cache.front) {
    Matrix d = dstitched.topRows(cache.front_rows);
    if (upstream.coarse_front) d += *upstream.coarse_front;
    const Vector df = decoder_backward(params.p_decoder, cache.front->decoder, d, grads.p_decoder);
    encoder_backward(params.p_encoder, cache.front->encoder, df, grads.p_encoder);
  }
  if (cache.back) {
    Matrix d = dstitched.bottomRows(dstitched.rows() - cache.front_rows);
    if (upstream.coarse_back) d += *upstream.coarse_back;
    const Vector df = decoder_backward(params.p_decoder, cache.back->decoder, mirrored_x(d), grads.p_decoder);
    encoder_backward(params.p_encoder, cache.back->encoder, df, grads.p_encoder);
  }
}

Matrix to_matrix(const PointCloud& cloud) {
  Matrix m(static_cast<Eigen::Index>(cloud.size()), 3);
  for (std::size_t i = 0; i < cloud.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = cloud[i].transpose();
  return m;
}

PointCloud to_cloud(const Matrix& m, Frame frame) {
  PointCloud c(frame);
  c.points.reserve(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) c.points.emplace_back(m(r, 0), m(r, 1), m(r, 2));
  return c;
}

}  // namespace trapcc::nn
